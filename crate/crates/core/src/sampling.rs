//! Seeded element generators used by the verifiers and the acceptance suite.
//!
//! Plain Gaussian elements are almost never strongly orthogonal to each
//! other, so most generators here plant shared singular vectors, kernels,
//! or block supports on purpose.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::algebra::{
    decompose, haar_unitary_with, random_block_vector, random_element_with, BlockStructure, CMat,
    CVec, Element, Tolerance, C64,
};

pub fn gaussian<R: Rng + ?Sized>(s: &BlockStructure, rng: &mut R) -> Element {
    random_element_with(s, None, rng).expect("no rank constraint")
}

/// Sum of `rank` block-local rank-one terms, with `rank` uniform in `1..=N`.
pub fn low_rank<R: Rng + ?Sized>(s: &BlockStructure, rng: &mut R) -> Element {
    let rank = rng.random_range(1..=s.ambient_dim());
    random_element_with(s, Some(rank), rng).expect("rank within ambient dimension")
}

/// `ξ ⊗ ζ` with unit vectors in a random block.
pub fn rank_one<R: Rng + ?Sized>(s: &BlockStructure, rng: &mut R) -> Element {
    let lambda = rng.random_range(0..s.num_blocks());
    let n = s.dim(lambda);
    let xi = random_block_vector(n, rng);
    let zeta = random_block_vector(n, rng);
    Element::rank_one(s, lambda, &xi, &zeta)
}

/// A matrix unit `E_ij` of a random block.
pub fn matrix_unit<R: Rng + ?Sized>(s: &BlockStructure, rng: &mut R) -> Element {
    let lambda = rng.random_range(0..s.num_blocks());
    let n = s.dim(lambda);
    Element::matrix_unit(s, lambda, rng.random_range(0..n), rng.random_range(0..n))
}

/// Orthogonal projection of random nonzero rank with a Haar eigenbasis.
pub fn projection<R: Rng + ?Sized>(s: &BlockStructure, rng: &mut R) -> Element {
    let n = s.ambient_dim();
    let rank = rng.random_range(1..=n);
    let mut diag: Vec<f64> = (0..n).map(|i| if i < rank { 1.0 } else { 0.0 }).collect();
    diag.shuffle(rng);
    let d = Element::real_diagonal(s, &diag).expect("diagonal length matches");
    let u = haar_unitary_with(s, rng);
    u.mul(&d).and_then(|p| p.mul(&u.adjoint())).expect("same structure")
}

/// Nonzero multiple of a Haar unitary.
pub fn coisometry<R: Rng + ?Sized>(s: &BlockStructure, rng: &mut R) -> Element {
    let c = C64::from_polar(rng.random_range(0.5..2.0), rng.random_range(0.0..std::f64::consts::TAU));
    haar_unitary_with(s, rng).scale(c)
}

/// Random element with singular vectors drawn from a shared basis, so that
/// samples built from the same `basis` are often orthogonal to each other.
pub fn from_basis<R: Rng + ?Sized>(s: &BlockStructure, basis: &Element, rng: &mut R) -> Element {
    let blocks = (0..s.num_blocks())
        .map(|l| {
            let n = s.dim(l);
            let b = basis.block(l);
            let mut m = CMat::zeros(n, n);
            if rng.random_bool(0.25) {
                return m;
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            let rank = rng.random_range(1..=n);
            let top = rng.random_range(0.5..2.0);
            for (k, &i) in idx[..rank].iter().enumerate() {
                let sigma = if k == 0 { top } else { top * rng.random_range(0.1..0.9) };
                let zeta = random_block_vector(n, rng);
                m += b.column(i) * zeta.adjoint() * C64::new(sigma, 0.0);
            }
            m
        })
        .collect();
    Element::validate(s, blocks).expect("finite entries")
}

/// One of the generators above, picked at random.
pub fn mixed<R: Rng + ?Sized>(s: &BlockStructure, rng: &mut R) -> Element {
    match rng.random_range(0..6) {
        0 => gaussian(s, rng),
        1 | 2 => low_rank(s, rng),
        3 => rank_one(s, rng),
        4 => projection(s, rng),
        _ => coisometry(s, rng),
    }
}

/// `(x, y)` with `x ⊥ˢ y` by construction: `y = (I − E_ξ)w` for a unit
/// `ξ ∈ M_{|x*|}` inside one block, so `ξ ∈ ker y*`.
pub fn orthogonal_pair<R: Rng + ?Sized>(
    x: Element,
    tol: &Tolerance,
    rng: &mut R,
) -> (Element, Element) {
    let s = x.structure().clone();
    let d = decompose(&x, tol);
    if d.is_zero() {
        let y = mixed(&s, rng);
        return (x, y);
    }
    let j = rng.random_range(0..d.m_left.dim());
    let xi = d.m_left.column(j);
    let w = if rng.random_bool(0.5) { gaussian(&s, rng) } else { low_rank(&s, rng) };
    let lambda = d.m_left.tags()[j].expect("top vectors are block-local");
    let local = s.restrict(lambda, &xi);
    // exact zero on 1×1 blocks, where 1 − |ξ|² would only be rounding noise
    let complement = Element::identity(&s).map_blocks(|l, b| match l {
        _ if l != lambda => b.clone(),
        _ if b.nrows() == 1 => CMat::zeros(1, 1),
        _ => b - &local * local.adjoint(),
    });
    let y = complement.mul(&w).expect("same structure");
    (x, y)
}

/// `(x, y)` with `ξ ∈ M_{|x*|}` placed in the range of `y`: `y = E_ξ w + v`
/// where `v` avoids the block of `ξ`, so `x` is not orthogonal to `y` when
/// the top cluster of `x` is one-dimensional.
pub fn non_orthogonal_pair<R: Rng + ?Sized>(
    x: Element,
    tol: &Tolerance,
    rng: &mut R,
) -> (Element, Element) {
    let s = x.structure().clone();
    let d = decompose(&x, tol);
    if d.is_zero() {
        let y = mixed(&s, rng);
        return (x, y);
    }
    let xi = d.m_left.column(0);
    let lambda = d.m_left.tags()[0].expect("top vectors are block-local");
    let n = s.dim(lambda);
    let zeta = random_block_vector(n, rng);
    let y = Element::rank_one(&s, lambda, &s.restrict(lambda, &xi), &zeta);
    let extra = gaussian(&s, rng).map_blocks(|l, b| if l == lambda { CMat::zeros(n, n) } else { b.clone() });
    (x, y.add(&extra).expect("same structure"))
}

/// `(I − E_ξ) w` for a random block-local unit `ξ`: never right symmetric.
/// On a 1×1 block the complement is written as an exact zero.
pub fn singular<R: Rng + ?Sized>(s: &BlockStructure, rng: &mut R) -> Element {
    let lambda = rng.random_range(0..s.num_blocks());
    let xi = random_block_vector(s.dim(lambda), rng);
    let complement = Element::identity(s).map_blocks(|l, b| match l {
        _ if l != lambda => b.clone(),
        _ if b.nrows() == 1 => CMat::zeros(1, 1),
        _ => b - &xi * xi.adjoint(),
    });
    complement.mul(&gaussian(s, rng)).expect("same structure")
}

/// `2 ξζ* + (I − E_ξ) g (I − E_ζ)/‖g‖` in block `lambda` plus the same
/// compression elsewhere, so `M_{|x*|} = span{ξ}` exactly.
pub fn with_top_vector<R: Rng + ?Sized>(s: &BlockStructure, lambda: usize, xi: &CVec, rng: &mut R) -> Element {
    let n = s.dim(lambda);
    let zeta = random_block_vector(n, rng);
    let g = gaussian(s, rng);
    let g = g.scale_real(1.0 / g.norm());
    let left = CMat::identity(n, n) - xi * xi.adjoint();
    let right = CMat::identity(n, n) - &zeta * zeta.adjoint();
    g.map_blocks(|l, b| {
        if l == lambda {
            xi * zeta.adjoint() * C64::new(2.0, 0.0) + &left * b * &right
        } else {
            b.clone()
        }
    })
}

/// Projection onto `ξ` and `extra` further random directions of block
/// `lambda`, capped at the block size.
pub fn projection_containing<R: Rng + ?Sized>(
    s: &BlockStructure,
    lambda: usize,
    xi: &CVec,
    extra: usize,
    rng: &mut R,
) -> Element {
    let n = s.dim(lambda);
    let mut basis = vec![xi.clone()];
    while basis.len() < (extra + 1).min(n) {
        let mut v = random_block_vector(n, rng);
        for b in &basis {
            v -= b * b.dotc(&v);
        }
        v /= C64::new(v.norm(), 0.0);
        basis.push(v);
    }
    let mut p = CMat::zeros(n, n);
    for b in &basis {
        p += b * b.adjoint();
    }
    Element::zeros(s).map_blocks(|l, b| if l == lambda { p.clone() } else { b.clone() })
}

/// Zeroes every block except `lambda`.
pub fn restrict_to_block(a: &Element, lambda: usize) -> Element {
    a.map_blocks(|l, b| if l == lambda { b.clone() } else { CMat::zeros(b.nrows(), b.ncols()) })
}

/// Unit vector of a random block, embedded in the ambient space.
pub fn block_unit_vector<R: Rng + ?Sized>(s: &BlockStructure, rng: &mut R) -> (usize, CVec) {
    let lambda = rng.random_range(0..s.num_blocks());
    let v = random_block_vector(s.dim(lambda), rng);
    (lambda, s.embed(lambda, &v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::rng_from_seed;
    use crate::orthogonality::strong_bj;

    #[test]
    fn engineered_pairs_have_the_intended_verdict() {
        let tol = Tolerance::default();
        let s = BlockStructure::new(vec![1, 2, 3]).unwrap();
        let mut rng = rng_from_seed(17);
        for _ in 0..50 {
            let x = mixed(&s, &mut rng);
            let (x, y) = orthogonal_pair(x, &tol, &mut rng);
            assert!(strong_bj(&x, &y, &tol).unwrap().value);
            let x = gaussian(&s, &mut rng);
            let (x, y) = non_orthogonal_pair(x, &tol, &mut rng);
            assert!(!strong_bj(&x, &y, &tol).unwrap().value);
        }
    }

    #[test]
    fn projections_are_idempotent() {
        let s = BlockStructure::new(vec![2, 3]).unwrap();
        let mut rng = rng_from_seed(5);
        for _ in 0..10 {
            let p = projection(&s, &mut rng);
            assert!(p.mul(&p).unwrap().distance_max(&p).unwrap() < 1e-12);
            assert!(p.distance_max(&p.adjoint()).unwrap() < 1e-12);
        }
    }
}

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{BlockStructure, CMat, CVec, Element, C64};
use crate::error::{Error, Result};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian, `E|z|² = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_matrix<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> CMat {
    CMat::from_fn(n, m, |_, _| complex_gaussian(rng))
}

/// Unit vector of dimension `n`, uniformly distributed on the sphere.
pub fn random_block_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    loop {
        let v = CVec::from_fn(n, |_, _| complex_gaussian(rng));
        let norm = v.norm();
        if norm > 1e-8 {
            return v / C64::new(norm, 0.0);
        }
    }
}

/// Haar unitary of size `n`: QR of a Ginibre matrix with the phases of
/// `diag(R)` pushed into `Q`.
pub(crate) fn haar_block<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let qr = gaussian_matrix(n, n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_unitary_with<R: Rng + ?Sized>(structure: &BlockStructure, rng: &mut R) -> Element {
    let blocks = structure.dims().iter().map(|&n| haar_block(n, rng)).collect();
    Element::from_blocks_unchecked(structure, blocks)
}

/// Block-diagonal Haar unitary, deterministic in `seed`.
pub fn haar_unitary(structure: &BlockStructure, seed: u64) -> Element {
    haar_unitary_with(structure, &mut rng_from_seed(seed))
}

/// Complex Gaussian element, or a sum of `target_rank` random rank-one
/// terms each living in one block.
pub fn random_element_with<R: Rng + ?Sized>(
    structure: &BlockStructure,
    target_rank: Option<usize>,
    rng: &mut R,
) -> Result<Element> {
    let Some(rank) = target_rank else {
        let blocks = structure
            .dims()
            .iter()
            .map(|&n| gaussian_matrix(n, n, rng))
            .collect();
        return Ok(Element::from_blocks_unchecked(structure, blocks));
    };
    let ambient = structure.ambient_dim();
    if rank > ambient {
        return Err(Error::RankTooLarge {
            requested: rank,
            ambient,
        });
    }
    // one slot per ambient dimension, so no block receives more terms than it can hold
    let mut slots: Vec<usize> = (0..structure.num_blocks())
        .flat_map(|l| std::iter::repeat_n(l, structure.dim(l)))
        .collect();
    slots.shuffle(rng);
    let mut blocks: Vec<CMat> = structure.dims().iter().map(|&n| CMat::zeros(n, n)).collect();
    for &lambda in &slots[..rank] {
        let n = structure.dim(lambda);
        let weight = 0.5 + rng.random::<f64>();
        let xi = random_block_vector(n, rng);
        let zeta = random_block_vector(n, rng);
        blocks[lambda] += xi * zeta.adjoint() * C64::new(weight, 0.0);
    }
    Ok(Element::from_blocks_unchecked(structure, blocks))
}

pub fn random_element(
    structure: &BlockStructure,
    seed: u64,
    target_rank: Option<usize>,
) -> Result<Element> {
    random_element_with(structure, target_rank, &mut rng_from_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{decompose, Tolerance};

    fn unitarity_residual(u: &Element) -> f64 {
        let p = u.adjoint().mul(u).unwrap();
        p.sub(&Element::identity(u.structure())).unwrap().norm()
    }

    #[test]
    fn haar_scalar_is_unimodular() {
        let s = BlockStructure::new(vec![1]).unwrap();
        let u = haar_unitary(&s, 11);
        assert!((u.block(0)[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn haar_is_unitary_and_deterministic() {
        let s = BlockStructure::new(vec![1, 3, 4]).unwrap();
        for seed in 0..20 {
            let u = haar_unitary(&s, seed);
            assert!(unitarity_residual(&u) <= 1e-12);
            let again = haar_unitary(&s, seed);
            assert_eq!(u.bit_hash(), again.bit_hash());
        }
    }

    #[test]
    fn target_rank_is_respected() {
        let tol = Tolerance::default();
        let s = BlockStructure::new(vec![2, 2]).unwrap();
        for seed in 0..20 {
            let a = random_element(&s, seed, Some(1)).unwrap();
            assert_eq!(decompose(&a, &tol).rank, 1);
            let b = random_element(&s, seed, Some(4)).unwrap();
            assert_eq!(decompose(&b, &tol).rank, 4);
        }
        let f = BlockStructure::new(vec![3]).unwrap();
        assert_eq!(decompose(&random_element(&f, 5, None).unwrap(), &tol).rank, 3);
        assert_eq!(
            random_element(&s, 0, Some(5)),
            Err(Error::RankTooLarge {
                requested: 5,
                ambient: 4
            })
        );
    }
}

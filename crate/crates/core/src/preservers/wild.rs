//! The nonlinear family `A ↦ γ_A U_A P_A A V_A*`.
//!
//! `P_A` keeps the left singular vectors of `A`, lifts the top cluster to
//! the global `σ₁` and redraws every other nonzero singular value below
//! `(1 − δ)σ₁`. `U_A` mixes only inside the top left space, the rest of the
//! range, and the kernel of `A*`, so both `M_{|A*|}` and `ker A*` survive.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    decompose, frame_leq, haar_unitary_with, random::haar_block, rng_from_seed,
    CMat, Element, Fnv, Frame, Tolerance, C64,
};
use crate::error::{Error, Result};

/// Range of the redrawn singular values: `τ ∈ [δσ₁, (1 − δ)σ₁]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauPolicy {
    pub delta: f64,
}

impl Default for TauPolicy {
    fn default() -> Self {
        Self { delta: 0.05 }
    }
}

impl TauPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.delta > 0.0 && self.delta < 0.5 {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("tau delta {} outside (0, 0.5)", self.delta)))
        }
    }
}

fn same_frame(f: &Frame, g: &Frame, tol: &Tolerance) -> bool {
    matches!((frame_leq(f, g, tol), frame_leq(g, f, tol)), (Ok(true), Ok(true)))
}

/// Applies the wild map drawn from `seed` to `a`. The draw depends on the
/// exact bits of `a`, so equal inputs give equal outputs.
pub fn wild(a: &Element, seed: u64, policy: &TauPolicy, tol: &Tolerance) -> Result<Element> {
    policy.validate()?;
    let s = a.structure();
    let d = decompose(a, tol);
    if d.is_zero() {
        return Ok(a.clone());
    }
    let mut h = Fnv::new();
    h.write_u64(seed);
    h.write_u64(a.bit_hash());
    let mut rng = rng_from_seed(h.finish());

    let sigma1 = d.norm;
    let (lo, hi) = (policy.delta * sigma1, (1.0 - policy.delta) * sigma1);
    let gamma = C64::from_polar(rng.random_range(0.5..2.0), rng.random_range(0.0..std::f64::consts::TAU));
    let v_a = haar_unitary_with(s, &mut rng);

    let mut blocks = Vec::with_capacity(s.num_blocks());
    for (lambda, svd) in d.svds.iter().enumerate() {
        let n = s.dim(lambda);
        let k = d.top_counts[lambda];
        let r = d.block_ranks[lambda];
        // mix within the top space, the rest of the range, and the kernel
        let mut mix = CMat::zeros(n, n);
        for (start, len) in [(0, k), (k, r - k), (r, n - r)] {
            if len > 0 {
                mix.view_mut((start, start), (len, len)).copy_from(&haar_block(len, &mut rng));
            }
        }
        let mut tau = CMat::zeros(n, n);
        for i in 0..r {
            let t = if i < k { sigma1 } else { rng.random_range(lo..=hi) };
            tau[(i, i)] = C64::new(t, 0.0);
        }
        blocks.push(&svd.u * mix * tau * svd.v.adjoint() * v_a.block(lambda).adjoint() * gamma);
    }
    let out = Element::validate(s, blocks)?;

    let e = decompose(&out, tol);
    if !same_frame(&d.m_left, &e.m_left, tol) {
        return Err(Error::StructureViolation("top left space moved".into()));
    }
    if !same_frame(&d.ker_left, &e.ker_left, tol) {
        return Err(Error::StructureViolation("kernel of the adjoint moved".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{random_element, BlockStructure};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn zero_is_fixed() {
        let s = BlockStructure::new(vec![2, 1]).unwrap();
        let z = Element::zeros(&s);
        assert!(wild(&z, 1, &TauPolicy::default(), &tol()).unwrap().is_zero());
    }

    #[test]
    fn deterministic_per_element() {
        let s = BlockStructure::new(vec![3]).unwrap();
        let a = random_element(&s, 2, None).unwrap();
        let p = TauPolicy::default();
        let x = wild(&a, 7, &p, &tol()).unwrap();
        let y = wild(&a, 7, &p, &tol()).unwrap();
        assert_eq!(x.distance_max(&y).unwrap(), 0.0);
        let z = wild(&a, 8, &p, &tol()).unwrap();
        assert!(x.distance_max(&z).unwrap() > 1e-6);
    }

    #[test]
    fn rank_one_keeps_its_left_line() {
        let s = BlockStructure::new(vec![3]).unwrap();
        let a = random_element(&s, 5, Some(1)).unwrap();
        let out = wild(&a, 3, &TauPolicy::default(), &tol()).unwrap();
        let (da, db) = (decompose(&a, &tol()), decompose(&out, &tol()));
        assert_eq!(db.rank, 1);
        let overlap = (da.m_left.columns().adjoint() * db.m_left.columns())[(0, 0)].norm();
        assert!((overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn multi_block_keeps_norm_achieving_blocks() {
        let s = BlockStructure::new(vec![2, 3, 1]).unwrap();
        for seed in 0..20 {
            let a = random_element(&s, seed, Some(3)).unwrap();
            let out = wild(&a, seed, &TauPolicy::default(), &tol()).unwrap();
            let (da, db) = (decompose(&a, &tol()), decompose(&out, &tol()));
            assert_eq!(da.norm_achieving_blocks(), db.norm_achieving_blocks());
            assert_eq!(da.block_ranks, db.block_ranks);
        }
    }

    #[test]
    fn rejects_bad_delta() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let a = Element::identity(&s);
        assert!(wild(&a, 0, &TauPolicy { delta: 0.7 }, &tol()).is_err());
    }
}

mod common;

use common::{pair, rng, structure, tol};
use proptest::prelude::*;
use rand::Rng;
use sbjo_core::algebra::{decompose, random_block_vector, C64};
use sbjo_core::orthogonality::{
    decide, strong_bj, strong_bj_distance, strong_bj_norm_formula, strong_bj_rank_one, strong_bj_sampled,
};
use sbjo_core::{sampling, BlockStructure, Element};

proptest! {
    #![proptest_config(common::config(256))]

    #[test]
    fn deciders_agree_off_the_fragile_band(s in structure(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (x, y) = pair(&s, &mut r);
        let d = decide(&x, &y, &tol()).unwrap();
        if !d.fragile() {
            prop_assert!(d.agree(), "{d:?}");
            let f = strong_bj_norm_formula(&x, &y, &tol()).unwrap();
            prop_assert_eq!(f, d.value());
            if d.value() {
                prop_assert!(strong_bj_sampled(&x, &y, &tol(), 50, &mut r).unwrap());
            }
        }
    }

    #[test]
    fn abs_polar_equivalence(s in structure(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (x, y) = pair(&s, &mut r);
        let ax = decompose(&x, &tol()).abs_adjoint();
        let ay = decompose(&y, &tol()).abs_adjoint();
        let v = strong_bj(&x, &y, &tol()).unwrap().value;
        prop_assert_eq!(strong_bj(&ax, &y, &tol()).unwrap().value, v);
        prop_assert_eq!(strong_bj(&x, &ay, &tol()).unwrap().value, v);
        prop_assert_eq!(strong_bj(&ax, &ay, &tol()).unwrap().value, v);
    }

    #[test]
    fn homogeneity(s in structure(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (x, y) = pair(&s, &mut r);
        let mut scalar = || C64::from_polar(r.random_range(0.1..10.0), r.random_range(0.0..std::f64::consts::TAU));
        let (a, b) = (scalar(), scalar());
        prop_assert_eq!(
            strong_bj(&x.scale(a), &y.scale(b), &tol()).unwrap().value,
            strong_bj(&x, &y, &tol()).unwrap().value
        );
    }

    #[test]
    fn only_zero_is_self_orthogonal(s in structure(), seed in any::<u64>()) {
        let x = sampling::mixed(&s, &mut rng(seed));
        prop_assert!(!strong_bj(&x, &x, &tol()).unwrap().value);
        prop_assert!(!strong_bj_distance(&x, &x, &tol()).unwrap().value);
        let z = Element::zeros(&s);
        prop_assert!(strong_bj(&z, &z, &tol()).unwrap().value);
    }

    #[test]
    fn subalgebra_consistency(s in structure(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (x, y) = pair(&s, &mut r);
        let full = BlockStructure::full(s.ambient_dim()).unwrap();
        let xf = Element::from_dense(&full, &x.to_dense()).unwrap();
        let yf = Element::from_dense(&full, &y.to_dense()).unwrap();
        let d = decide(&x, &y, &tol()).unwrap();
        let df = decide(&xf, &yf, &tol()).unwrap();
        if !d.fragile() && !df.fragile() {
            prop_assert_eq!(d.distance.value, df.distance.value);
        }
    }

    #[test]
    fn rank_one_fast_path(s in structure(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let x = sampling::rank_one(&s, &mut r);
        let d = decompose(&x, &tol());
        let lambda = d.m_left.tags()[0].unwrap();
        let xi = s.restrict(lambda, &d.m_left.column(0));
        let n = s.dim(lambda);
        let y = match r.random_range(0..3) {
            // left vector orthogonal to ξ in the same block
            0 if n > 1 => {
                let w = random_block_vector(n, &mut r);
                let mut v = &w - &xi * xi.dotc(&w);
                v /= C64::new(v.norm(), 0.0);
                Element::rank_one(&s, lambda, &v, &random_block_vector(n, &mut r))
            }
            1 => Element::rank_one(&s, lambda, &xi, &random_block_vector(n, &mut r)),
            _ => sampling::rank_one(&s, &mut r),
        };
        prop_assert_eq!(
            strong_bj_rank_one(&x, &y, &tol()).unwrap(),
            strong_bj(&x, &y, &tol()).unwrap().value
        );
    }
}

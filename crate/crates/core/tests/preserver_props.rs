mod common;

use common::{nontrivial_structure, rng, structure, tol};
use proptest::prelude::*;
use rand::Rng;
use sbjo_core::algebra::{rng_from_seed, C64};
use sbjo_core::preservers::{
    adjoint_map, property_p_check, random_line_table, recover_sandwich, transpose_map, verify, LinearMap,
    PreserverSpec, TauPolicy, VerifyVerdict,
};
use sbjo_core::{sampling, BlockStructure, Element};

fn passes(spec: &PreserverSpec, s: &BlockStructure, seed: u64, budget: usize) -> Result<(), TestCaseError> {
    spec.validate(s).unwrap();
    let r = verify(spec, s, seed, budget, &tol());
    prop_assert!(r.forward_failures.is_empty(), "{:?}", r.forward_failures.first());
    prop_assert!(r.backward_failures.is_empty());
    prop_assert!(r.errors.is_empty(), "{:?}", r.errors);
    prop_assert_eq!(r.verdict, VerifyVerdict::Pass);
    Ok(())
}

proptest! {
    #![proptest_config(common::config(24))]

    #[test]
    fn standard_preservers_pass(s in structure(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let sandwich = PreserverSpec::random_sandwich(&s, &mut r);
        let perm = PreserverSpec::random_block_permutation(&s, &mut r);
        passes(&sandwich, &s, seed, 120)?;
        passes(&perm, &s, seed, 120)?;
        passes(&PreserverSpec::Conjugation, &s, seed, 120)?;
        let composite = PreserverSpec::Composite { parts: vec![perm, PreserverSpec::Conjugation, sandwich] };
        passes(&composite, &s, seed, 120)?;
    }

    #[test]
    fn wild_maps_have_property_p_and_pass(s in structure(), seed in any::<u64>()) {
        let spec = PreserverSpec::Wild { seed, tau_policy: TauPolicy::default() };
        let report = property_p_check(&spec, &s, seed, 60, &tol());
        prop_assert!(report.pass, "{:?}", report.errors);
        passes(&spec, &s, seed, 120)?;
    }

    #[test]
    fn dim2_tables_pass_on_m2(seed in any::<u64>(), lines in 1usize..=4) {
        let s = BlockStructure::new(vec![2]).unwrap();
        let phi = random_line_table(lines, &mut rng(seed));
        passes(&PreserverSpec::Dim2Induced { block: 0, phi }, &s, seed, 120)?;
    }

    #[test]
    fn bijections_of_the_scalars_fixing_zero_pass(seed in any::<u64>(), n in 2usize..=12) {
        let s = BlockStructure::new(vec![1]).unwrap();
        let mut r = rng(seed);
        let mut inputs = vec![Element::zeros(&s)];
        inputs.extend((0..n).map(|_| sampling::gaussian(&s, &mut r)));
        let mut outputs: Vec<Element> = inputs[1..].iter().map(|_| sampling::gaussian(&s, &mut r)).collect();
        outputs.insert(0, Element::zeros(&s));
        let pairs: Vec<(Element, Element)> = inputs.into_iter().zip(outputs).collect();
        passes(&PreserverSpec::Table { pairs }, &s, seed, 100)?;
    }

    #[test]
    fn transpose_and_adjoint_fail(s in nontrivial_structure(), seed in any::<u64>()) {
        for map in [transpose_map(), adjoint_map()] {
            let r = verify(&map, &s, seed, 200, &tol());
            prop_assert_eq!(r.verdict, VerifyVerdict::Fail);
            prop_assert!(r.forward_failures.iter().all(|c| c.revalidates(&tol())));
        }
    }

    #[test]
    fn recovery_inverts_planting(seed in any::<u64>()) {
        let s = BlockStructure::new(vec![1, 2, 2]).unwrap();
        let mut r = rng(seed);
        let alpha = C64::from_polar(r.random_range(0.5..3.0), r.random_range(0.0..std::f64::consts::TAU));
        let planted = PreserverSpec::Composite {
            parts: vec![
                PreserverSpec::random_block_permutation(&s, &mut r),
                match PreserverSpec::random_sandwich(&s, &mut r) {
                    PreserverSpec::Sandwich { u, v, .. } => PreserverSpec::Sandwich { u, v, alpha },
                    _ => unreachable!(),
                },
            ],
        };
        let map = LinearMap::from_map(&s, |a| planted.apply(a, &tol())).unwrap();
        let rec = recover_sandwich(&map, &tol(), seed).unwrap();
        prop_assert!(rec.residual <= 1e-8);
        prop_assert!((rec.alpha.norm() / alpha.norm() - 1.0).abs() <= 1e-9);
        let mut check = rng_from_seed(seed ^ 1);
        for _ in 0..5 {
            let a = sampling::gaussian(&s, &mut check);
            let d = rec.to_spec().apply(&a, &tol()).unwrap().distance_max(&planted.apply(&a, &tol()).unwrap()).unwrap();
            prop_assert!(d <= 1e-8);
        }
    }
}

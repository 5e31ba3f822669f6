mod common;

use common::{rng, structure, tol};
use proptest::prelude::*;
use sbjo_core::algebra::haar_unitary_with;
use sbjo_core::orthogonality::strong_bj;
use sbjo_core::orthograph::{engineered_sample, invariant_under, isolated_vertices, GraphMode, OrthoGraph};
use sbjo_core::preservers::PreserverSpec;
use sbjo_core::structure::{l_leq, r_leq};

proptest! {
    #![proptest_config(common::config(32))]

    #[test]
    fn mutual_edges_recheck_both_ways(s in structure(), seed in any::<u64>()) {
        let g = OrthoGraph::build(&engineered_sample(&s, 16, seed), GraphMode::Mutual, &tol()).unwrap();
        for &(a, b) in &g.edges {
            prop_assert!(a < b);
            let (x, y) = (&g.vertices[a].rep, &g.vertices[b].rep);
            prop_assert!(strong_bj(x, y, &tol()).unwrap().value && strong_bj(y, x, &tol()).unwrap().value);
        }
        for (i, v) in g.vertices.iter().enumerate() {
            for w in &g.vertices[i + 1..] {
                prop_assert!(v.rep.distance_max(&w.rep).unwrap() > 1e-9);
            }
        }
    }

    #[test]
    fn reduced_classes_are_sound(s in structure(), seed in any::<u64>()) {
        let g = OrthoGraph::build(&engineered_sample(&s, 16, seed), GraphMode::Reduced, &tol()).unwrap();
        let loops: Vec<_> = g.edges.iter().filter(|e| e.0 == e.1).collect();
        prop_assert!(loops.iter().all(|e| g.vertices[e.0].is_zero()));
        let nonzero: Vec<_> = g.vertices.iter().filter(|v| !v.is_zero()).collect();
        for (i, a) in nonzero.iter().enumerate() {
            for b in &nonzero[i + 1..] {
                let same = r_leq(&a.rep, &b.rep, &tol()).unwrap().holds
                    && r_leq(&b.rep, &a.rep, &tol()).unwrap().holds
                    && l_leq(&a.rep, &b.rep, &tol()).unwrap().holds
                    && l_leq(&b.rep, &a.rep, &tol()).unwrap().holds;
                prop_assert!(!same);
            }
        }
    }

    #[test]
    fn sandwiches_induce_isomorphisms(s in structure(), seed in any::<u64>()) {
        let xs = engineered_sample(&s, 12, seed);
        let spec = PreserverSpec::random_sandwich(&s, &mut rng(seed));
        for mode in [GraphMode::Mutual, GraphMode::Directed, GraphMode::Reduced] {
            let g = OrthoGraph::build(&xs, mode, &tol()).unwrap();
            prop_assert!(invariant_under(&g, &spec, &tol()).unwrap());
        }
    }

    #[test]
    fn unitaries_are_isolated(s in structure(), seed in any::<u64>()) {
        let mut r = rng(seed);
        let us: Vec<_> = (0..6).map(|_| haar_unitary_with(&s, &mut r)).collect();
        let g = OrthoGraph::build(&us, GraphMode::Mutual, &tol()).unwrap();
        prop_assert_eq!(isolated_vertices(&g).unwrap().len(), g.vertices.len());
    }
}

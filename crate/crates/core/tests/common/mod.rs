#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sbjo_core::algebra::{rng_from_seed, CVec};
use sbjo_core::sampling;
use sbjo_core::{BlockStructure, Element, Tolerance};

pub fn tol() -> Tolerance {
    Tolerance::default()
}

/// Up to three blocks of size at most three.
pub fn structure() -> impl Strategy<Value = BlockStructure> {
    prop::collection::vec(1usize..=3, 1..=3).prop_map(|d| BlockStructure::new(d).unwrap())
}

/// Structures with at least one block of size two or more.
pub fn nontrivial_structure() -> impl Strategy<Value = BlockStructure> {
    (structure(), 2usize..=3).prop_map(|(s, extra)| {
        let mut d = s.dims().to_vec();
        d.push(extra);
        BlockStructure::new(d).unwrap()
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed)
}

/// Pair with an even chance of being orthogonal by construction.
pub fn pair(s: &BlockStructure, rng: &mut ChaCha8Rng) -> (Element, Element) {
    let x = sampling::mixed(s, rng);
    match rng.random_range(0..3) {
        0 => sampling::orthogonal_pair(x, &tol(), rng),
        1 => sampling::non_orthogonal_pair(x, &tol(), rng),
        _ => (x, sampling::mixed(s, rng)),
    }
}

pub fn singular_element(s: &BlockStructure, rng: &mut ChaCha8Rng) -> Element {
    sampling::singular(s, rng)
}

pub fn with_top_vector(s: &BlockStructure, lambda: usize, xi: &CVec, rng: &mut ChaCha8Rng) -> Element {
    sampling::with_top_vector(s, lambda, xi, rng)
}

/// Fixed case count; failures are reported, not persisted.
pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

//! Sampling verifier for `x ⊥ˢ y ⇔ Φ(x) ⊥ˢ Φ(y)` and the property-𝒫 check.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::CandidateMap;
use crate::algebra::{decompose, frame_leq, haar_unitary_with, rng_from_seed, BlockStructure, Element, Tolerance};
use crate::orthogonality::{decide, strong_bj, Decision};
use crate::sampling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyVerdict {
    Pass,
    Fail,
    Fragile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MethodVerdicts {
    pub frames: bool,
    pub norm_formula: bool,
    pub distance: bool,
    pub fragile: bool,
}

impl From<&Decision> for MethodVerdicts {
    fn from(d: &Decision) -> Self {
        Self {
            frames: d.frames.value,
            norm_formula: d.formula.value,
            distance: d.distance.value,
            fragile: d.fragile(),
        }
    }
}

/// A pair whose orthogonality changes under the map.
#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub x: Element,
    pub y: Element,
    pub image_x: Element,
    pub image_y: Element,
    pub before: MethodVerdicts,
    pub after: MethodVerdicts,
}

impl Counterexample {
    /// Recomputes both verdicts from the stored elements.
    pub fn revalidates(&self, tol: &Tolerance) -> bool {
        match (strong_bj(&self.x, &self.y, tol), strong_bj(&self.image_x, &self.image_y, tol)) {
            (Ok(a), Ok(b)) => a.value == self.before.frames && b.value == self.after.frames && a.value != b.value,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Coverage {
    pub random: usize,
    pub rank_one: usize,
    pub projection: usize,
    pub planted_orthogonal: usize,
    pub planted_non_orthogonal: usize,
    pub restriction: usize,
    pub backward: usize,
    pub table: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub pairs_tested: usize,
    pub forward_failures: Vec<Counterexample>,
    pub backward_failures: Vec<Counterexample>,
    /// Disagreements where a verdict sits inside its fragile band.
    pub fragile_disagreements: usize,
    /// Pairs on which the three deciders did not agree.
    pub decider_disagreements: usize,
    /// Map evaluations that failed, or broke a block ideal.
    pub errors: Vec<String>,
    pub engineered_coverage: Coverage,
    pub verdict: VerifyVerdict,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Random,
    RankOne,
    Projection,
    PlantedOrthogonal,
    PlantedNonOrthogonal,
    Restriction(usize),
    Table,
}

enum Outcome {
    Agree { deciders_split: bool },
    Disagree { cex: Counterexample, fragile: bool },
    Error(String),
}

fn evaluate(map: &dyn CandidateMap, x: &Element, y: &Element, kind: Kind, tol: &Tolerance) -> Outcome {
    let images = map.apply(x, tol).and_then(|a| Ok((a, map.apply(y, tol)?)));
    let (fx, fy) = match images {
        Ok(p) => p,
        Err(e) => return Outcome::Error(e.to_string()),
    };
    if let Kind::Restriction(lambda) = kind {
        for (orig, image) in [(x, &fx), (y, &fy)] {
            let support = decompose(image, tol).support;
            if !orig.is_zero() && support.len() != 1 {
                return Outcome::Error(format!(
                    "element of block {lambda} mapped onto blocks {support:?}"
                ));
            }
        }
    }
    let (before, after) = match (decide(x, y, tol), decide(&fx, &fy, tol)) {
        (Ok(b), Ok(a)) => (b, a),
        (Err(e), _) | (_, Err(e)) => return Outcome::Error(e.to_string()),
    };
    let split = !before.agree() || !after.agree();
    if before.value() == after.value() {
        return Outcome::Agree { deciders_split: split };
    }
    let fragile = split || before.fragile() || after.fragile();
    Outcome::Disagree {
        cex: Counterexample {
            x: x.clone(),
            y: y.clone(),
            image_x: fx,
            image_y: fy,
            before: (&before).into(),
            after: (&after).into(),
        },
        fragile,
    }
}

fn draw(map: &dyn CandidateMap, s: &BlockStructure, rng: &mut ChaCha8Rng) -> Element {
    if rng.random_bool(0.5) {
        if let Some(a) = map.plant(s, rng) {
            return a;
        }
    }
    sampling::mixed(s, rng)
}

fn forward_pairs(
    map: &dyn CandidateMap,
    s: &BlockStructure,
    budget: usize,
    tol: &Tolerance,
    rng: &mut ChaCha8Rng,
) -> Vec<(Kind, Element, Element)> {
    let mut pairs = Vec::with_capacity(budget);
    if let Some(domain) = map.domain() {
        if domain.is_empty() {
            return pairs;
        }
        let n = domain.len();
        if n * n <= budget {
            for x in &domain {
                for y in &domain {
                    pairs.push((Kind::Table, x.clone(), y.clone()));
                }
            }
        } else {
            for _ in 0..budget {
                let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
                pairs.push((Kind::Table, domain[i].clone(), domain[j].clone()));
            }
        }
        return pairs;
    }
    let n_random = budget / 2;
    let n_engineered = budget / 4;
    let n_rank_one = budget / 8;
    let n_projection = budget - n_random - n_engineered - n_rank_one;
    for i in 0..n_random {
        let (x, y) = if i % 2 == 0 {
            (draw(map, s, rng), draw(map, s, rng))
        } else {
            // a shared eigenbasis makes orthogonal pairs common
            let basis = haar_unitary_with(s, rng);
            (sampling::from_basis(s, &basis, rng), sampling::from_basis(s, &basis, rng))
        };
        pairs.push((Kind::Random, x, y));
    }
    for i in 0..n_engineered {
        let x = draw(map, s, rng);
        if i % 2 == 0 {
            let (x, y) = sampling::orthogonal_pair(x, tol, rng);
            pairs.push((Kind::PlantedOrthogonal, x, y));
        } else {
            let (x, y) = sampling::non_orthogonal_pair(x, tol, rng);
            pairs.push((Kind::PlantedNonOrthogonal, x, y));
        }
    }
    for i in 0..n_rank_one {
        let (x, y) = if i % 2 == 0 {
            (sampling::rank_one(s, rng), sampling::rank_one(s, rng))
        } else {
            (sampling::matrix_unit(s, rng), sampling::matrix_unit(s, rng))
        };
        pairs.push((Kind::RankOne, x, y));
    }
    for _ in 0..n_projection {
        let pick = |rng: &mut ChaCha8Rng| {
            if rng.random_bool(0.5) {
                sampling::projection(s, rng)
            } else {
                sampling::coisometry(s, rng)
            }
        };
        let x = pick(rng);
        let y = pick(rng);
        pairs.push((Kind::Projection, x, y));
    }
    if map.block_respecting() && s.num_blocks() > 1 {
        let per_block = (budget / (8 * s.num_blocks())).max(1);
        for lambda in 0..s.num_blocks() {
            for _ in 0..per_block {
                let x = sampling::restrict_to_block(&draw(map, s, rng), lambda);
                let (x, y) = if rng.random_bool(0.5) {
                    sampling::orthogonal_pair(x, tol, rng)
                } else {
                    let y = sampling::mixed(s, rng);
                    (x, y)
                };
                let y = sampling::restrict_to_block(&y, lambda);
                pairs.push((Kind::Restriction(lambda), x, y));
            }
        }
    }
    pairs
}

/// Samples `budget` pairs (plus backward and block-restriction pairs when
/// they apply) and compares orthogonality before and after the map.
///
/// Partial maps are only tested on pairs from their domain.
pub fn verify(
    map: &dyn CandidateMap,
    s: &BlockStructure,
    seed: u64,
    budget: usize,
    tol: &Tolerance,
) -> VerifyReport {
    let mut rng = rng_from_seed(seed);
    let forward = forward_pairs(map, s, budget.max(1), tol, &mut rng);
    let inverse = map.inverse();
    let backward: Vec<(Element, Element)> = match (&inverse, map.domain()) {
        (None, _) => Vec::new(),
        (Some(inv), _) => match inv.domain() {
            Some(domain) => {
                let n = domain.len();
                (0..(budget / 4).min(n * n))
                    .map(|_| (domain[rng.random_range(0..n)].clone(), domain[rng.random_range(0..n)].clone()))
                    .collect()
            }
            None => (0..budget / 4)
                .map(|_| {
                    let x = sampling::mixed(s, &mut rng);
                    if rng.random_bool(0.5) {
                        sampling::orthogonal_pair(x, tol, &mut rng)
                    } else {
                        let y = sampling::mixed(s, &mut rng);
                        (x, y)
                    }
                })
                .collect(),
        },
    };

    let forward_out: Vec<Outcome> = forward
        .par_iter()
        .map(|(kind, x, y)| evaluate(map, x, y, *kind, tol))
        .collect();
    let backward_out: Vec<Outcome> = match &inverse {
        Some(inv) => backward
            .par_iter()
            .map(|(x, y)| evaluate(inv.as_ref(), x, y, Kind::Random, tol))
            .collect(),
        None => Vec::new(),
    };

    let mut coverage = Coverage::default();
    for (kind, _, _) in &forward {
        match kind {
            Kind::Random => coverage.random += 1,
            Kind::RankOne => coverage.rank_one += 1,
            Kind::Projection => coverage.projection += 1,
            Kind::PlantedOrthogonal => coverage.planted_orthogonal += 1,
            Kind::PlantedNonOrthogonal => coverage.planted_non_orthogonal += 1,
            Kind::Restriction(_) => coverage.restriction += 1,
            Kind::Table => coverage.table += 1,
        }
    }
    coverage.backward = backward_out.len();

    let mut report = VerifyReport {
        pairs_tested: forward_out.len() + backward_out.len(),
        forward_failures: Vec::new(),
        backward_failures: Vec::new(),
        fragile_disagreements: 0,
        decider_disagreements: 0,
        errors: Vec::new(),
        engineered_coverage: coverage,
        verdict: VerifyVerdict::Pass,
    };
    let mut firm = false;
    for (outcomes, backward) in [(forward_out, false), (backward_out, true)] {
        for outcome in outcomes {
            match outcome {
                Outcome::Agree { deciders_split } => {
                    report.decider_disagreements += deciders_split as usize;
                }
                Outcome::Disagree { cex, fragile } => {
                    if fragile {
                        report.fragile_disagreements += 1;
                        continue;
                    }
                    firm = true;
                    if backward {
                        report.backward_failures.push(cex);
                    } else {
                        report.forward_failures.push(cex);
                    }
                }
                Outcome::Error(e) => {
                    firm = true;
                    report.errors.push(e);
                }
            }
        }
    }
    report.verdict = if firm {
        VerifyVerdict::Fail
    } else if report.fragile_disagreements > 0 {
        VerifyVerdict::Fragile
    } else {
        VerifyVerdict::Pass
    };
    report
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyPReport {
    pub samples: usize,
    /// Inputs whose image moved `M_{|A*|}` or `ker A*`.
    pub violations: Vec<Element>,
    pub errors: Vec<String>,
    pub pass: bool,
}

/// `M_{|Ψ(A)*|} = M_{|A*|}` and `ker Ψ(A)* = ker A*` for one input.
pub fn property_p_holds(map: &dyn CandidateMap, a: &Element, tol: &Tolerance) -> crate::Result<bool> {
    let image = map.apply(a, tol)?;
    let (da, db) = (decompose(a, tol), decompose(&image, tol));
    let same = |f, g| matches!((frame_leq(f, g, tol), frame_leq(g, f, tol)), (Ok(true), Ok(true)));
    Ok(same(&da.m_left, &db.m_left) && same(&da.ker_left, &db.ker_left))
}

/// Checks property 𝒫 on samples,
/// starting with the zero element.
pub fn property_p_check(
    map: &dyn CandidateMap,
    s: &BlockStructure,
    seed: u64,
    samples: usize,
    tol: &Tolerance,
) -> PropertyPReport {
    let mut rng = rng_from_seed(seed);
    let mut inputs = vec![Element::zeros(s)];
    while inputs.len() < samples.max(1) {
        let a = match inputs.len() % 4 {
            0 => sampling::rank_one(s, &mut rng),
            1 => sampling::projection(s, &mut rng),
            _ => draw(map, s, &mut rng),
        };
        inputs.push(a);
    }
    let results: Vec<Result<bool, String>> = inputs
        .par_iter()
        .map(|a| property_p_holds(map, a, tol).map_err(|e| e.to_string()))
        .collect();
    let mut violations = Vec::new();
    let mut errors = Vec::new();
    for (a, r) in inputs.iter().zip(results) {
        match r {
            Ok(true) => {}
            Ok(false) => violations.push(a.clone()),
            Err(e) => errors.push(e),
        }
    }
    PropertyPReport {
        samples: inputs.len(),
        pass: violations.is_empty() && errors.is_empty(),
        violations,
        errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preservers::{adjoint_map, transpose_map, FnMap, PreserverSpec};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn identity_passes() {
        let s = BlockStructure::new(vec![1, 2]).unwrap();
        let r = verify(&PreserverSpec::identity(&s), &s, 1, 200, &tol());
        assert_eq!(r.verdict, VerifyVerdict::Pass, "{:?}", r.errors);
        assert!(r.engineered_coverage.restriction > 0);
        assert!(r.engineered_coverage.backward > 0);
    }

    #[test]
    fn transpose_fails_with_revalidating_counterexamples() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let r = verify(&transpose_map(), &s, 1, 200, &tol());
        assert_eq!(r.verdict, VerifyVerdict::Fail);
        assert!(!r.forward_failures.is_empty());
        assert!(r.forward_failures.iter().all(|c| c.revalidates(&tol())));
    }

    #[test]
    fn property_p_examples() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let id = FnMap::new(|a: &Element| a.clone());
        assert!(property_p_check(&id, &s, 0, 50, &tol()).pass);
        let double = FnMap::new(|a: &Element| a.scale_real(2.0));
        assert!(property_p_check(&double, &s, 0, 50, &tol()).pass);
        let e12 = Element::matrix_unit(&s, 0, 0, 1);
        assert!(!property_p_holds(&adjoint_map(), &e12, &tol()).unwrap());
        let r = property_p_check(&adjoint_map(), &s, 0, 50, &tol());
        assert!(!r.pass);
    }
}

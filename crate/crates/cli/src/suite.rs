//! The acceptance suite: twelve criteria at pinned sizes and tolerances.
//!
//! Every criterion draws its inputs from its own seeded stream, indexed per
//! sample, so results do not depend on scheduling or on which groups run.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use sbjo_core::algebra::{decompose, haar_unitary_with, linalg, random_element_with, rng_from_seed, C64};
use sbjo_core::orthogonality::{decide, strong_bj, strong_bj_sampled, witness_holds, Witness};
use sbjo_core::orthograph::{engineered_sample, invariant_under, isolated_vertices, BuildOptions, GraphMode, OrthoGraph};
use sbjo_core::preservers::{
    adjoint_map, extract_block_permutation, property_p_check, recover_sandwich, transpose_map, verify, CandidateMap,
    LinearMap, PreserverSpec, TauPolicy, VerifyVerdict,
};
use sbjo_core::structure::{
    is_right_symmetric, l_leq, mutual_edge_witness, planted_positive, r_chain, r_leq, rank_via_chain,
};
use sbjo_core::{sampling, BlockStructure, Element, Error, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Oracle,
    Symmetry,
    Inclusion,
    Rank,
    Preserver,
    Graph,
}

impl Group {
    pub const ALL: [Group; 6] = [
        Group::Oracle,
        Group::Symmetry,
        Group::Inclusion,
        Group::Rank,
        Group::Preserver,
        Group::Graph,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::Oracle => "oracle",
            Group::Symmetry => "symmetry",
            Group::Inclusion => "inclusion",
            Group::Rank => "rank",
            Group::Preserver => "preserver",
            Group::Graph => "graph",
        }
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Group::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown criteria group {s:?} (expected one of oracle, symmetry, inclusion, rank, preserver, graph)"))
    }
}

#[derive(Clone, Debug, Default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub tol: Tolerance,
    /// `None` runs every group.
    pub groups: Option<Vec<Group>>,
}


#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub group: Group,
    pub pass: bool,
    pub counts: BTreeMap<&'static str, Value>,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    /// One summary line: id, name, verdict and counts.
    pub fn line(&self) -> String {
        let counts: Vec<String> = self.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let mut s = format!(
            "criterion {:>2} {:<28} {} [{}]",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            counts.join(" ")
        );
        if !self.detail.is_empty() {
            s.push_str(" -- ");
            s.push_str(&self.detail);
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub tolerance: Tolerance,
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
    pub seconds: f64,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.criteria {
            writeln!(f, "{}", c.line())?;
        }
        write!(f, "suite {}", if self.pass { "PASS" } else { "FAIL" })
    }
}

struct Spec {
    id: u8,
    name: &'static str,
    group: Group,
    run: fn(&Ctx) -> Outcome,
}

const CRITERIA: [Spec; 12] = [
    Spec { id: 1, name: "cross-oracle agreement", group: Group::Oracle, run: c1_cross_oracle },
    Spec { id: 2, name: "abs-polar equivalence", group: Group::Oracle, run: c2_abs_polar },
    Spec { id: 3, name: "refutation certificates", group: Group::Oracle, run: c3_refutations },
    Spec { id: 4, name: "right symmetry", group: Group::Symmetry, run: c4_right_symmetry },
    Spec { id: 5, name: "coisometry law", group: Group::Symmetry, run: c5_coisometry },
    Spec { id: 6, name: "R/L inclusion", group: Group::Inclusion, run: c6_inclusion },
    Spec { id: 7, name: "rank chains", group: Group::Rank, run: c7_rank_chains },
    Spec { id: 8, name: "R-chain family", group: Group::Rank, run: c8_r_chains },
    Spec { id: 9, name: "preservers positive", group: Group::Preserver, run: c9_positive },
    Spec { id: 10, name: "preservers negative", group: Group::Preserver, run: c10_negative },
    Spec { id: 11, name: "sandwich recovery", group: Group::Preserver, run: c11_recovery },
    Spec { id: 12, name: "ortho-graph", group: Group::Graph, run: c12_graph },
];

/// Desk-scale structures cycled through by the sampling criteria.
const STRUCTURES: [&[usize]; 9] = [
    &[1],
    &[2],
    &[3],
    &[1, 2],
    &[2, 2],
    &[1, 2, 3],
    &[2, 2, 2],
    &[4],
    &[1, 1, 2, 4],
];

struct Ctx {
    seed: u64,
    id: u8,
    tol: Tolerance,
}

impl Ctx {
    fn rng(&self, index: u64) -> ChaCha8Rng {
        let stream = splitmix(splitmix(self.seed) ^ ((self.id as u64) << 48) ^ index);
        rng_from_seed(stream)
    }

    fn structure(&self, index: usize) -> BlockStructure {
        BlockStructure::new(STRUCTURES[index % STRUCTURES.len()].to_vec()).expect("valid structure")
    }

    fn sub_seed(&self, index: u64) -> u64 {
        splitmix(self.seed ^ ((self.id as u64) << 40) ^ index.wrapping_mul(0x9e37_79b9))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Default)]
struct Outcome {
    pass: bool,
    counts: BTreeMap<&'static str, Value>,
    detail: String,
}

impl Outcome {
    fn count(mut self, key: &'static str, v: impl Into<Value>) -> Self {
        self.counts.insert(key, v.into());
        self
    }

    fn fail_if(mut self, bad: bool, why: impl Into<String>) -> Self {
        if bad {
            self.pass = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(&why.into());
        }
        self
    }

    fn start() -> Self {
        Self {
            pass: true,
            ..Self::default()
        }
    }
}

pub fn run(config: &SuiteConfig) -> SuiteReport {
    let start = Instant::now();
    let selected = |g: Group| config.groups.as_ref().is_none_or(|gs| gs.contains(&g));
    let invalid = config.tol.validate().err();
    let criteria: Vec<CriterionResult> = CRITERIA
        .iter()
        .filter(|c| selected(c.group))
        .map(|c| {
            let t = Instant::now();
            let outcome = match &invalid {
                Some(e) => Outcome::default().fail_if(true, format!("not run: {e}")),
                None => (c.run)(&Ctx {
                    seed: config.seed,
                    id: c.id,
                    tol: config.tol,
                }),
            };
            CriterionResult {
                id: c.id,
                name: c.name,
                group: c.group,
                pass: outcome.pass,
                counts: outcome.counts,
                detail: outcome.detail,
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect();
    SuiteReport {
        seed: config.seed,
        tolerance: config.tol,
        pass: criteria.iter().all(|c| c.pass),
        criteria,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn orth(x: &Element, y: &Element, tol: &Tolerance) -> bool {
    strong_bj(x, y, tol).expect("same structure").value
}

/// Mixed pair kinds: independent, rank-constrained, planted orthogonal,
/// planted non-orthogonal, and shared-basis pairs.
fn sample_pair(s: &BlockStructure, kind: usize, tol: &Tolerance, rng: &mut ChaCha8Rng) -> (Element, Element) {
    match kind % 6 {
        0 => (sampling::mixed(s, rng), sampling::mixed(s, rng)),
        1 => (sampling::low_rank(s, rng), sampling::low_rank(s, rng)),
        2 => {
            let x = sampling::mixed(s, rng);
            sampling::orthogonal_pair(x, tol, rng)
        }
        3 => {
            let x = sampling::low_rank(s, rng);
            sampling::orthogonal_pair(x, tol, rng)
        }
        4 => {
            let x = sampling::gaussian(s, rng);
            sampling::non_orthogonal_pair(x, tol, rng)
        }
        _ => {
            let basis = haar_unitary_with(s, rng);
            (sampling::from_basis(s, &basis, rng), sampling::from_basis(s, &basis, rng))
        }
    }
}

fn c1_cross_oracle(ctx: &Ctx) -> Outcome {
    const PAIRS: usize = 10_000;
    struct R {
        fragile: bool,
        disagree: bool,
        orthogonal: bool,
        sampled_refutes: bool,
        bad_witness: bool,
    }
    let results: Vec<R> = (0..PAIRS)
        .into_par_iter()
        .map(|i| {
            let mut rng = ctx.rng(i as u64);
            let s = ctx.structure(i);
            let (x, y) = sample_pair(&s, i, &ctx.tol, &mut rng);
            let d = decide(&x, &y, &ctx.tol).expect("same structure");
            let fragile = d.fragile();
            let agreed_orthogonal = !fragile && d.agree() && d.value();
            let sampled_refutes = agreed_orthogonal
                && !strong_bj_sampled(&x, &y, &ctx.tol, 200, &mut rng).expect("same structure");
            let bad_witness = match &d.frames.witness {
                Some(w @ Witness::Vector { .. }) => d.frames.value && !witness_holds(&x, &y, w, &ctx.tol),
                _ => false,
            };
            R {
                fragile,
                disagree: !fragile && !d.agree(),
                orthogonal: agreed_orthogonal,
                sampled_refutes,
                bad_witness,
            }
        })
        .collect();
    let n = |f: fn(&R) -> bool| results.iter().filter(|r| f(r)).count();
    let fragile = n(|r| r.fragile);
    let disagree = n(|r| r.disagree);
    let refuted = n(|r| r.sampled_refutes);
    let bad_witness = n(|r| r.bad_witness);
    let fraction = fragile as f64 / PAIRS as f64;
    Outcome::start()
        .count("pairs", PAIRS)
        .count("orthogonal", n(|r| r.orthogonal))
        .count("fragile", fragile)
        .count("disagreements", disagree)
        .count("sampled_refutations", refuted)
        .count("witness_failures", bad_witness)
        .fail_if(disagree > 0, format!("{disagree} non-fragile disagreements"))
        .fail_if(fraction >= 0.01, format!("fragile fraction {fraction:.4}"))
        .fail_if(refuted > 0, format!("{refuted} agreed-orthogonal pairs refuted by sampling"))
        .fail_if(bad_witness > 0, format!("{bad_witness} witnesses failed to validate"))
}

fn c2_abs_polar(ctx: &Ctx) -> Outcome {
    const PAIRS: usize = 1_000;
    let violations = (0..PAIRS)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = ctx.rng(i as u64);
            let s = ctx.structure(i);
            let (x, y) = sample_pair(&s, i, &ctx.tol, &mut rng);
            let ax = decompose(&x, &ctx.tol).abs_adjoint();
            let ay = decompose(&y, &ctx.tol).abs_adjoint();
            let v = orth(&x, &y, &ctx.tol);
            // bound first: the array borrows locals of this closure
            #[allow(clippy::let_and_return)]
            let broken = [(&ax, &y), (&x, &ay), (&ax, &ay)]
                .into_iter()
                .any(|(a, b)| orth(a, b, &ctx.tol) != v);
            broken
        })
        .count();
    Outcome::start()
        .count("pairs", PAIRS)
        .count("violations", violations)
        .fail_if(violations > 0, format!("{violations} pairs broke the four-way equivalence"))
}

fn c3_refutations(ctx: &Ctx) -> Outcome {
    const PAIRS: usize = 10_000;
    // (refutations checked, failures, missing certificates)
    let results: Vec<(usize, usize, usize)> = (0..PAIRS)
        .into_par_iter()
        .map(|i| {
            let mut rng = ctx.rng(i as u64);
            let s = ctx.structure(i);
            let (x, y) = sample_pair(&s, i, &ctx.tol, &mut rng);
            let d = decide(&x, &y, &ctx.tol).expect("same structure");
            if d.fragile() || !d.agree() || d.value() {
                return (0, 0, 0);
            }
            match &d.distance.witness {
                Some(w @ Witness::Violation(_)) => (1, usize::from(!witness_holds(&x, &y, w, &ctx.tol)), 0),
                _ => (1, 0, 1),
            }
        })
        .collect();
    let checked: usize = results.iter().map(|r| r.0).sum();
    let failures: usize = results.iter().map(|r| r.1).sum();
    let missing: usize = results.iter().map(|r| r.2).sum();
    Outcome::start()
        .count("pairs", PAIRS)
        .count("refutations", checked)
        .count("failures", failures)
        .count("missing", missing)
        .fail_if(failures > 0, format!("{failures} certificates did not lower the norm by 1e-7"))
        .fail_if(missing > 0, format!("{missing} refutations without a certificate"))
        .fail_if(checked == 0, "no refutations sampled")
}

/// Blockwise invertibility of `xx*` by singular values, independent of the
/// frame machinery.
fn xx_star_invertible(x: &Element) -> bool {
    let blocks: Vec<Vec<f64>> = x
        .blocks()
        .iter()
        .map(|b| linalg::singular_values(&(b * b.adjoint())))
        .collect();
    let top = blocks.iter().filter_map(|s| s.first().copied()).fold(0.0, f64::max);
    top > 0.0 && blocks.iter().all(|s| s.last().is_some_and(|&m| m > 1e-12 * top))
}

fn c4_right_symmetry(ctx: &Ctx) -> Outcome {
    const ELEMENTS: usize = 500;
    // (right symmetric, triangle broken, witness failed)
    let results: Vec<(bool, bool, bool)> = (0..ELEMENTS)
        .into_par_iter()
        .map(|i| {
            let mut rng = ctx.rng(i as u64);
            let s = ctx.structure(i);
            // a 1x1 algebra has no nonzero singular elements
            let kind = if s.ambient_dim() == 1 { 2 } else { i % 3 };
            let x = loop {
                let x = match kind {
                    0 => sampling::singular(&s, &mut rng),
                    1 => sampling::low_rank(&s, &mut rng),
                    _ => sampling::mixed(&s, &mut rng),
                };
                if !x.is_zero() {
                    break x;
                }
            };
            let rs = is_right_symmetric(&x, &ctx.tol);
            let inv = xx_star_invertible(&x);
            match mutual_edge_witness(&x, &ctx.tol) {
                Ok(w) => {
                    let witness_bad = w
                        .as_ref()
                        .is_some_and(|w| !(orth(&x, w, &ctx.tol) && orth(w, &x, &ctx.tol)));
                    (rs, rs != inv || rs != w.is_none(), witness_bad)
                }
                Err(_) => (rs, true, true),
            }
        })
        .collect();
    let symmetric = results.iter().filter(|r| r.0).count();
    let broken = results.iter().filter(|r| r.1).count();
    let bad = results.iter().filter(|r| r.2).count();
    Outcome::start()
        .count("elements", ELEMENTS)
        .count("right_symmetric", symmetric)
        .count("triangle_failures", broken)
        .count("witness_failures", bad)
        .fail_if(broken > 0, format!("{broken} elements broke the equivalences"))
        .fail_if(bad > 0, format!("{bad} witnesses failed to validate"))
        .fail_if(symmetric == 0 || symmetric == ELEMENTS, "sample lacks one of the two classes")
}

fn c5_coisometry(ctx: &Ctx) -> Outcome {
    const COISOMETRIES: usize = 50;
    const PARTNERS: usize = 50;
    let holds: usize = (0..COISOMETRIES)
        .into_par_iter()
        .map(|i| {
            let mut rng = ctx.rng(i as u64);
            // skip the scalar algebra, where every nonzero element is right symmetric
            let s = ctx.structure(1 + i % (STRUCTURES.len() - 1));
            let u = sampling::coisometry(&s, &mut rng);
            (0..PARTNERS)
                .filter(|&j| {
                    let y = loop {
                        let y = if j % 2 == 0 {
                            sampling::singular(&s, &mut rng)
                        } else {
                            sampling::low_rank(&s, &mut rng)
                        };
                        if !y.is_zero() && !is_right_symmetric(&y, &ctx.tol) {
                            break y;
                        }
                    };
                    orth(&u, &y, &ctx.tol)
                })
                .count()
        })
        .sum();
    let total = COISOMETRIES * PARTNERS;
    Outcome::start()
        .count("cases", total)
        .count("orthogonal", holds)
        .fail_if(holds != total, format!("{holds}/{total}"))
}

fn c6_inclusion(ctx: &Ctx) -> Outcome {
    const PAIRS: usize = 500;
    const Z_SAMPLES: usize = 100;
    #[derive(Default)]
    struct R {
        holds_checked: usize,
        monotonicity: usize,
        fails_checked: usize,
        witness_bad: usize,
        unavailable: usize,
        constructed_missed: usize,
    }
    let results: Vec<R> = (0..PAIRS)
        .into_par_iter()
        .map(|i| {
            let tol = &ctx.tol;
            let mut rng = ctx.rng(i as u64);
            let s = ctx.structure(i);
            let mut r = R::default();
            let (lambda, xi) = sampling::block_unit_vector(&s, &mut rng);
            let local = s.restrict(lambda, &xi);
            let id = Element::identity(&s);
            let (a, b, left) = match i % 4 {
                // M_{|A*|} = span ξ ⊆ R(P) = M_{|B*|}
                0 => {
                    let extra = rng.random_range(0..s.dim(lambda));
                    let a = sampling::with_top_vector(&s, lambda, &local, &mut rng);
                    (a, sampling::projection_containing(&s, lambda, &local, extra, &mut rng), false)
                }
                // ker A* = span ξ ⊆ ker B*; P stays below the full block
                1 => {
                    let extra = rng.random_range(0..s.dim(lambda).max(2) - 1);
                    let a = id.sub(&Element::projection_onto(&s, &xi).expect("unit vector")).expect("same structure");
                    let p = sampling::projection_containing(&s, lambda, &local, extra, &mut rng);
                    (a, id.sub(&p).expect("same structure"), true)
                }
                2 => (sampling::mixed(&s, &mut rng), sampling::mixed(&s, &mut rng), false),
                _ => (sampling::singular(&s, &mut rng), sampling::mixed(&s, &mut rng), true),
            };
            if a.norm() < 0.5 || b.norm() < 0.5 {
                // structures without room for a proper kernel
                return r;
            }
            let report = if left { l_leq(&a, &b, tol) } else { r_leq(&a, &b, tol) };
            match report {
                Ok(rep) if rep.holds => {
                    r.holds_checked = 1;
                    for k in 0..Z_SAMPLES {
                        let z = match (left, k % 2) {
                            (false, 0) => sampling::orthogonal_pair(a.clone(), tol, &mut rng).1,
                            (true, 0) => sampling::with_top_vector(&s, lambda, &local, &mut rng),
                            _ => sampling::mixed(&s, &mut rng),
                        };
                        let broken = if left {
                            orth(&z, &a, tol) && !orth(&z, &b, tol)
                        } else {
                            orth(&a, &z, tol) && !orth(&b, &z, tol)
                        };
                        r.monotonicity += usize::from(broken);
                    }
                }
                Ok(rep) => {
                    r.fails_checked = 1;
                    r.constructed_missed = usize::from(i % 4 < 2);
                    let ok = rep.witness.as_ref().is_some_and(|c| {
                        if left {
                            orth(c, &a, tol) && !orth(c, &b, tol)
                        } else {
                            orth(&a, c, tol) && !orth(&b, c, tol)
                        }
                    });
                    r.witness_bad = usize::from(!ok);
                }
                Err(Error::WitnessUnavailable(_)) => {
                    r.fails_checked = 1;
                    r.unavailable = 1;
                }
                Err(_) => r.witness_bad = 1,
            }
            r
        })
        .collect();
    let sum = |f: fn(&R) -> usize| results.iter().map(f).sum::<usize>();
    let (holds, mono, fails, bad, unavailable, missed) = (
        sum(|r| r.holds_checked),
        sum(|r| r.monotonicity),
        sum(|r| r.fails_checked),
        sum(|r| r.witness_bad),
        sum(|r| r.unavailable),
        sum(|r| r.constructed_missed),
    );
    Outcome::start()
        .count("pairs", PAIRS)
        .count("holds", holds)
        .count("monotonicity_violations", mono)
        .count("fails", fails)
        .count("witness_failures", bad)
        .count("witness_unavailable", unavailable)
        .count("constructed_inclusions_missed", missed)
        .fail_if(mono > 0, format!("{mono} sampled z broke monotonicity"))
        .fail_if(bad > 0, format!("{bad} witnesses failed"))
        .fail_if(unavailable > 0, format!("{unavailable} witnesses unavailable"))
        .fail_if(missed > 0, format!("{missed} planted inclusions not detected"))
        .fail_if(holds == 0 || fails == 0, "sample lacks one of the two directions")
}

/// Structures with room for rank six.
const RANK_STRUCTURES: [&[usize]; 5] = [&[6], &[2, 4], &[3, 3], &[1, 2, 3], &[1, 1, 2, 2]];

fn c7_rank_chains(ctx: &Ctx) -> Outcome {
    const ELEMENTS: usize = 500;
    let failures: Vec<String> = (0..ELEMENTS)
        .into_par_iter()
        .filter_map(|i| {
            let tol = &ctx.tol;
            let mut rng = ctx.rng(i as u64);
            let s = BlockStructure::new(RANK_STRUCTURES[i % RANK_STRUCTURES.len()].to_vec()).expect("valid");
            let planted = 1 + (i / RANK_STRUCTURES.len()) % 6;
            let x = random_element_with(&s, Some(planted), &mut rng).expect("rank fits");
            let svd_rank = decompose(&x, tol).rank;
            let (rank, chain) = match rank_via_chain(&x, tol) {
                Ok(r) => r,
                Err(e) => return Some(format!("element {i}: {e}")),
            };
            if rank != svd_rank || rank != planted || chain.len() != rank {
                return Some(format!("element {i}: chain {rank}, svd {svd_rank}, planted {planted}"));
            }
            for k in 0..chain.len().saturating_sub(1) {
                let up = l_leq(&chain[k], &chain[k + 1], tol).map(|r| r.holds);
                let down = l_leq(&chain[k + 1], &chain[k], tol).map(|r| r.holds);
                if up != Ok(true) || down != Ok(false) {
                    return Some(format!("element {i}: link {k} not strict"));
                }
            }
            None
        })
        .collect();
    Outcome::start()
        .count("elements", ELEMENTS)
        .count("failures", failures.len())
        .fail_if(!failures.is_empty(), failures.first().cloned().unwrap_or_default())
}

fn c8_r_chains(ctx: &Ctx) -> Outcome {
    const PLANTED: usize = 100;
    let failures: Vec<String> = (0..PLANTED)
        .into_par_iter()
        .filter_map(|i| {
            let tol = &ctx.tol;
            let mut rng = ctx.rng(i as u64);
            let s = ctx.structure(i);
            let top = rng.random_range(1..=s.ambient_dim().min(4));
            let x = planted_positive(&s, top, &mut rng).expect("top fits");
            let n = rng.random_range(1..=top);
            let chain = match r_chain(&x, n, tol) {
                Ok(c) => c,
                Err(e) => return Some(format!("case {i}: {e}")),
            };
            if chain.len() != n || chain.bound != top || chain.len() > decompose(&x, tol).m_left.dim() {
                return Some(format!("case {i}: length {} bound {} top {top}", chain.len(), chain.bound));
            }
            for (k, y) in chain.links.iter().enumerate() {
                if r_leq(y, &x, tol).map(|r| r.holds) != Ok(true) {
                    return Some(format!("case {i}: link {k} escapes R_x"));
                }
                if let Some(next) = chain.links.get(k + 1) {
                    let up = r_leq(y, next, tol).map(|r| r.holds);
                    let down = r_leq(next, y, tol).map(|r| r.holds);
                    if up != Ok(true) || down != Ok(false) {
                        return Some(format!("case {i}: link {k} not strict"));
                    }
                }
            }
            if !matches!(r_chain(&x, top + 1, tol), Err(Error::EigenspaceTooSmall { .. })) {
                return Some(format!("case {i}: chain longer than the top eigenspace accepted"));
            }
            None
        })
        .collect();
    Outcome::start()
        .count("chains", PLANTED)
        .count("failures", failures.len())
        .fail_if(!failures.is_empty(), failures.first().cloned().unwrap_or_default())
}

/// `(counterexamples, errors, fragile verdict)` of one verify run.
fn verify_counts(map: &dyn CandidateMap, s: &BlockStructure, seed: u64, budget: usize, tol: &Tolerance) -> (usize, usize, bool) {
    let r = verify(map, s, seed, budget, tol);
    (
        r.forward_failures.len() + r.backward_failures.len(),
        r.errors.len(),
        r.verdict == VerifyVerdict::Fragile,
    )
}

fn c9_positive(ctx: &Ctx) -> Outcome {
    const SANDWICHES: usize = 100;
    const BUDGET: usize = 2_000;
    let tol = &ctx.tol;
    let mut out = Outcome::start();

    let sandwich: Vec<(usize, usize, bool)> = (0..SANDWICHES)
        .map(|i| {
            let s = ctx.structure(i);
            let spec = PreserverSpec::random_sandwich(&s, &mut ctx.rng(i as u64));
            verify_counts(&spec, &s, ctx.sub_seed(i as u64), BUDGET, tol)
        })
        .collect();
    let cex: usize = sandwich.iter().map(|r| r.0 + r.1).sum();
    let fragile = sandwich.iter().filter(|r| r.2).count();
    out = out
        .count("sandwich_specs", SANDWICHES)
        .count("sandwich_counterexamples", cex)
        .fail_if(cex > 0, format!("sandwich: {cex} counterexamples or errors"))
        .fail_if(fragile > 0, format!("sandwich: {fragile} fragile runs"));

    let mut others: Vec<(&'static str, usize)> = Vec::new();
    for (k, dims) in [&[1usize, 2, 2, 3][..], &[2, 2, 2], &[3, 3]].iter().enumerate() {
        let s = BlockStructure::new(dims.to_vec()).expect("valid");
        let mut rng = ctx.rng(1_000 + k as u64);
        let perm = PreserverSpec::random_block_permutation(&s, &mut rng);
        let composite = PreserverSpec::Composite {
            parts: vec![
                perm.clone(),
                PreserverSpec::Conjugation,
                PreserverSpec::random_sandwich(&s, &mut rng),
            ],
        };
        for (name, spec) in [
            ("block_permutation", perm),
            ("conjugation", PreserverSpec::Conjugation),
            ("composite", composite),
        ] {
            let (c, e, f) = verify_counts(&spec, &s, ctx.sub_seed(2_000 + k as u64), BUDGET, tol);
            others.push((name, c + e + usize::from(f)));
        }
    }
    for name in ["block_permutation", "conjugation", "composite"] {
        let bad: usize = others.iter().filter(|o| o.0 == name).map(|o| o.1).sum();
        out = out.fail_if(bad > 0, format!("{name}: {bad} counterexamples, errors or fragile runs"));
    }
    out = out.count("family_runs", others.len());

    // wild: property 𝒫 on 500 elements, then 1,000 verified pairs
    let mut wild_p = 0;
    let mut wild_bad = 0;
    for (k, dims) in [&[2usize, 3][..], &[1, 2, 2], &[4]].iter().enumerate() {
        let s = BlockStructure::new(dims.to_vec()).expect("valid");
        let spec = PreserverSpec::Wild {
            seed: ctx.sub_seed(3_000 + k as u64),
            tau_policy: TauPolicy::default(),
        };
        let p = property_p_check(&spec, &s, ctx.sub_seed(3_100 + k as u64), 500, tol);
        wild_p += p.samples;
        wild_bad += p.violations.len() + p.errors.len();
        let (c, e, f) = verify_counts(&spec, &s, ctx.sub_seed(3_200 + k as u64), 1_000, tol);
        wild_bad += c + e + usize::from(f);
    }
    out.count("wild_property_p_samples", wild_p)
        .count("wild_failures", wild_bad)
        .fail_if(wild_bad > 0, format!("wild: {wild_bad} violations, counterexamples or errors"))
}

fn c10_negative(ctx: &Ctx) -> Outcome {
    let tol = &ctx.tol;
    let s = BlockStructure::new(vec![2]).expect("valid");
    let e12 = Element::matrix_unit(&s, 0, 0, 1);
    let e22 = Element::matrix_unit(&s, 0, 1, 1);
    let mut out = Outcome::start();
    for (name, map) in [("transpose", transpose_map()), ("adjoint", adjoint_map())] {
        let r = verify(&map, &s, ctx.sub_seed(0), 200, tol);
        let destroyed = r
            .forward_failures
            .iter()
            .filter(|c| c.before.frames && !c.after.frames)
            .count();
        let stale = r.forward_failures.iter().filter(|c| !c.revalidates(tol)).count();
        let shipped = orth(&e12, &e22, tol)
            && !orth(&map.apply(&e12, tol).expect("total map"), &map.apply(&e22, tol).expect("total map"), tol);
        out = out
            .count(if name == "transpose" { "transpose_counterexamples" } else { "adjoint_counterexamples" }, r.forward_failures.len())
            .fail_if(r.verdict != VerifyVerdict::Fail, format!("{name}: verdict {:?}", r.verdict))
            .fail_if(destroyed == 0, format!("{name}: no orthogonality-destroying counterexample"))
            .fail_if(stale > 0, format!("{name}: {stale} counterexamples do not re-validate"))
            .fail_if(!shipped, format!("{name}: (E12, E22) does not re-validate"));
    }
    let transpose = LinearMap::from_map(&s, |a| Ok(a.transpose())).expect("linear");
    let refused = match recover_sandwich(&transpose, tol, ctx.sub_seed(1)) {
        Ok(_) => None,
        Err(e @ (Error::KappaNotConstant { .. } | Error::RecoveryInconsistent { .. })) => Some(e.to_string()),
        Err(e) => Some(format!("unexpected: {e}")),
    };
    out.count("recover_transpose_refused", refused.is_some())
        .fail_if(refused.is_none(), "recover_sandwich accepted the transpose")
        .fail_if(refused.as_ref().is_some_and(|e| e.starts_with("unexpected")), refused.clone().unwrap_or_default())
}

fn c11_recovery(ctx: &Ctx) -> Outcome {
    const TRIALS: usize = 100;
    let s = BlockStructure::new(vec![1, 2, 2, 3]).expect("valid");
    // (permutation recovered, residual ok, alpha ok, kappa ok, worst residual)
    let results: Vec<(bool, bool, bool, bool, f64)> = (0..TRIALS)
        .into_par_iter()
        .map(|i| {
            let tol = &ctx.tol;
            let mut rng = ctx.rng(i as u64);
            let PreserverSpec::BlockPermutation { pi } = PreserverSpec::random_block_permutation(&s, &mut rng) else {
                unreachable!()
            };
            let alpha = C64::from_polar(rng.random_range(0.25..4.0), rng.random_range(0.0..std::f64::consts::TAU));
            let (u, v) = (haar_unitary_with(&s, &mut rng), haar_unitary_with(&s, &mut rng));
            let planted = PreserverSpec::Composite {
                parts: vec![
                    PreserverSpec::BlockPermutation { pi: pi.clone() },
                    PreserverSpec::Sandwich { u, v, alpha },
                ],
            };
            let map = LinearMap::from_map(&s, |a| planted.apply(a, tol)).expect("linear");
            let perm_ok = extract_block_permutation(&map, &s, ctx.sub_seed(i as u64), tol).is_ok_and(|p| p == pi);
            match recover_sandwich(&map, tol, ctx.sub_seed(i as u64)) {
                Ok(rec) => (
                    perm_ok,
                    rec.residual <= 1e-8,
                    (rec.alpha.norm() / alpha.norm() - 1.0).abs() <= 1e-9,
                    rec.kappa_spread < 1e-9,
                    rec.residual,
                ),
                Err(_) => (perm_ok, false, false, false, f64::INFINITY),
            }
        })
        .collect();
    let n = |f: fn(&(bool, bool, bool, bool, f64)) -> bool| results.iter().filter(|r| f(r)).count();
    let (perm, resid, alpha, kappa) = (n(|r| r.0), n(|r| r.1), n(|r| r.2), n(|r| r.3));
    let worst = results.iter().map(|r| r.4).fold(0.0, f64::max);
    Outcome::start()
        .count("trials", TRIALS)
        .count("permutations_recovered", perm)
        .count("residual_ok", resid)
        .count("alpha_ok", alpha)
        .count("kappa_constant", kappa)
        .count("worst_residual", format!("{worst:.2e}"))
        .fail_if(perm != TRIALS, format!("permutations {perm}/{TRIALS}"))
        .fail_if(resid != TRIALS, format!("residual {resid}/{TRIALS}"))
        .fail_if(alpha != TRIALS, format!("alpha {alpha}/{TRIALS}"))
        .fail_if(kappa != TRIALS, format!("kappa {kappa}/{TRIALS}"))
}

/// `count` nonzero elements with pairwise distinct projective classes.
fn distinct_sample(s: &BlockStructure, count: usize, seed: u64, tol: &Tolerance) -> Vec<Element> {
    let mut pool = engineered_sample(s, count * 2, seed);
    pool.retain(|e| !e.is_zero());
    let mut out: Vec<Element> = Vec::with_capacity(count);
    for e in pool {
        if out.len() == count {
            break;
        }
        let g = OrthoGraph::build(&[out.clone(), vec![e.clone()]].concat(), GraphMode::Mutual, tol);
        if g.is_ok_and(|g| g.vertices.len() == out.len() + 1) {
            out.push(e);
        }
    }
    out
}

fn c12_graph(ctx: &Ctx) -> Outcome {
    const SPECS: usize = 20;
    const VERTICES: usize = 24;
    let tol = &ctx.tol;
    let m2 = BlockStructure::new(vec![2]).expect("valid");
    let fixture = [
        Element::identity(&m2),
        Element::matrix_unit(&m2, 0, 0, 0),
        Element::matrix_unit(&m2, 0, 1, 1),
    ];
    let opts = BuildOptions {
        inject_witnesses: true,
        seed: Some(ctx.seed),
    };
    let g = OrthoGraph::build_with(&fixture, GraphMode::Mutual, tol, opts).expect("one structure");
    let isolated = isolated_vertices(&g).expect("mutual mode");
    let identity_class = Element::identity(&m2).projective_normal_form().expect("nonzero");
    let fixture_ok = isolated.len() == 1
        && g.vertices[isolated[0]]
            .rep
            .distance_max(&identity_class)
            .is_ok_and(|d| d <= 1e-9);

    let invariant: Vec<(bool, usize)> = (0..SPECS)
        .into_par_iter()
        .map(|i| {
            let s = BlockStructure::new(STRUCTURES[4 + i % 5].to_vec()).expect("valid");
            let xs = distinct_sample(&s, VERTICES, ctx.sub_seed(i as u64), tol);
            let spec = PreserverSpec::random_sandwich(&s, &mut ctx.rng(i as u64));
            let mut ok = xs.len() == VERTICES;
            let mut edges = 0;
            for mode in [GraphMode::Mutual, GraphMode::Directed, GraphMode::Reduced] {
                let g = OrthoGraph::build(&xs, mode, tol).expect("one structure");
                if mode == GraphMode::Mutual {
                    ok &= g.vertices.len() == VERTICES;
                    edges = g.edges.len();
                }
                ok &= invariant_under(&g, &spec, tol).unwrap_or(false);
            }
            (ok, edges)
        })
        .collect();
    let passed = invariant.iter().filter(|r| r.0).count();
    let edges: usize = invariant.iter().map(|r| r.1).sum();
    Outcome::start()
        .count("fixture_isolated", isolated.len())
        .count("isomorphism_checks", SPECS)
        .count("isomorphism_passed", passed)
        .count("mutual_edges_total", edges)
        .fail_if(!fixture_ok, format!("fixture isolated set has {} vertices, expected only [I]", isolated.len()))
        .fail_if(passed != SPECS, format!("isomorphism {passed}/{SPECS}"))
        .fail_if(edges == 0, "samples produced no mutual edges")
}

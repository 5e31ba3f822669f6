//! Deciders for strong Birkhoff–James orthogonality `x ⊥ˢ y`, plus plain
//! Birkhoff–James orthogonality.
//!
//! Three deciders are exact up to tolerance and meant to be cross-checked:
//!
//! * [`strong_bj`]: a norm-attaining block of `x` whose top left-singular
//!   space meets `ker y*` in that block;
//! * [`strong_bj_norm_formula`]: `‖‖y‖²x − yy*x‖ = ‖x‖‖y‖²`;
//! * [`strong_bj_distance`]: `dist(x, y𝔄) = ‖(I − P_{R(y)})x‖ ≥ ‖x‖`.
//!
//! [`strong_bj_sampled`] is one-sided (it can only refute) and
//! [`strong_bj_rank_one`] is the fast path `|b*||a*| = 0` for rank-one pairs.

use rand::Rng;
use serde::Serialize;

use crate::algebra::{
    complex_gaussian, decompose, frame::principal_cosine, spectral_norm, CMat, CVec, Element,
    SpectralData, Tolerance, C64,
};
use crate::error::{Error, Result};

/// Certificate refutations must clear this relative drop.
pub const REFUTATION_DROP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Frames,
    NormFormula,
    Distance,
    Sampled,
    RankOne,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Frames => "frames",
            Method::NormFormula => "norm_formula",
            Method::Distance => "distance",
            Method::Sampled => "sampled",
            Method::RankOne => "rank_one",
        }
    }
}

#[derive(Clone, Debug)]
pub enum Witness {
    /// Unit `ζ` with `‖xζ‖ = ‖x‖` and `y*xζ = 0`; `xi = xζ/‖x‖`.
    Vector { zeta: CVec, xi: CVec, block: usize },
    /// An element `z` with `‖x + yz‖ < ‖x‖`.
    Violation(Element),
}

#[derive(Clone, Debug)]
pub struct OrthoVerdict {
    pub value: bool,
    pub witness: Option<Witness>,
    pub method: Method,
    /// Threshold minus the decisive defect; positive means "orthogonal".
    pub margin: f64,
    /// The defect sits within a factor ten of the threshold.
    pub fragile: bool,
}

fn fragile_band(defect: f64, threshold: f64) -> bool {
    defect >= threshold / 10.0 && defect <= threshold * 10.0
}

impl OrthoVerdict {
    fn from_defect(method: Method, defect: f64, threshold: f64) -> Self {
        Self {
            value: defect <= threshold,
            witness: None,
            method,
            margin: threshold - defect,
            fragile: fragile_band(defect, threshold),
        }
    }

    fn trivially_true(method: Method) -> Self {
        Self {
            value: true,
            witness: None,
            method,
            margin: f64::INFINITY,
            fragile: false,
        }
    }
}

fn check_pair(x: &Element, y: &Element) -> Result<()> {
    if x.structure() != y.structure() {
        return Err(Error::StructureMismatch);
    }
    Ok(())
}

/// Frame-based decider on precomputed spectral data.
pub fn strong_bj_spectral(dx: &SpectralData, dy: &SpectralData, tol: &Tolerance) -> OrthoVerdict {
    let s = &dx.structure;
    if dx.is_zero() {
        let zeta = s.embed(0, &unit(s.dim(0), 0));
        return OrthoVerdict {
            witness: Some(Witness::Vector {
                xi: zeta.clone(),
                zeta,
                block: 0,
            }),
            ..OrthoVerdict::trivially_true(Method::Frames)
        };
    }
    let mut best_cos = 0.0;
    let mut best: Option<(usize, CVec)> = None;
    for lambda in dx.norm_achieving_blocks() {
        let f = dx.m_left.restrict_to_block(lambda, tol);
        let g = dy.ker_left.restrict_to_block(lambda, tol);
        let (cos, v) = principal_cosine(&f, &g);
        if cos > best_cos || best.is_none() && v.is_some() {
            if let Some(v) = v {
                best_cos = cos;
                best = Some((lambda, v));
            }
        }
    }
    let mut verdict = OrthoVerdict::from_defect(Method::Frames, 1.0 - best_cos, tol.eps_frame);
    if verdict.value {
        if let Some((block, xi)) = best {
            let zeta = dx.top_preimage(&xi);
            verdict.witness = Some(Witness::Vector { zeta, xi, block });
        }
    }
    verdict
}

fn unit(n: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[i] = C64::new(1.0, 0.0);
    v
}

/// `x ⊥ˢ y` iff some norm-attaining block `λ` of `x` holds a unit `ζ` with
/// `‖xζ‖ = ‖x‖` and `y*xζ = 0`.
pub fn strong_bj(x: &Element, y: &Element, tol: &Tolerance) -> Result<OrthoVerdict> {
    check_pair(x, y)?;
    Ok(strong_bj_spectral(
        &decompose(x, tol),
        &decompose(y, tol),
        tol,
    ))
}

pub(crate) fn norm_formula_verdict(
    x: &Element,
    y: &Element,
    x_norm: f64,
    y_norm: f64,
    tol: &Tolerance,
) -> OrthoVerdict {
    if x_norm == 0.0 || y_norm == 0.0 {
        return OrthoVerdict::trivially_true(Method::NormFormula);
    }
    // both arguments are normalized first, so the test is relative at every scale
    let (sx, sy) = (1.0 / x_norm, 1.0 / y_norm);
    let r = x
        .blocks()
        .iter()
        .zip(y.blocks())
        .map(|(xb, yb)| {
            let (xb, yb) = (xb * C64::new(sx, 0.0), yb * C64::new(sy, 0.0));
            let yyx = &yb * (yb.adjoint() * &xb);
            spectral_norm(&(xb - yyx))
        })
        .fold(0.0, f64::max);
    let defect = (1.0 - r).abs();
    let threshold = tol.eps_norm;
    OrthoVerdict::from_defect(Method::NormFormula, defect, threshold)
}

/// `‖ ‖y‖²x − yy*x ‖ = ‖x‖‖y‖²`, checked on `x/‖x‖` and `y/‖y‖` within `eps_norm`.
pub fn strong_bj_norm_formula(x: &Element, y: &Element, tol: &Tolerance) -> Result<bool> {
    check_pair(x, y)?;
    Ok(norm_formula_verdict(x, y, x.norm(), y.norm(), tol).value)
}

/// Full verdict of the norm-formula decider.
pub fn strong_bj_norm_formula_verdict(
    x: &Element,
    y: &Element,
    tol: &Tolerance,
) -> Result<OrthoVerdict> {
    check_pair(x, y)?;
    Ok(norm_formula_verdict(x, y, x.norm(), y.norm(), tol))
}

pub(crate) fn distance_verdict(x: &Element, dx: &SpectralData, dy: &SpectralData, tol: &Tolerance) -> OrthoVerdict {
    if dx.is_zero() || dy.is_zero() {
        return OrthoVerdict::trivially_true(Method::Distance);
    }
    let p = dy.range_projector();
    let px = p.mul(x).expect("same structure");
    let d = x.sub(&px).expect("same structure").norm();
    let mut verdict = OrthoVerdict::from_defect(Method::Distance, 1.0 - d / dx.norm, tol.eps_norm);
    if !verdict.value {
        let z = dy.pseudo_inverse().mul(x).expect("same structure").scale_real(-1.0);
        verdict.witness = Some(Witness::Violation(z));
    }
    verdict
}

/// `dist(x, y𝔄) ≥ (1 − eps_norm)‖x‖`, using `dist(x, y𝔄) = ‖(I − P_{R(y)})x‖`.
/// On failure the witness is the minimizer `z = −y⁺x`.
pub fn strong_bj_distance(x: &Element, y: &Element, tol: &Tolerance) -> Result<OrthoVerdict> {
    check_pair(x, y)?;
    Ok(distance_verdict(x, &decompose(x, tol), &decompose(y, tol), tol))
}

/// Sampled refutation search: `false` iff some candidate `z` gives
/// `‖x + yz‖ < (1 − 1e-7)‖x‖`. Candidates are `−y⁺x`, `−t·y*x` on a
/// 16-point log grid, and `budget` random elements.
pub fn strong_bj_sampled<R: Rng + ?Sized>(
    x: &Element,
    y: &Element,
    tol: &Tolerance,
    budget: usize,
    rng: &mut R,
) -> Result<bool> {
    Ok(find_violation(x, y, tol, budget, rng)?.is_none())
}

/// The refuting `z` found by [`strong_bj_sampled`], if any.
pub fn find_violation<R: Rng + ?Sized>(
    x: &Element,
    y: &Element,
    tol: &Tolerance,
    budget: usize,
    rng: &mut R,
) -> Result<Option<Element>> {
    check_pair(x, y)?;
    let x_norm = x.norm();
    let y_norm = y.norm();
    if x_norm == 0.0 || y_norm == 0.0 {
        return Ok(None);
    }
    let limit = (1.0 - REFUTATION_DROP) * x_norm;
    let violates = |z: &Element| -> bool {
        let xyz = x.add(&y.mul(z).expect("same structure")).expect("same structure");
        xyz.norm() < limit
    };
    let dy = decompose(y, tol);
    let z = dy.pseudo_inverse().mul(x)?.scale_real(-1.0);
    if violates(&z) {
        return Ok(Some(z));
    }
    let ystar_x = y.adjoint().mul(x)?;
    for j in 0..16 {
        let t = 10f64.powf(-3.0 + 5.0 * j as f64 / 15.0) / (y_norm * y_norm);
        let z = ystar_x.scale_real(-t);
        if violates(&z) {
            return Ok(Some(z));
        }
    }
    let s = x.structure();
    for _ in 0..budget {
        let scale = 10f64.powf(rng.random_range(-3.0..1.0)) * x_norm / y_norm;
        let blocks: Vec<CMat> = s
            .dims()
            .iter()
            .map(|&n| CMat::from_fn(n, n, |_, _| complex_gaussian(rng) * scale))
            .collect();
        let z = Element::validate(s, blocks)?;
        if violates(&z) {
            return Ok(Some(z));
        }
    }
    Ok(None)
}

/// Birkhoff–James orthogonality `‖x + λy‖ ≥ ‖x‖` for all `λ ∈ ℂ`, by a
/// polar grid followed by pattern search on the convex map `λ ↦ ‖x + λy‖`.
pub fn bj(x: &Element, y: &Element, tol: &Tolerance) -> Result<bool> {
    check_pair(x, y)?;
    let x_norm = x.norm();
    let y_norm = y.norm();
    if x_norm == 0.0 || y_norm == 0.0 {
        return Ok(true);
    }
    let f = |lambda: C64| -> f64 { x.add(&y.scale(lambda)).expect("same structure").norm() };
    let radius = 2.0 * x_norm / y_norm;
    let mut best = (C64::new(0.0, 0.0), x_norm);
    for i in 1..=32 {
        let r = radius * i as f64 / 32.0;
        for k in 0..16 {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
            let lambda = C64::from_polar(r, theta);
            let v = f(lambda);
            if v < best.1 {
                best = (lambda, v);
            }
        }
    }
    let dirs = [
        C64::new(1.0, 0.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(0.0, -1.0),
        C64::new(1.0, 1.0) * std::f64::consts::FRAC_1_SQRT_2,
        C64::new(1.0, -1.0) * std::f64::consts::FRAC_1_SQRT_2,
        C64::new(-1.0, 1.0) * std::f64::consts::FRAC_1_SQRT_2,
        C64::new(-1.0, -1.0) * std::f64::consts::FRAC_1_SQRT_2,
    ];
    let mut step = radius / 32.0;
    while step > 1e-10 * radius {
        let mut moved = false;
        for d in dirs {
            let cand = best.0 + d * step;
            let v = f(cand);
            if v < best.1 {
                best = (cand, v);
                moved = true;
                break;
            }
        }
        if !moved {
            step /= 2.0;
        }
        if best.1 < (1.0 - tol.eps_norm) * x_norm {
            return Ok(false);
        }
    }
    Ok(best.1 >= (1.0 - tol.eps_norm) * x_norm)
}

/// Rank-one fast path: `a ⊥ˢ b ⇔ |b*||a*| = 0`.
pub fn strong_bj_rank_one(a: &Element, b: &Element, tol: &Tolerance) -> Result<bool> {
    check_pair(a, b)?;
    let da = decompose(a, tol);
    let db = decompose(b, tol);
    if da.rank != 1 {
        return Err(Error::NotRankOne(da.rank));
    }
    if db.rank != 1 {
        return Err(Error::NotRankOne(db.rank));
    }
    let product = db.abs_adjoint().mul(&da.abs_adjoint())?;
    Ok(product.norm() <= tol.eps_norm * da.norm * db.norm)
}

/// All three exact deciders on one pair.
#[derive(Clone, Debug)]
pub struct Decision {
    pub frames: OrthoVerdict,
    pub formula: OrthoVerdict,
    pub distance: OrthoVerdict,
}

impl Decision {
    pub fn agree(&self) -> bool {
        self.frames.value == self.formula.value && self.frames.value == self.distance.value
    }

    pub fn fragile(&self) -> bool {
        self.frames.fragile || self.formula.fragile || self.distance.fragile
    }

    pub fn value(&self) -> bool {
        self.frames.value
    }

    pub fn verdicts(&self) -> [&OrthoVerdict; 3] {
        [&self.frames, &self.formula, &self.distance]
    }
}

pub fn decide(x: &Element, y: &Element, tol: &Tolerance) -> Result<Decision> {
    check_pair(x, y)?;
    let dx = decompose(x, tol);
    let dy = decompose(y, tol);
    Ok(decide_spectral(x, y, &dx, &dy, tol))
}

pub fn decide_spectral(
    x: &Element,
    y: &Element,
    dx: &SpectralData,
    dy: &SpectralData,
    tol: &Tolerance,
) -> Decision {
    Decision {
        frames: strong_bj_spectral(dx, dy, tol),
        formula: norm_formula_verdict(x, y, dx.norm, dy.norm, tol),
        distance: distance_verdict(x, dx, dy, tol),
    }
}

/// Checks a witness against `x` and `y`.
pub fn witness_holds(x: &Element, y: &Element, witness: &Witness, tol: &Tolerance) -> bool {
    let x_norm = x.norm();
    match witness {
        Witness::Vector { zeta, .. } => {
            let xz = x.apply(zeta);
            let yxz = y.adjoint().apply(&xz);
            xz.norm() >= (1.0 - tol.eps_norm.max(1e-8)) * x_norm
                && yxz.norm() <= 1e-8 * x_norm * y.norm().max(1.0)
        }
        Witness::Violation(z) => {
            let v = x.add(&y.mul(z).expect("same structure")).expect("same structure");
            v.norm() <= (1.0 - REFUTATION_DROP) * x_norm
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{rng_from_seed, BlockStructure};

    fn m2() -> BlockStructure {
        BlockStructure::new(vec![2]).unwrap()
    }

    fn diag(d: &[f64]) -> Element {
        Element::real_diagonal(&BlockStructure::new(vec![d.len()]).unwrap(), d).unwrap()
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn frames_examples() {
        let s = m2();
        let x = diag(&[2.0, 1.0]);
        assert!(strong_bj(&x, &Element::zeros(&s), &tol()).unwrap().value);
        let v = strong_bj(&x, &diag(&[0.0, 1.0]), &tol()).unwrap();
        assert!(v.value);
        match v.witness.unwrap() {
            Witness::Vector { xi, zeta, .. } => {
                assert!((xi[0].norm() - 1.0).abs() < 1e-12);
                assert!((zeta[0].norm() - 1.0).abs() < 1e-12);
            }
            Witness::Violation(_) => panic!("expected vector witness"),
        }
        assert!(!strong_bj(&x, &diag(&[1.0, 0.0]), &tol()).unwrap().value);
        assert!(strong_bj(&Element::identity(&s), &diag(&[1.0, 0.0]), &tol()).unwrap().value);
    }

    #[test]
    fn norm_formula_examples() {
        let s = m2();
        let x = diag(&[2.0, 1.0]);
        assert!(strong_bj_norm_formula(&x, &Element::zeros(&s), &tol()).unwrap());
        assert!(strong_bj_norm_formula(&x, &diag(&[0.0, 1.0]), &tol()).unwrap());
        let e12 = Element::matrix_unit(&s, 0, 0, 1);
        let e22 = Element::matrix_unit(&s, 0, 1, 1);
        assert!(strong_bj_norm_formula(&e12, &e22, &tol()).unwrap());
        assert!(!strong_bj_norm_formula(&x, &diag(&[1.0, 0.0]), &tol()).unwrap());
        // tiny y: an absolute threshold would accept anything here
        assert!(!strong_bj_norm_formula(&x, &diag(&[1e-12, 0.0]), &tol()).unwrap());
        assert!(strong_bj_norm_formula(&x, &diag(&[0.0, 1e-12]), &tol()).unwrap());
    }

    #[test]
    fn distance_examples() {
        let s = m2();
        let x = diag(&[2.0, 1.0]);
        assert!(strong_bj_distance(&x, &Element::zeros(&s), &tol()).unwrap().value);
        let v = strong_bj_distance(&x, &diag(&[1.0, 0.0]), &tol()).unwrap();
        assert!(!v.value);
        let Some(Witness::Violation(z)) = v.witness else {
            panic!("expected violating z");
        };
        assert!(z.distance_max(&diag(&[-2.0, 0.0])).unwrap() < 1e-12);
        let xyz = x.add(&diag(&[1.0, 0.0]).mul(&z).unwrap()).unwrap();
        assert!((xyz.norm() - 1.0).abs() < 1e-12);
        let e11 = Element::matrix_unit(&s, 0, 0, 0);
        assert!(strong_bj_distance(&Element::identity(&s), &e11, &tol()).unwrap().value);
    }

    #[test]
    fn sampled_examples() {
        let s = m2();
        let x = diag(&[2.0, 1.0]);
        let mut rng = rng_from_seed(1);
        assert!(!strong_bj_sampled(&x, &diag(&[1.0, 0.0]), &tol(), 100, &mut rng).unwrap());
        assert!(strong_bj_sampled(&x, &Element::zeros(&s), &tol(), 10, &mut rng).unwrap());
        assert!(strong_bj_sampled(&x, &diag(&[0.0, 1.0]), &tol(), 1000, &mut rng).unwrap());
    }

    #[test]
    fn bj_examples() {
        let c = BlockStructure::new(vec![1]).unwrap();
        let one = Element::identity(&c);
        assert!(!bj(&one, &one, &tol()).unwrap());
        assert!(bj(&one, &Element::zeros(&c), &tol()).unwrap());
        assert!(bj(&diag(&[1.0, -1.0]), &Element::identity(&m2()), &tol()).unwrap());
        assert!(!bj(&diag(&[2.0, 1.0]), &diag(&[1.0, 0.0]), &tol()).unwrap());
    }

    #[test]
    fn rank_one_examples() {
        let s = m2();
        let e11 = Element::matrix_unit(&s, 0, 0, 0);
        let e22 = Element::matrix_unit(&s, 0, 1, 1);
        let e12 = Element::matrix_unit(&s, 0, 0, 1);
        assert!(strong_bj_rank_one(&e11, &e22, &tol()).unwrap());
        assert!(!strong_bj_rank_one(&e11, &e12, &tol()).unwrap());
        let mut rng = rng_from_seed(3);
        let xi = crate::algebra::random_block_vector(2, &mut rng);
        let z1 = crate::algebra::random_block_vector(2, &mut rng);
        let z2 = crate::algebra::random_block_vector(2, &mut rng);
        let a = Element::rank_one(&s, 0, &xi, &z1);
        let b = Element::rank_one(&s, 0, &xi, &z2);
        assert!(!strong_bj_rank_one(&a, &b, &tol()).unwrap());
        assert_eq!(
            strong_bj_rank_one(&Element::identity(&s), &e11, &tol()),
            Err(Error::NotRankOne(2))
        );
    }

    #[test]
    fn structure_mismatch_is_reported() {
        let a = Element::identity(&m2());
        let b = Element::identity(&BlockStructure::new(vec![1, 1]).unwrap());
        assert!(matches!(strong_bj(&a, &b, &tol()), Err(Error::StructureMismatch)));
        assert!(matches!(
            strong_bj_distance(&a, &b, &tol()),
            Err(Error::StructureMismatch)
        ));
    }
}

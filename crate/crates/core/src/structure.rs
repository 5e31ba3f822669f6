//! Structural notions induced by strong BJ orthogonality: right and left
//! symmetric elements, coisometries, inclusions of the outgoing and incoming
//! sets `R_x = {y : x ⊥ˢ y}` and `L_x = {y : y ⊥ˢ x}`, rank chains,
//! block overlap and R-chains.
//!
//! Every negative answer comes with a witness element built from a vector
//! living in a single block, and every witness is re-checked with the
//! frame decider before it is returned.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::algebra::{
    decompose, frame::inclusion_residual, frame_leq, linalg, BlockStructure, CMat, CVec, Element, Frame,
    SpectralData, Tolerance, C64,
};
use crate::error::{Error, Result};
use crate::orthogonality::strong_bj_spectral;

fn orth(x: &Element, y: &Element, tol: &Tolerance) -> bool {
    strong_bj_spectral(&decompose(x, tol), &decompose(y, tol), tol).value
}

fn nonzero(d: &SpectralData) -> Result<()> {
    if d.is_zero() {
        return Err(Error::ZeroElement);
    }
    Ok(())
}

/// Fixes the phase of a unit vector: first non-negligible coordinate real-positive.
pub(crate) fn gauge(v: CVec) -> CVec {
    match v.iter().find(|z| z.norm() > 1e-12) {
        Some(&lead) => v * (lead.conj() / lead.norm()),
        None => v,
    }
}

/// Right symmetry: every block of `xx*` is invertible. `x = 0` is not.
pub fn is_right_symmetric(x: &Element, tol: &Tolerance) -> bool {
    let d = decompose(x, tol);
    is_right_symmetric_spectral(&d, tol)
}

pub(crate) fn is_right_symmetric_spectral(d: &SpectralData, tol: &Tolerance) -> bool {
    if d.is_zero() {
        return false;
    }
    d.singulars
        .iter()
        .all(|s| s.last().is_some_and(|&min| min > tol.eps_rank * d.norm))
}

/// A partner `y = ξ ⊗ ξ` with `ξ ∈ ker x*` in one block, so that
/// `y ⊥ˢ x` and `x ⊥ˢ y`; `None` exactly when `x` is right symmetric.
pub fn mutual_edge_witness(x: &Element, tol: &Tolerance) -> Result<Option<Element>> {
    let d = decompose(x, tol);
    nonzero(&d)?;
    let Some(j) = (0..d.ker_left.dim()).find(|&j| d.ker_left.tags()[j].is_some()) else {
        return Ok(None);
    };
    let xi = d.ker_left.column(j);
    let y = Element::projection_onto(x.structure(), &xi)?;
    let dy = decompose(&y, tol);
    if !(strong_bj_spectral(&dy, &d, tol).value && strong_bj_spectral(&d, &dy, tol).value) {
        return Err(Error::WitnessUnavailable(
            "kernel projection failed the mutual orthogonality check".into(),
        ));
    }
    Ok(Some(y))
}

/// `‖xx* − ‖x‖²I‖ ≤ eps_norm·‖x‖²`.
pub fn is_coisometry(x: &Element, tol: &Tolerance) -> Result<bool> {
    let norm = x.norm();
    if norm == 0.0 {
        return Err(Error::ZeroElement);
    }
    let n2 = norm * norm;
    let gap = x
        .mul(&x.adjoint())?
        .sub(&Element::identity(x.structure()).scale_real(n2))?
        .norm();
    Ok(gap <= tol.eps_norm * n2)
}

/// For a scaled coisometry `u`, an eigenvalue `λ` of `u/‖u‖` (so `|λ| = 1`
/// and `u/‖u‖ − λI` is singular), choosing the smallest argument in `[0, 2π)`.
pub fn unimodular_noninvertible_shift(u: &Element, tol: &Tolerance) -> Result<C64> {
    if !is_coisometry(u, tol)? {
        return Err(Error::NotCoisometry);
    }
    let w = u.scale_real(1.0 / u.norm());
    let tau = 2.0 * std::f64::consts::PI;
    let arg = |z: C64| {
        let a = z.arg().rem_euclid(tau);
        if tau - a < 1e-9 {
            0.0
        } else {
            a
        }
    };
    let mut best: Option<C64> = None;
    for b in w.blocks() {
        for lambda in linalg::eigenvalues(b) {
            let lambda = lambda / lambda.norm();
            if best.is_none_or(|cur| arg(lambda) < arg(cur) - 1e-12) {
                best = Some(lambda);
            }
        }
    }
    let lambda = best.ok_or(Error::ZeroElement)?;
    let shifted = w.sub(&Element::identity(u.structure()).scale(lambda))?;
    let smallest = decompose(&shifted, tol)
        .singulars
        .iter()
        .filter_map(|s| s.last().copied())
        .fold(f64::INFINITY, f64::min);
    if smallest > 1e-8 {
        return Err(Error::Internal(format!(
            "shift {lambda} leaves smallest singular value {smallest:.3e}"
        )));
    }
    Ok(lambda)
}

/// Left symmetry: `|a*|/‖a‖` is a rank-one projection, i.e. `a = σ ξ ⊗ ζ`.
pub fn is_left_symmetric(a: &Element, tol: &Tolerance) -> Result<bool> {
    let d = decompose(a, tol);
    nonzero(&d)?;
    Ok(d.rank == 1)
}

/// Outcome of an inclusion test between `R` or `L` sets.
#[derive(Clone, Debug)]
pub struct InclusionReport {
    pub holds: bool,
    /// R-case: `A ⊥ˢ C` and not `B ⊥ˢ C`. L-case: `C ⊥ˢ A` and not `C ⊥ˢ B`.
    pub witness: Option<Element>,
}

/// Unit vector of `sub` in a single block that is farthest from `sup`,
/// provided its residual exceeds `eps_frame`.
fn blockwise_escape(sub: &Frame, sup: &Frame, tol: &Tolerance) -> Option<CVec> {
    let s = sub.structure();
    let mut best: Option<(f64, CVec)> = None;
    for lambda in 0..s.num_blocks() {
        let f = sub.restrict_to_block(lambda, tol);
        if f.is_empty() {
            continue;
        }
        let residual = if sup.is_empty() {
            f.columns().clone()
        } else {
            f.columns() - sup.columns() * (sup.columns().adjoint() * f.columns())
        };
        let svd = linalg::svd(&residual);
        let (i, r) = svd
            .s
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
        if r > tol.eps_frame && best.as_ref().is_none_or(|b| r > b.0) {
            let coeffs: CVec = svd.v.column(i).into_owned();
            let mut xi = f.columns() * coeffs;
            let n = xi.norm();
            xi /= C64::new(n, 0.0);
            best = Some((r, xi));
        }
    }
    best.map(|b| b.1)
}

/// `R_A ⊆ R_B ⇔ M_{|A*|} ⊆ M_{|B*|}`. On failure the witness is
/// `C = I − E_ξ` for a blockwise `ξ ∈ M_{|A*|}` outside `M_{|B*|}`.
pub fn r_leq(a: &Element, b: &Element, tol: &Tolerance) -> Result<InclusionReport> {
    if a.structure() != b.structure() {
        return Err(Error::StructureMismatch);
    }
    let da = decompose(a, tol);
    let db = decompose(b, tol);
    nonzero(&da)?;
    nonzero(&db)?;
    if frame_leq(&da.m_left, &db.m_left, tol)? {
        return Ok(InclusionReport {
            holds: true,
            witness: None,
        });
    }
    let xi = blockwise_escape(&da.m_left, &db.m_left, tol).ok_or_else(|| {
        Error::WitnessUnavailable("every blockwise top vector of A lies in M_{|B*|}".into())
    })?;
    if b.adjoint().apply(&xi).norm() >= b.norm() * (1.0 - tol.eps_norm) {
        return Err(Error::WitnessUnavailable(
            "chosen vector does not lower ‖B*ξ‖ below ‖B‖".into(),
        ));
    }
    let c = Element::identity(a.structure()).sub(&Element::projection_onto(a.structure(), &xi)?)?;
    let dc = decompose(&c, tol);
    if !strong_bj_spectral(&da, &dc, tol).value || strong_bj_spectral(&db, &dc, tol).value {
        return Err(Error::WitnessUnavailable("R-witness failed validation".into()));
    }
    Ok(InclusionReport {
        holds: false,
        witness: Some(c),
    })
}

/// `L_A ⊆ L_B ⇔ ker A* ⊆ ker B* ⇔ R(B) ⊆ R(A)`. On failure the witness is
/// `C = E_ξ` for a blockwise `ξ ∈ ker A*` with `B*ξ ≠ 0`.
pub fn l_leq(a: &Element, b: &Element, tol: &Tolerance) -> Result<InclusionReport> {
    if a.structure() != b.structure() {
        return Err(Error::StructureMismatch);
    }
    let da = decompose(a, tol);
    let db = decompose(b, tol);
    nonzero(&da)?;
    nonzero(&db)?;
    let by_kernels = frame_leq(&da.ker_left, &db.ker_left, tol)?;
    let by_ranges = frame_leq(&db.range, &da.range, tol)?;
    if by_kernels != by_ranges {
        return Err(Error::Internal(format!(
            "kernel inclusion ({:.3e}) and range inclusion ({:.3e}) disagree",
            inclusion_residual(&da.ker_left, &db.ker_left),
            inclusion_residual(&db.range, &da.range)
        )));
    }
    if by_kernels {
        return Ok(InclusionReport {
            holds: true,
            witness: None,
        });
    }
    let xi = blockwise_escape(&da.ker_left, &db.ker_left, tol).ok_or_else(|| {
        Error::WitnessUnavailable("every blockwise kernel vector of A* lies in ker B*".into())
    })?;
    let c = Element::projection_onto(a.structure(), &xi)?;
    let dc = decompose(&c, tol);
    if !strong_bj_spectral(&dc, &da, tol).value || strong_bj_spectral(&dc, &db, tol).value {
        return Err(Error::WitnessUnavailable("L-witness failed validation".into()));
    }
    Ok(InclusionReport {
        holds: false,
        witness: Some(c),
    })
}

/// `|A*|/‖A‖` is idempotent: `‖|A*|²/‖A‖ − |A*|‖ ≤ eps_norm·‖A‖`.
pub fn is_scaled_projection(a: &Element, tol: &Tolerance) -> Result<bool> {
    let d = decompose(a, tol);
    nonzero(&d)?;
    let p = d.abs_adjoint();
    let gap = p.mul(&p)?.scale_real(1.0 / d.norm).sub(&p)?.norm();
    Ok(gap <= tol.eps_norm * d.norm)
}

/// Left-singular vectors of `a` with nonzero singular value, sorted by
/// nonincreasing singular value across blocks (ties broken by block index).
fn ranked_left_vectors(d: &SpectralData) -> Vec<(f64, usize, CVec)> {
    let mut out = Vec::new();
    for (lambda, svd) in d.svds.iter().enumerate() {
        for i in 0..d.block_ranks[lambda] {
            out.push((svd.s[i], lambda, svd.u.column(i).into_owned()));
        }
    }
    out.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    out
}

fn projection_sum(s: &BlockStructure, vectors: &[(f64, usize, CVec)]) -> Element {
    let mut blocks: Vec<CMat> = s.dims().iter().map(|&n| CMat::zeros(n, n)).collect();
    for (_, lambda, v) in vectors {
        blocks[*lambda] += v * v.adjoint();
    }
    Element::from_blocks_unchecked(s, blocks)
}

/// Rank from the strictly increasing chain `L_{A_0} ⊊ L_{A_1} ⊊ … ⊊ L_{A_{n−1}}`
/// with `A_k = Σ_{j ≤ n−k} ξ_j ⊗ ξ_j`. The returned chain starts with `A`
/// itself (same `L` set as `A_0`) followed by `A_1, …, A_{n−1}`.
pub fn rank_via_chain(a: &Element, tol: &Tolerance) -> Result<(usize, Vec<Element>)> {
    let d = decompose(a, tol);
    nonzero(&d)?;
    let vectors = ranked_left_vectors(&d);
    let n = vectors.len();
    let s = a.structure();
    let mut chain = vec![a.clone()];
    let mut links = vec![projection_sum(s, &vectors)];
    for k in 1..n {
        let part = projection_sum(s, &vectors[..n - k]);
        chain.push(part.clone());
        links.push(part);
    }
    if !l_leq(a, &links[0], tol)?.holds || !l_leq(&links[0], a, tol)?.holds {
        return Err(Error::ChainInconsistent(0));
    }
    for k in 0..n.saturating_sub(1) {
        let forward = l_leq(&links[k], &links[k + 1], tol)?;
        let backward = l_leq(&links[k + 1], &links[k], tol)?;
        if !forward.holds || backward.holds {
            return Err(Error::ChainInconsistent(k));
        }
    }
    if n != d.rank {
        return Err(Error::Internal(format!("chain length {n} vs rank {}", d.rank)));
    }
    Ok((n, chain))
}

/// Block overlap `Λ_A ∩ Λ_B ≠ ∅`, with a rank-one `C` such that neither
/// `C ⊥ˢ A` nor `C ⊥ˢ B` when the supports meet.
pub fn shares_block(a: &Element, b: &Element, tol: &Tolerance) -> Result<(bool, Option<Element>)> {
    if a.structure() != b.structure() {
        return Err(Error::StructureMismatch);
    }
    let da = decompose(a, tol);
    let db = decompose(b, tol);
    nonzero(&da)?;
    nonzero(&db)?;
    let common: Vec<usize> = da
        .support
        .iter()
        .copied()
        .filter(|l| db.support.contains(l))
        .collect();
    if common.is_empty() {
        return Ok((false, None));
    }
    let s = a.structure();
    let abs_a = da.abs_adjoint();
    let abs_b = db.abs_adjoint();
    let not_orth = |c: &Element| !orth(c, a, tol) && !orth(c, b, tol);
    for &lambda in &common {
        // ξ with |A*|ξ ≠ 0: the top left-singular vector of A in this block
        let xi = gauge(s.embed(lambda, &da.svds[lambda].u.column(0).into_owned()));
        let b_xi = abs_b.apply(&xi).norm();
        if b_xi > 1e-6 * db.norm {
            let c = Element::projection_onto(s, &xi)?;
            if not_orth(&c) {
                return Ok((true, Some(c)));
            }
        }
        // ζ ⊥ ξ in the block with |B*|ζ ≠ 0
        let zeta_raw = s.embed(lambda, &db.svds[lambda].u.column(0).into_owned());
        let mut zeta = &zeta_raw - &xi * xi.dotc(&zeta_raw);
        let zn = zeta.norm();
        if zn < 1e-8 {
            continue;
        }
        zeta = gauge(zeta / C64::new(zn, 0.0));
        if abs_a.apply(&xi).dotc(&zeta).re < 0.0 {
            zeta = -zeta;
        }
        let eta = (&xi + &zeta) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let c = Element::projection_onto(s, &eta)?;
        if not_orth(&c) {
            return Ok((true, Some(c)));
        }
    }
    Err(Error::WitnessUnavailable(
        "no rank-one element fails orthogonality to both".into(),
    ))
}

/// R-chain `y_1, …, y_n` under a positive `x`: `x_j = E_{ξ_j}` for
/// orthonormal top eigenvectors of `x/‖x‖`, `y_k = Σ_{j≤k} x_j`.
#[derive(Clone, Debug, Serialize)]
pub struct RChain {
    /// `x/‖x‖`.
    #[serde(skip)]
    pub base: Element,
    #[serde(skip)]
    pub parts: Vec<Element>,
    #[serde(skip)]
    pub links: Vec<Element>,
    /// `dim M_{|x*|}`, the bound on any chain under `x`.
    pub bound: usize,
}

impl RChain {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

/// Builds an R-chain of length `n` under the positive element `x` and
/// verifies `R_{y_k} ⊊ R_{y_{k+1}} ⊆ R_x` together with `n ≤ dim M_{|x*|}`.
pub fn r_chain(x: &Element, n: usize, tol: &Tolerance) -> Result<RChain> {
    let d = decompose(x, tol);
    nonzero(&d)?;
    let available = d.m_left.dim();
    if n == 0 || n > available {
        return Err(Error::EigenspaceTooSmall {
            requested: n,
            available,
        });
    }
    let s = x.structure();
    let base = x.scale_real(1.0 / d.norm);
    let parts: Vec<Element> = (0..n)
        .map(|j| Element::projection_onto(s, &d.m_left.column(j)))
        .collect::<Result<_>>()?;
    let mut links = Vec::with_capacity(n);
    let mut acc = Element::zeros(s);
    for p in &parts {
        acc = acc.add(p)?;
        links.push(acc.clone());
    }
    let eps = 1e-9;
    for (j, p) in parts.iter().enumerate() {
        if (p.norm() - 1.0).abs() > eps || base.mul(p)?.distance_max(p)? > eps {
            return Err(Error::ChainInconsistent(j));
        }
        for q in &parts[j + 1..] {
            if p.mul(q)?.max_abs() > eps {
                return Err(Error::ChainInconsistent(j));
            }
        }
    }
    for (k, y) in links.iter().enumerate() {
        if (y.norm() - 1.0).abs() > eps || !r_leq(y, &base, tol)?.holds {
            return Err(Error::ChainInconsistent(k));
        }
        if k + 1 < links.len() {
            let next = &links[k + 1];
            let up = r_leq(y, next, tol)?;
            let down = r_leq(next, y, tol)?;
            // y_k ∈ R_{y_{k+1}} \ R_{y_k}
            if !up.holds || down.holds || !orth(next, y, tol) || orth(y, y, tol) {
                return Err(Error::ChainInconsistent(k));
            }
        }
    }
    Ok(RChain {
        base,
        parts,
        links,
        bound: available,
    })
}

/// Positive element with a planted top eigenspace of dimension `top`:
/// `U (I_top ⊕ D) U*` with `D` having entries in `[0.1, 0.9]`.
pub fn planted_positive<R: rand::Rng + ?Sized>(
    s: &BlockStructure,
    top: usize,
    rng: &mut R,
) -> Result<Element> {
    let n = s.ambient_dim();
    if top == 0 || top > n {
        return Err(Error::RankTooLarge {
            requested: top,
            ambient: n,
        });
    }
    let mut diag: Vec<f64> = (0..n)
        .map(|i| if i < top { 1.0 } else { rng.random_range(0.1..0.9) })
        .collect();
    diag.shuffle(rng);
    let d = Element::real_diagonal(s, &diag)?;
    let u = crate::algebra::haar_unitary_with(s, rng);
    u.mul(&d)?.mul(&u.adjoint())
}

/// Summary used by `classify`.
#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub norm: f64,
    pub rank: usize,
    pub support: Vec<usize>,
    pub norm_achieving_blocks: Vec<usize>,
    pub right_symmetric: bool,
    pub left_symmetric: bool,
    pub coisometry: bool,
    pub scaled_projection: bool,
    pub rank_chain_length: usize,
}

pub fn classify(x: &Element, tol: &Tolerance) -> Result<Classification> {
    let d = decompose(x, tol);
    nonzero(&d)?;
    let (chain, _) = rank_via_chain(x, tol)?;
    Ok(Classification {
        norm: d.norm,
        rank: d.rank,
        support: d.support.clone(),
        norm_achieving_blocks: d.norm_achieving_blocks(),
        right_symmetric: is_right_symmetric_spectral(&d, tol),
        left_symmetric: is_left_symmetric(x, tol)?,
        coisometry: is_coisometry(x, tol)?,
        scaled_projection: is_scaled_projection(x, tol)?,
        rank_chain_length: chain,
    })
}

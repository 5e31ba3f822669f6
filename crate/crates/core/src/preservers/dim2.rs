//! Preservers of a 2×2 block induced by a bijection `φ` of projective lines
//! that commutes with taking orthocomplements:
//! `Σ σ_i ξ_i ⊗ ζ_i ↦ Σ σ_i φ(ξ_i) ⊗ ζ_i`.
//!
//! `φ` is given on finitely many lines, closed under `L ↦ L^⊥`, and is the
//! identity on every line outside the table.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{linalg, random_block_vector, BlockStructure, CMat, CVec, Element, C64};
use crate::error::{Error, Result};

/// Lines closer than this (in `1 − |⟨r, s⟩|`) are the same line.
const LINE_MATCH: f64 = 1e-9;

/// `φ(span from) = span to`; representatives need not be normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinePair {
    pub from: [C64; 2],
    pub to: [C64; 2],
}

impl LinePair {
    pub fn swapped(&self) -> Self {
        Self {
            from: self.to,
            to: self.from,
        }
    }
}

fn unit(v: [C64; 2]) -> Result<CVec> {
    let v = CVec::from_column_slice(&v);
    let n = v.norm();
    if !(n > 1e-12 && n.is_finite()) {
        return Err(Error::InvalidSpec("line representative must be nonzero".into()));
    }
    Ok(v / C64::new(n, 0.0))
}

fn perp(v: &CVec) -> CVec {
    CVec::from_column_slice(&[-v[1].conj(), v[0].conj()])
}

fn same_line(a: &CVec, b: &CVec) -> bool {
    a.dotc(b).norm() >= 1.0 - LINE_MATCH
}

/// The validated, orthocomplement-closed table.
pub(crate) struct LineTable {
    structure: BlockStructure,
    block: usize,
    from: Vec<CVec>,
    to: Vec<CVec>,
}

impl LineTable {
    pub(crate) fn build(s: &BlockStructure, block: usize, phi: &[LinePair]) -> Result<Self> {
        if block >= s.num_blocks() || s.dim(block) != 2 {
            return Err(Error::InvalidSpec(format!("block {block} is not a 2×2 block of {s}")));
        }
        let mut from = Vec::new();
        let mut to = Vec::new();
        for p in phi {
            let (f, t) = (unit(p.from)?, unit(p.to)?);
            from.push(perp(&f));
            to.push(perp(&t));
            from.push(f);
            to.push(t);
        }
        for i in 0..from.len() {
            for j in 0..i {
                let same_in = same_line(&from[i], &from[j]);
                let same_out = same_line(&to[i], &to[j]);
                if same_in != same_out {
                    return Err(Error::InvalidSpec(
                        "line table is not a well-defined bijection".into(),
                    ));
                }
            }
        }
        // φ is the identity off the table, so the table must permute its own lines
        let covered = |lines: &[CVec], v: &CVec| lines.iter().any(|l| same_line(l, v));
        if !to.iter().all(|t| covered(&from, t)) {
            return Err(Error::InvalidSpec(
                "line table must permute the lines it mentions".into(),
            ));
        }
        Ok(Self {
            structure: s.clone(),
            block,
            from,
            to,
        })
    }

    /// `φ(ξ) = ⟨r_L, ξ⟩ r_{φ(L)}` for `ξ ∈ L`.
    fn image(&self, xi: &CVec) -> CVec {
        for (f, t) in self.from.iter().zip(&self.to) {
            let c = f.dotc(xi);
            if c.norm() >= (1.0 - LINE_MATCH) * xi.norm() {
                return t * c;
            }
        }
        xi.clone()
    }

    pub(crate) fn apply(&self, a: &Element) -> Result<Element> {
        if a.structure() != &self.structure {
            return Err(Error::StructureMismatch);
        }
        let b = a.block(self.block);
        let svd = linalg::svd(b);
        let mut out = CMat::zeros(2, 2);
        for i in 0..2 {
            let sigma = svd.s[i];
            if sigma == 0.0 {
                continue;
            }
            let xi = svd.u.column(i).into_owned();
            out += self.image(&xi) * svd.v.column(i).adjoint() * C64::new(sigma, 0.0);
        }
        let block = self.block;
        Ok(a.map_blocks(|l, m| if l == block { out.clone() } else { m.clone() }))
    }

    /// An element whose singular lines in the table's block are table lines.
    pub(crate) fn plant(&self, rng: &mut ChaCha8Rng) -> Option<Element> {
        let line = self.from.choose(rng)?.clone();
        let other = perp(&line);
        let zeta = random_block_vector(2, rng);
        let omega = CVec::from_column_slice(&[-zeta[1].conj(), zeta[0].conj()]);
        let top = rng.random_range(0.5..2.0);
        let low = if rng.random_bool(0.5) { 0.0 } else { top * rng.random_range(0.1..0.9) };
        let m = &line * zeta.adjoint() * C64::new(top, 0.0) + &other * omega.adjoint() * C64::new(low, 0.0);
        let s = &self.structure;
        let block = self.block;
        let rest = crate::algebra::random_element_with(s, None, rng).ok()?;
        let scale = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.1..1.5) };
        Some(rest.map_blocks(|l, b| if l == block { m.clone() } else { b * C64::new(scale, 0.0) }))
    }
}

/// A random table on `pairs` lines: a permutation of random lines, each
/// image optionally replaced by its orthocomplement.
pub fn random_line_table<R: Rng + ?Sized>(pairs: usize, rng: &mut R) -> Vec<LinePair> {
    let lines: Vec<CVec> = (0..pairs).map(|_| random_block_vector(2, rng)).collect();
    let mut targets: Vec<usize> = (0..pairs).collect();
    targets.shuffle(rng);
    lines
        .iter()
        .zip(&targets)
        .map(|(f, &t)| {
            let mut to = if rng.random_bool(0.5) { perp(&lines[t]) } else { lines[t].clone() };
            to *= C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
            LinePair {
                from: [f[0], f[1]],
                to: [to[0], to[1]],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{decompose, rng_from_seed, Tolerance};

    fn m2() -> BlockStructure {
        BlockStructure::new(vec![2]).unwrap()
    }

    #[test]
    fn swapping_the_axes_sends_e11_to_e21() {
        let phi = vec![LinePair {
            from: [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            to: [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        }];
        let t = LineTable::build(&m2(), 0, &phi).unwrap();
        let out = t.apply(&Element::matrix_unit(&m2(), 0, 0, 0)).unwrap();
        assert!(out.block(0)[(1, 0)].norm() > 1.0 - 1e-12);
        assert!(out.block(0)[(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn table_must_close_on_itself() {
        let phi = vec![LinePair {
            from: [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            to: [C64::new(1.0, 0.0), C64::new(1.0, 0.0)],
        }];
        assert!(LineTable::build(&m2(), 0, &phi).is_err());
    }

    #[test]
    fn planted_elements_move_their_top_line() {
        let mut rng = rng_from_seed(11);
        let phi = random_line_table(3, &mut rng);
        let t = LineTable::build(&m2(), 0, &phi).unwrap();
        let tol = Tolerance::default();
        for _ in 0..20 {
            let a = t.plant(&mut rng).unwrap();
            let out = t.apply(&a).unwrap();
            let (da, db) = (decompose(&a, &tol), decompose(&out, &tol));
            assert_eq!(da.rank, db.rank);
            assert!((da.norm - db.norm).abs() < 1e-12);
            let line = da.m_left.column(0);
            let expected = t.image(&line);
            assert!(same_line(&expected, &db.m_left.column(0)));
        }
    }
}

//! Block-diagonal complex matrix algebras `M_{n_1} ⊕ … ⊕ M_{n_m}`.
//!
//! Elements are stored block by block; the ambient Hilbert space is
//! `ℂ^N` with `N = Σ n_λ` and block `λ` occupying the coordinate range
//! `offset(λ) .. offset(λ) + n_λ`.

pub(crate) mod frame;
pub mod linalg;
mod io;
pub(crate) mod random;
mod spectral;

pub use frame::{frame_leq, frame_meet, Frame};
pub use io::ElementFile;
pub use random::{
    complex_gaussian, haar_unitary, haar_unitary_with, random_block_vector, random_element,
    random_element_with, rng_from_seed,
};
pub use spectral::{decompose, BlockSvd, SpectralData};

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Shape `(n_1, …, n_m)` of a block-diagonal algebra.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockStructure {
    dims: Vec<usize>,
}

impl BlockStructure {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidStructure("at least one block is required".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidStructure(format!("block {pos} has dimension 0")));
        }
        Ok(Self { dims })
    }

    /// Single full matrix algebra `M_n`.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    /// Parses `"1,2,2"`.
    pub fn parse(text: &str) -> Result<Self> {
        let dims = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad block dimension {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, block: usize) -> usize {
        self.dims[block]
    }

    pub fn ambient_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Number of complex coordinates of an element, `Σ n_λ²`.
    pub fn coordinate_dim(&self) -> usize {
        self.dims.iter().map(|d| d * d).sum()
    }

    pub fn offset(&self, block: usize) -> usize {
        self.dims[..block].iter().sum()
    }

    /// Block containing ambient coordinate `index`.
    pub fn block_of(&self, index: usize) -> usize {
        let mut acc = 0;
        for (lambda, &d) in self.dims.iter().enumerate() {
            acc += d;
            if index < acc {
                return lambda;
            }
        }
        panic!("coordinate {index} outside ambient dimension {acc}");
    }

    /// Embeds a vector of block `block` into the ambient space.
    pub fn embed(&self, block: usize, local: &CVec) -> CVec {
        let mut out = CVec::zeros(self.ambient_dim());
        out.rows_mut(self.offset(block), self.dims[block])
            .copy_from(local);
        out
    }

    /// Coordinates of an ambient vector inside block `block`.
    pub fn restrict(&self, block: usize, v: &CVec) -> CVec {
        v.rows(self.offset(block), self.dims[block]).into_owned()
    }

    /// The block carrying essentially all of `v`, if there is one.
    pub fn block_tag(&self, v: &CVec, tol: f64) -> Option<usize> {
        let mut found = None;
        for lambda in 0..self.num_blocks() {
            if self.restrict(lambda, v).norm() > tol {
                if found.is_some() {
                    return None;
                }
                found = Some(lambda);
            }
        }
        found
    }
}

impl TryFrom<Vec<usize>> for BlockStructure {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<BlockStructure> for Vec<usize> {
    fn from(s: BlockStructure) -> Self {
        s.dims
    }
}

impl fmt::Display for BlockStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Numerical thresholds shared by every decision in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Relative singular-value cutoff for rank and kernels.
    pub eps_rank: f64,
    /// Relative tolerance for norm equalities (top-cluster detection, verdicts).
    pub eps_norm: f64,
    /// Subspace inclusion and intersection tolerance.
    pub eps_frame: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            eps_rank: 1e-10,
            eps_norm: 1e-9,
            eps_frame: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn new(eps_rank: f64, eps_norm: f64, eps_frame: f64) -> Result<Self> {
        let tol = Self {
            eps_rank,
            eps_norm,
            eps_frame,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_rank", self.eps_rank),
            ("eps_norm", self.eps_norm),
            ("eps_frame", self.eps_frame),
        ] {
            if !(v > 0.0 && v < 1e-3) {
                return Err(Error::InvalidTolerance(format!(
                    "{name} = {v} must lie in (0, 1e-3)"
                )));
            }
        }
        Ok(())
    }
}

/// A member of a block-diagonal algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElementFile", into = "ElementFile")]
pub struct Element {
    structure: BlockStructure,
    blocks: Vec<CMat>,
}

fn canonical(z: C64) -> C64 {
    // adding +0.0 maps -0.0 to +0.0 and leaves everything else alone
    C64::new(z.re + 0.0, z.im + 0.0)
}

impl Element {
    /// Checks shapes and finiteness, canonicalizing `-0.0`.
    pub fn validate(structure: &BlockStructure, raw: Vec<CMat>) -> Result<Self> {
        if raw.len() != structure.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} blocks, got {}",
                structure.num_blocks(),
                raw.len()
            )));
        }
        let mut blocks = Vec::with_capacity(raw.len());
        for (lambda, mut b) in raw.into_iter().enumerate() {
            let n = structure.dim(lambda);
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "block {lambda} is {}x{}, expected {n}x{n}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            for row in 0..n {
                for col in 0..n {
                    let z = b[(row, col)];
                    if !z.re.is_finite() || !z.im.is_finite() {
                        return Err(Error::NonFiniteEntry {
                            block: lambda,
                            row,
                            col,
                        });
                    }
                    b[(row, col)] = canonical(z);
                }
            }
            blocks.push(b);
        }
        Ok(Self {
            structure: structure.clone(),
            blocks,
        })
    }

    pub(crate) fn from_blocks_unchecked(structure: &BlockStructure, blocks: Vec<CMat>) -> Self {
        debug_assert_eq!(blocks.len(), structure.num_blocks());
        Self {
            structure: structure.clone(),
            blocks,
        }
    }

    pub fn zeros(structure: &BlockStructure) -> Self {
        let blocks = structure.dims().iter().map(|&n| CMat::zeros(n, n)).collect();
        Self::from_blocks_unchecked(structure, blocks)
    }

    pub fn identity(structure: &BlockStructure) -> Self {
        let blocks = structure
            .dims()
            .iter()
            .map(|&n| CMat::identity(n, n))
            .collect();
        Self::from_blocks_unchecked(structure, blocks)
    }

    /// Builds an element from diagonal entries given in ambient order.
    pub fn diagonal(structure: &BlockStructure, diag: &[C64]) -> Result<Self> {
        if diag.len() != structure.ambient_dim() {
            return Err(Error::ShapeMismatch(format!(
                "diagonal has {} entries, ambient dimension is {}",
                diag.len(),
                structure.ambient_dim()
            )));
        }
        let blocks = (0..structure.num_blocks())
            .map(|l| {
                let off = structure.offset(l);
                CMat::from_diagonal(&CVec::from_column_slice(&diag[off..off + structure.dim(l)]))
            })
            .collect();
        Self::validate(structure, blocks)
    }

    /// Real diagonal element, convenient in tests and fixtures.
    pub fn real_diagonal(structure: &BlockStructure, diag: &[f64]) -> Result<Self> {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diagonal(structure, &d)
    }

    /// Matrix unit `E_{ij}` of block `block` (local indices).
    pub fn matrix_unit(structure: &BlockStructure, block: usize, i: usize, j: usize) -> Self {
        let mut e = Self::zeros(structure);
        e.blocks[block][(i, j)] = ONE;
        e
    }

    /// `ξ ⊗ ζ`, the operator `η ↦ ⟨η, ζ⟩ ξ`, with both vectors local to `block`.
    pub fn rank_one(structure: &BlockStructure, block: usize, xi: &CVec, zeta: &CVec) -> Self {
        let mut e = Self::zeros(structure);
        e.blocks[block] = xi * zeta.adjoint();
        e
    }

    /// `ξ ⊗ ζ` for ambient vectors; both must live in one common block.
    pub fn rank_one_ambient(structure: &BlockStructure, xi: &CVec, zeta: &CVec) -> Result<Self> {
        let tag_xi = structure.block_tag(xi, 1e-12);
        let tag_zeta = structure.block_tag(zeta, 1e-12);
        match (tag_xi, tag_zeta) {
            (Some(a), Some(b)) if a == b => Ok(Self::rank_one(
                structure,
                a,
                &structure.restrict(a, xi),
                &structure.restrict(a, zeta),
            )),
            _ => Err(Error::ShapeMismatch(
                "rank-one factors must share a single block".into(),
            )),
        }
    }

    /// Rank-one projection `E_ξ = ξ ⊗ ξ` for a unit ambient vector in one block.
    pub fn projection_onto(structure: &BlockStructure, xi: &CVec) -> Result<Self> {
        Self::rank_one_ambient(structure, xi, xi)
    }

    /// Block-diagonal part of a dense `N × N` matrix.
    pub fn from_dense(structure: &BlockStructure, dense: &CMat) -> Result<Self> {
        let n = structure.ambient_dim();
        if dense.nrows() != n || dense.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "dense matrix is {}x{}, expected {n}x{n}",
                dense.nrows(),
                dense.ncols()
            )));
        }
        let blocks = (0..structure.num_blocks())
            .map(|l| {
                let off = structure.offset(l);
                let d = structure.dim(l);
                dense.view((off, off), (d, d)).into_owned()
            })
            .collect();
        Self::validate(structure, blocks)
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, lambda: usize) -> &CMat {
        &self.blocks[lambda]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    /// The element as a single `N × N` matrix in `M_N`.
    pub fn to_dense(&self) -> CMat {
        let n = self.structure.ambient_dim();
        let mut out = CMat::zeros(n, n);
        for (l, b) in self.blocks.iter().enumerate() {
            let off = self.structure.offset(l);
            out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        }
        out
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.structure != other.structure {
            return Err(Error::StructureMismatch);
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Result<Self> {
        self.check_same(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| f(a, b))
            .collect();
        Ok(Self::from_blocks_unchecked(&self.structure, blocks))
    }

    pub fn map_blocks(&self, f: impl Fn(usize, &CMat) -> CMat) -> Self {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(l, b)| f(l, b))
            .collect();
        Self::from_blocks_unchecked(&self.structure, blocks)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map_blocks(|_, b| b * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        self.map_blocks(|_, b| b.adjoint())
    }

    pub fn transpose(&self) -> Self {
        self.map_blocks(|_, b| b.transpose())
    }

    /// Entrywise complex conjugate in the standard basis.
    pub fn conjugate(&self) -> Self {
        self.map_blocks(|_, b| b.map(|z| z.conj()))
    }

    /// Applies the element to an ambient vector.
    pub fn apply(&self, v: &CVec) -> CVec {
        let mut out = CVec::zeros(self.structure.ambient_dim());
        for (l, b) in self.blocks.iter().enumerate() {
            let off = self.structure.offset(l);
            let d = b.nrows();
            let part = b * v.rows(off, d);
            out.rows_mut(off, d).copy_from(&part);
        }
        out
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks.iter().map(spectral_norm).collect()
    }

    /// Operator norm, the largest block norm.
    pub fn norm(&self) -> f64 {
        self.block_norms().into_iter().fold(0.0, f64::max)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|z| *z == ZERO))
    }

    /// `max |a_ij − b_ij|`.
    pub fn distance_max(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    /// All coordinates, block by block, row-major.
    pub fn coordinates(&self) -> CVec {
        let mut out = Vec::with_capacity(self.structure.coordinate_dim());
        for b in &self.blocks {
            for r in 0..b.nrows() {
                for c in 0..b.ncols() {
                    out.push(b[(r, c)]);
                }
            }
        }
        CVec::from_vec(out)
    }

    pub fn from_coordinates(structure: &BlockStructure, coords: &CVec) -> Result<Self> {
        if coords.len() != structure.coordinate_dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates given, {} expected",
                coords.len(),
                structure.coordinate_dim()
            )));
        }
        let mut k = 0;
        let mut blocks = Vec::with_capacity(structure.num_blocks());
        for &n in structure.dims() {
            let mut b = CMat::zeros(n, n);
            for r in 0..n {
                for c in 0..n {
                    b[(r, c)] = coords[k];
                    k += 1;
                }
            }
            blocks.push(b);
        }
        Self::validate(structure, blocks)
    }

    /// Norm-one representative with the first nonzero coordinate real-positive.
    pub fn projective_normal_form(&self) -> Option<Self> {
        let norm = self.norm();
        if norm == 0.0 {
            return None;
        }
        let cutoff = 1e-9 * self.max_abs();
        let lead = self
            .blocks
            .iter()
            .flat_map(|b| (0..b.nrows()).flat_map(move |r| (0..b.ncols()).map(move |c| b[(r, c)])))
            .find(|z| z.norm() > cutoff)?;
        let phase = lead.conj() / lead.norm();
        Some(self.scale(phase / norm))
    }

    /// Hash of the coordinates rounded to `quantum`, stable across runs.
    pub fn fingerprint(&self, quantum: f64) -> u64 {
        let mut h = Fnv::new();
        for &d in self.structure.dims() {
            h.write_u64(d as u64);
        }
        for z in self.coordinates().iter() {
            h.write_u64(((z.re / quantum).round() as i64) as u64);
            h.write_u64(((z.im / quantum).round() as i64) as u64);
        }
        h.finish()
    }

    /// Hash of the exact bit pattern of the coordinates.
    pub fn bit_hash(&self) -> u64 {
        let mut h = Fnv::new();
        for &d in self.structure.dims() {
            h.write_u64(d as u64);
        }
        for z in self.coordinates().iter() {
            h.write_u64(z.re.to_bits());
            h.write_u64(z.im.to_bits());
        }
        h.finish()
    }
}

/// Largest singular value of a dense block.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    linalg::singular_values(m).first().copied().unwrap_or(0.0)
}

/// FNV-1a, used for stable fingerprints and per-element seeds.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn finish(self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn validate_identity_m2() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let raw = vec![CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)])];
        let e = Element::validate(&s, raw).unwrap();
        assert_eq!(e, Element::identity(&s));
    }

    #[test]
    fn validate_rejects_wrong_block_count() {
        let s = BlockStructure::new(vec![1, 2]).unwrap();
        let raw = vec![CMat::zeros(1, 1), CMat::zeros(2, 2), CMat::zeros(2, 2)];
        assert!(matches!(
            Element::validate(&s, raw),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn validate_rejects_wrong_block_size() {
        let s = BlockStructure::new(vec![1, 2]).unwrap();
        let raw = vec![CMat::zeros(1, 1), CMat::zeros(3, 3)];
        assert!(matches!(
            Element::validate(&s, raw),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn validate_rejects_nan() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let mut b = CMat::zeros(2, 2);
        b[(1, 0)] = c(f64::NAN, 0.0);
        assert_eq!(
            Element::validate(&s, vec![b]),
            Err(Error::NonFiniteEntry {
                block: 0,
                row: 1,
                col: 0
            })
        );
    }

    #[test]
    fn validate_canonicalizes_negative_zero() {
        let s = BlockStructure::new(vec![1]).unwrap();
        let e = Element::validate(&s, vec![CMat::from_element(1, 1, c(-0.0, -0.0))]).unwrap();
        let z = e.block(0)[(0, 0)];
        assert!(z.re.is_sign_positive() && z.im.is_sign_positive());
    }

    #[test]
    fn structure_rules() {
        assert!(BlockStructure::new(vec![]).is_err());
        assert!(BlockStructure::new(vec![2, 0]).is_err());
        let s = BlockStructure::parse("1, 2,2").unwrap();
        assert_eq!(s.ambient_dim(), 5);
        assert_eq!(s.offset(2), 3);
        assert_eq!(s.block_of(0), 0);
        assert_eq!(s.block_of(2), 1);
        assert_eq!(s.block_of(4), 2);
        assert_eq!(s.coordinate_dim(), 9);
        assert!(BlockStructure::parse("1,x").is_err());
    }

    #[test]
    fn tolerance_bounds() {
        assert!(Tolerance::default().validate().is_ok());
        assert!(Tolerance::new(1e-10, 0.5, 1e-8).is_err());
        assert!(Tolerance::new(0.0, 1e-9, 1e-8).is_err());
    }

    #[test]
    fn dense_round_trip_and_norm() {
        let s = BlockStructure::new(vec![1, 2]).unwrap();
        let a = Element::real_diagonal(&s, &[3.0, -1.0, 2.0]).unwrap();
        assert_eq!(a.norm(), 3.0);
        let back = Element::from_dense(&s, &a.to_dense()).unwrap();
        assert_eq!(a, back);
        let coords = a.coordinates();
        assert_eq!(Element::from_coordinates(&s, &coords).unwrap(), a);
    }

    #[test]
    fn projective_normal_form_removes_phase_and_scale() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let a = Element::matrix_unit(&s, 0, 0, 1).add(&Element::matrix_unit(&s, 0, 1, 1)).unwrap();
        let b = a.scale(c(0.0, -3.0));
        let na = a.projective_normal_form().unwrap();
        let nb = b.projective_normal_form().unwrap();
        assert!(na.distance_max(&nb).unwrap() < 1e-14);
        assert!(Element::zeros(&s).projective_normal_form().is_none());
    }
}

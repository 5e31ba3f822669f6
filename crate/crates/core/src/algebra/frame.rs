use super::{linalg, spectral_norm, BlockStructure, CMat, CVec, Tolerance, C64};
use crate::error::{Error, Result};

const TAG_TOL: f64 = 1e-10;

/// Orthonormal basis of a subspace of the ambient space `ℂ^N`.
///
/// Each column remembers the block it lives in, or `None` when it
/// straddles several blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    structure: BlockStructure,
    columns: CMat,
    tags: Vec<Option<usize>>,
}

impl Frame {
    pub fn empty(structure: &BlockStructure) -> Self {
        Self {
            structure: structure.clone(),
            columns: CMat::zeros(structure.ambient_dim(), 0),
            tags: Vec::new(),
        }
    }

    /// Standard basis of the whole ambient space.
    pub fn full(structure: &BlockStructure) -> Self {
        let n = structure.ambient_dim();
        Self {
            structure: structure.clone(),
            columns: CMat::identity(n, n),
            tags: (0..n).map(|i| Some(structure.block_of(i))).collect(),
        }
    }

    /// Frame from columns already known to be orthonormal.
    pub fn from_orthonormal(structure: &BlockStructure, columns: CMat) -> Self {
        assert_eq!(columns.nrows(), structure.ambient_dim());
        let tags = columns
            .column_iter()
            .map(|c| structure.block_tag(&c.into_owned(), TAG_TOL))
            .collect();
        Self {
            structure: structure.clone(),
            columns,
            tags,
        }
    }

    /// Frame from orthonormal vectors each local to one block.
    pub fn from_block_vectors(structure: &BlockStructure, vectors: &[(usize, CVec)]) -> Self {
        let n = structure.ambient_dim();
        let mut columns = CMat::zeros(n, vectors.len());
        let mut tags = Vec::with_capacity(vectors.len());
        for (j, (lambda, v)) in vectors.iter().enumerate() {
            columns.set_column(j, &structure.embed(*lambda, v));
            tags.push(Some(*lambda));
        }
        Self {
            structure: structure.clone(),
            columns,
            tags,
        }
    }

    /// Orthonormal basis of the span of arbitrary ambient vectors.
    pub fn span(structure: &BlockStructure, vectors: &CMat, tol: &Tolerance) -> Self {
        let n = structure.ambient_dim();
        assert_eq!(vectors.nrows(), n);
        if vectors.ncols() == 0 {
            return Self::empty(structure);
        }
        let scale = spectral_norm(vectors);
        if scale == 0.0 {
            return Self::empty(structure);
        }
        let svd = linalg::svd(vectors);
        let u = svd.u;
        let keep: Vec<usize> = (0..svd.s.len())
            .filter(|&i| svd.s[i] > tol.eps_rank.max(1e-12) * scale)
            .collect();
        let cols: Vec<CVec> = keep.iter().map(|&i| u.column(i).into_owned()).collect();
        let columns = if cols.is_empty() {
            CMat::zeros(n, 0)
        } else {
            CMat::from_columns(&cols)
        };
        Self::from_orthonormal(structure, columns)
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn columns(&self) -> &CMat {
        &self.columns
    }

    pub fn column(&self, j: usize) -> CVec {
        self.columns.column(j).into_owned()
    }

    pub fn tags(&self) -> &[Option<usize>] {
        &self.tags
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    /// Orthogonal projection onto the span.
    pub fn projector(&self) -> CMat {
        &self.columns * self.columns.adjoint()
    }

    /// `‖F*F − I‖`.
    pub fn orthonormality_residual(&self) -> f64 {
        let k = self.dim();
        if k == 0 {
            return 0.0;
        }
        spectral_norm(&(self.columns.adjoint() * &self.columns - CMat::identity(k, k)))
    }

    /// Part of the frame inside block `lambda`.
    ///
    /// Columns tagged `lambda` are kept as they are; mixed columns are
    /// projected into the block and re-orthonormalized.
    pub fn restrict_to_block(&self, lambda: usize, tol: &Tolerance) -> Frame {
        let mut local: Vec<CVec> = Vec::new();
        let mut mixed = false;
        for (j, tag) in self.tags.iter().enumerate() {
            match tag {
                Some(t) if *t == lambda => local.push(self.column(j)),
                Some(_) => {}
                None => {
                    mixed = true;
                    let mut v = CVec::zeros(self.ambient_dim());
                    let part = self.structure.restrict(lambda, &self.column(j));
                    v.rows_mut(self.structure.offset(lambda), part.len())
                        .copy_from(&part);
                    local.push(v);
                }
            }
        }
        if local.is_empty() {
            return Frame::empty(&self.structure);
        }
        let m = CMat::from_columns(&local);
        if !mixed {
            return Frame {
                structure: self.structure.clone(),
                columns: m,
                tags: vec![Some(lambda); local.len()],
            };
        }
        let mut f = Frame::span(&self.structure, &m, tol);
        f.tags = vec![Some(lambda); f.dim()];
        f
    }

    /// Coordinates of the block-`lambda` part of each column, as an
    /// `n_λ × k` matrix (only meaningful after [`Frame::restrict_to_block`]).
    pub fn local_columns(&self, lambda: usize) -> CMat {
        let off = self.structure.offset(lambda);
        self.columns
            .view((off, 0), (self.structure.dim(lambda), self.dim()))
            .into_owned()
    }

    /// Residual of `v` after projecting onto the span.
    pub fn residual_of(&self, v: &CVec) -> CVec {
        if self.is_empty() {
            return v.clone();
        }
        v - &self.columns * (self.columns.adjoint() * v)
    }
}

fn check_ambient(f: &Frame, g: &Frame) -> Result<()> {
    if f.ambient_dim() != g.ambient_dim() {
        return Err(Error::AmbientMismatch(f.ambient_dim(), g.ambient_dim()));
    }
    Ok(())
}

/// `span F ⊆ span G` within `eps_frame`: `‖(I − P_G) F‖ ≤ eps_frame`.
pub fn frame_leq(f: &Frame, g: &Frame, tol: &Tolerance) -> Result<bool> {
    check_ambient(f, g)?;
    Ok(inclusion_residual(f, g) <= tol.eps_frame)
}

pub(crate) fn inclusion_residual(f: &Frame, g: &Frame) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    let residual = if g.is_empty() {
        f.columns.clone()
    } else {
        &f.columns - &g.columns * (g.columns.adjoint() * &f.columns)
    };
    spectral_norm(&residual)
}

/// Largest principal-angle cosine between two frames and the principal
/// vector of `F` realizing it.
pub(crate) fn principal_cosine(f: &Frame, g: &Frame) -> (f64, Option<CVec>) {
    if f.is_empty() || g.is_empty() {
        return (0.0, None);
    }
    let cross = f.columns.adjoint() * &g.columns;
    let svd = linalg::svd(&cross);
    let u = svd.u;
    let (best, s1) = svd
        .s
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    let mut v = &f.columns * u.column(best);
    let norm = v.norm();
    if norm == 0.0 {
        return (s1, None);
    }
    v /= C64::new(norm, 0.0);
    (s1, Some(v))
}

/// A unit vector in `F ∩ G`, if the largest principal cosine reaches
/// `1 − eps_frame`.
pub fn frame_meet(f: &Frame, g: &Frame, tol: &Tolerance) -> Result<Option<CVec>> {
    check_ambient(f, g)?;
    let (cos, v) = principal_cosine(f, g);
    Ok(if cos >= 1.0 - tol.eps_frame { v } else { None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize) -> CVec {
        let mut v = CVec::zeros(n);
        v[i] = C64::new(1.0, 0.0);
        v
    }

    fn frame(s: &BlockStructure, vs: &[CVec]) -> Frame {
        Frame::span(s, &CMat::from_columns(vs), &Tolerance::default())
    }

    #[test]
    fn leq_examples() {
        let tol = Tolerance::default();
        let s = BlockStructure::new(vec![3]).unwrap();
        let e1 = frame(&s, &[e(3, 0)]);
        let e2 = frame(&s, &[e(3, 1)]);
        let e12 = frame(&s, &[e(3, 0), e(3, 1)]);
        assert!(frame_leq(&e1, &e12, &tol).unwrap());
        assert!(!frame_leq(&e1, &e2, &tol).unwrap());
        let diag = frame(&s, &[(e(3, 0) + e(3, 1)) * C64::new(0.5f64.sqrt(), 0.0)]);
        assert!(!frame_leq(&diag, &e1, &tol).unwrap());
        // residual is exactly 1/sqrt(2)
        assert!((inclusion_residual(&diag, &e1) - 0.5f64.sqrt()).abs() < 1e-14);
        assert!(frame_leq(&Frame::empty(&s), &e1, &tol).unwrap());
    }

    #[test]
    fn meet_examples() {
        let tol = Tolerance::default();
        let s = BlockStructure::new(vec![3]).unwrap();
        let f = frame(&s, &[e(3, 0), e(3, 1)]);
        let g = frame(&s, &[e(3, 1), e(3, 2)]);
        let v = frame_meet(&f, &g, &tol).unwrap().unwrap();
        assert!((v[1].norm() - 1.0).abs() < 1e-12);
        assert!(v[0].norm() < 1e-12 && v[2].norm() < 1e-12);
        let a = frame(&s, &[e(3, 0)]);
        let b = frame(&s, &[e(3, 1)]);
        assert!(frame_meet(&a, &b, &tol).unwrap().is_none());
        let w = frame_meet(&f, &f, &tol).unwrap().unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-12);
        assert!(f.residual_of(&w).norm() < 1e-12);
    }

    #[test]
    fn ambient_mismatch() {
        let tol = Tolerance::default();
        let a = Frame::full(&BlockStructure::new(vec![2]).unwrap());
        let b = Frame::full(&BlockStructure::new(vec![3]).unwrap());
        assert_eq!(frame_leq(&a, &b, &tol), Err(Error::AmbientMismatch(2, 3)));
        assert_eq!(frame_meet(&a, &b, &tol), Err(Error::AmbientMismatch(2, 3)));
    }

    #[test]
    fn tags_and_restriction() {
        let tol = Tolerance::default();
        let s = BlockStructure::new(vec![1, 2]).unwrap();
        let full = Frame::full(&s);
        assert_eq!(full.tags(), &[Some(0), Some(1), Some(1)]);
        let mixed = frame(&s, &[(e(3, 0) + e(3, 2)) * C64::new(0.5f64.sqrt(), 0.0)]);
        assert_eq!(mixed.tags(), &[None]);
        let r = mixed.restrict_to_block(1, &tol);
        assert_eq!(r.dim(), 1);
        assert_eq!(r.tags(), &[Some(1)]);
        assert!((r.column(0)[2].norm() - 1.0).abs() < 1e-12);
        assert!(r.orthonormality_residual() < 1e-12);
    }
}

use super::{linalg, BlockStructure, CMat, CVec, Element, Frame, Tolerance, C64};

/// Singular value decomposition of one block, `A_λ = U diag(s) V*`,
/// with `s` nonincreasing and `U`, `V` square.
#[derive(Clone, Debug)]
pub struct BlockSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl BlockSvd {
    pub fn new(block: &CMat) -> Self {
        let linalg::Svd { u, s, v } = linalg::svd(block);
        Self { u, s, v }
    }

    fn reassemble(&self, values: impl Fn(usize, f64) -> f64, left: &CMat, right: &CMat) -> CMat {
        let n = self.s.len();
        let mut d = CMat::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = C64::new(values(i, self.s[i]), 0.0);
        }
        left * d * right.adjoint()
    }
}

/// Everything the orthogonality deciders need to know about one element.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub structure: BlockStructure,
    /// Operator norm `σ₁`.
    pub norm: f64,
    /// Number of singular values above `eps_rank · σ₁`.
    pub rank: usize,
    /// Size of the top singular cluster (all of `N` for the zero element).
    pub top_mult: usize,
    /// `M_A`, the norm-attaining subspace (top right-singular vectors).
    pub m_right: Frame,
    /// `M_{|A*|} = A·M_A` (top left-singular vectors).
    pub m_left: Frame,
    /// `ker A* = ker |A*|`.
    pub ker_left: Frame,
    /// `R(A)`.
    pub range: Frame,
    pub block_norms: Vec<f64>,
    /// Blocks with `A_λ ≠ 0`.
    pub support: Vec<usize>,
    /// Per-block singular values, nonincreasing.
    pub singulars: Vec<Vec<f64>>,
    /// Per-block count of singular values in the top cluster.
    pub top_counts: Vec<usize>,
    /// Per-block numerical rank.
    pub block_ranks: Vec<usize>,
    pub svds: Vec<BlockSvd>,
}

/// Blockwise SVD plus the derived frames.
///
/// The top cluster is every singular value `σ ≥ (1 − eps_norm)·σ₁`; the
/// rank cutoff is `σ > eps_rank·σ₁`. The zero element gets
/// `M_0 = ℂ^N`, `ker 0* = ℂ^N` and an empty range.
pub fn decompose(a: &Element, tol: &Tolerance) -> SpectralData {
    let structure = a.structure().clone();
    let svds: Vec<BlockSvd> = a.blocks().iter().map(BlockSvd::new).collect();
    let block_norms: Vec<f64> = svds
        .iter()
        .map(|d| d.s.first().copied().unwrap_or(0.0))
        .collect();
    let norm = block_norms.iter().copied().fold(0.0, f64::max);
    let singulars: Vec<Vec<f64>> = svds.iter().map(|d| d.s.clone()).collect();

    if norm == 0.0 {
        let m = structure.num_blocks();
        return SpectralData {
            m_right: Frame::full(&structure),
            m_left: Frame::full(&structure),
            ker_left: Frame::full(&structure),
            range: Frame::empty(&structure),
            top_mult: structure.ambient_dim(),
            rank: 0,
            norm,
            block_norms,
            support: Vec::new(),
            singulars,
            top_counts: structure.dims().to_vec(),
            block_ranks: vec![0; m],
            svds,
            structure,
        };
    }

    let top_cut = (1.0 - tol.eps_norm) * norm;
    let rank_cut = tol.eps_rank * norm;
    let mut top_left = Vec::new();
    let mut top_right = Vec::new();
    let mut kernel = Vec::new();
    let mut range = Vec::new();
    let mut top_counts = Vec::with_capacity(svds.len());
    let mut block_ranks = Vec::with_capacity(svds.len());
    let mut support = Vec::new();
    for (lambda, d) in svds.iter().enumerate() {
        let mut top = 0;
        let mut rank = 0;
        for (i, &s) in d.s.iter().enumerate() {
            if s >= top_cut {
                top += 1;
                top_left.push((lambda, d.u.column(i).into_owned()));
                top_right.push((lambda, d.v.column(i).into_owned()));
            }
            if s > rank_cut {
                rank += 1;
                range.push((lambda, d.u.column(i).into_owned()));
            } else {
                kernel.push((lambda, d.u.column(i).into_owned()));
            }
        }
        if rank > 0 {
            support.push(lambda);
        }
        top_counts.push(top);
        block_ranks.push(rank);
    }
    SpectralData {
        norm,
        rank: block_ranks.iter().sum(),
        top_mult: top_left.len(),
        m_right: Frame::from_block_vectors(&structure, &top_right),
        m_left: Frame::from_block_vectors(&structure, &top_left),
        ker_left: Frame::from_block_vectors(&structure, &kernel),
        range: Frame::from_block_vectors(&structure, &range),
        block_norms,
        support,
        singulars,
        top_counts,
        block_ranks,
        svds,
        structure,
    }
}

impl SpectralData {
    pub fn is_zero(&self) -> bool {
        self.norm == 0.0
    }

    /// Blocks whose norm lies in the top cluster.
    pub fn norm_achieving_blocks(&self) -> Vec<usize> {
        if self.is_zero() {
            return (0..self.structure.num_blocks()).collect();
        }
        (0..self.structure.num_blocks())
            .filter(|&l| self.top_counts[l] > 0)
            .collect()
    }

    fn assemble(&self, f: impl Fn(&BlockSvd, usize) -> CMat) -> Element {
        let blocks = self
            .svds
            .iter()
            .enumerate()
            .map(|(l, d)| f(d, self.block_ranks[l]))
            .collect();
        Element::from_blocks_unchecked(&self.structure, blocks)
    }

    /// `|A*| = (AA*)^{1/2} = U Σ U*`.
    pub fn abs_adjoint(&self) -> Element {
        self.assemble(|d, _| d.reassemble(|_, s| s, &d.u, &d.u))
    }

    /// `|A| = (A*A)^{1/2} = V Σ V*`.
    pub fn abs(&self) -> Element {
        self.assemble(|d, _| d.reassemble(|_, s| s, &d.v, &d.v))
    }

    /// Moore–Penrose pseudo-inverse with the rank cutoff, `V Σ⁺ U*`.
    pub fn pseudo_inverse(&self) -> Element {
        self.assemble(|d, r| {
            d.reassemble(|i, s| if i < r { 1.0 / s } else { 0.0 }, &d.v, &d.u)
        })
    }

    /// Orthogonal projection onto `R(A)`, as an element.
    pub fn range_projector(&self) -> Element {
        self.assemble(|d, r| d.reassemble(|i, _| if i < r { 1.0 } else { 0.0 }, &d.u, &d.u))
    }

    /// For a unit `ξ ∈ M_{|A*|}`, the unit `ζ ∈ M_A` with `Aζ = ‖A‖ξ`
    /// (up to the cluster width).
    pub fn top_preimage(&self, xi: &CVec) -> CVec {
        let n = self.structure.ambient_dim();
        let mut out = CVec::zeros(n);
        for lambda in 0..self.structure.num_blocks() {
            let d = &self.svds[lambda];
            let local = self.structure.restrict(lambda, xi);
            let mut acc = CVec::zeros(d.s.len());
            for i in 0..self.top_counts[lambda].min(d.s.len()) {
                let coeff = d.u.column(i).dotc(&local);
                acc += d.v.column(i) * coeff;
            }
            out.rows_mut(self.structure.offset(lambda), acc.len())
                .copy_from(&acc);
        }
        let norm = out.norm();
        if norm > 0.0 {
            out /= C64::new(norm, 0.0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{frame_leq, haar_unitary, random_element};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn diag_3_1() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let a = Element::real_diagonal(&s, &[3.0, 1.0]).unwrap();
        let d = decompose(&a, &tol());
        assert!((d.norm - 3.0).abs() < 1e-14);
        assert_eq!(d.rank, 2);
        assert_eq!(d.top_mult, 1);
        assert_eq!(d.m_left.dim(), 1);
        assert!((d.m_left.column(0)[0].norm() - 1.0).abs() < 1e-14);
        assert!(d.ker_left.is_empty());
        assert_eq!(d.support, vec![0]);
    }

    #[test]
    fn unitary_top_cluster_is_everything() {
        let s = BlockStructure::new(vec![2]).unwrap();
        for seed in 0..10 {
            let d = decompose(&haar_unitary(&s, seed), &tol());
            assert_eq!(d.top_mult, 2);
            assert_eq!(d.rank, 2);
            assert_eq!(d.m_left.dim(), 2);
        }
    }

    #[test]
    fn zero_conventions() {
        let s = BlockStructure::new(vec![1, 2]).unwrap();
        let d = decompose(&Element::zeros(&s), &tol());
        assert_eq!(d.norm, 0.0);
        assert_eq!(d.rank, 0);
        assert_eq!(d.m_left.dim(), 3);
        assert_eq!(d.m_right.dim(), 3);
        assert_eq!(d.ker_left.dim(), 3);
        assert!(d.range.is_empty());
        assert!(d.support.is_empty());
    }

    #[test]
    fn invariants_on_random_elements() {
        let s = BlockStructure::new(vec![1, 3, 2]).unwrap();
        for seed in 0..30 {
            let rank = if seed % 2 == 0 { Some((seed as usize) % 6 + 1) } else { None };
            let a = random_element(&s, seed, rank).unwrap();
            let d = decompose(&a, &tol());
            let max_block = d.block_norms.iter().copied().fold(0.0, f64::max);
            assert_eq!(d.norm, max_block);
            assert_eq!(d.m_left.dim(), d.top_mult);
            assert_eq!(d.m_right.dim(), d.top_mult);
            assert!(d.top_mult >= 1);
            assert_eq!(d.range.dim() + d.ker_left.dim(), s.ambient_dim());
            let cross = d.m_left.columns().adjoint() * d.ker_left.columns();
            assert!(cross.iter().all(|z| z.norm() < 1e-12));
            // A·M_A = M_{|A*|}
            for j in 0..d.m_right.dim() {
                let image = a.apply(&d.m_right.column(j)) / C64::new(d.norm, 0.0);
                assert!(d.m_left.residual_of(&image).norm() < 1e-10);
            }
            if let Some(r) = rank {
                assert_eq!(d.rank, r);
            }
        }
    }

    #[test]
    fn pseudo_inverse_and_range_projector() {
        let s = BlockStructure::new(vec![3]).unwrap();
        let a = random_element(&s, 4, Some(2)).unwrap();
        let d = decompose(&a, &tol());
        let p = d.range_projector();
        let ap = a.mul(&d.pseudo_inverse()).unwrap();
        assert!(ap.distance_max(&p).unwrap() < 1e-10);
        let ab = d.abs_adjoint();
        let sq = ab.mul(&ab).unwrap();
        assert!(sq.distance_max(&a.mul(&a.adjoint()).unwrap()).unwrap() < 1e-10);
        let range = decompose(&p, &tol()).range;
        assert!(frame_leq(&range, &d.range, &tol()).unwrap());
    }

    #[test]
    fn top_preimage_maps_to_top_vector() {
        let s = BlockStructure::new(vec![2, 3]).unwrap();
        let a = random_element(&s, 9, None).unwrap();
        let d = decompose(&a, &tol());
        let xi = d.m_left.column(0);
        let zeta = d.top_preimage(&xi);
        let image = a.apply(&zeta);
        assert!((image - xi * C64::new(d.norm, 0.0)).norm() < 1e-10);
    }
}

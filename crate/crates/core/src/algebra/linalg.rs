//! Dense decompositions, backed by faer.
//!
//! nalgebra's complex SVD can return singular vectors that do not
//! reconstruct the input on rank-deficient blocks, so every SVD and
//! eigenvalue computation in the crate goes through here.

use faer::Mat;

use super::{CMat, C64};

/// Full SVD `m = u diag(s) v*` with `s` nonincreasing, `u` and `v` square.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

fn to_faer(m: &CMat) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn svd(m: &CMat) -> Svd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Svd {
            u: CMat::identity(rows, rows),
            s: Vec::new(),
            v: CMat::identity(cols, cols),
        };
    }
    let f = to_faer(m);
    let d = f.svd().expect("SVD converges on finite input");
    let (u, v, s) = (d.U(), d.V(), d.S().column_vector());
    let k = rows.min(cols);
    let mut order: Vec<usize> = (0..k).collect();
    let sv: Vec<f64> = (0..k).map(|i| s[i].re.max(0.0)).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let pick = |i: usize, n: usize| if i < k { order[i] } else { i.min(n - 1) };
    Svd {
        u: CMat::from_fn(rows, rows, |i, j| u[(i, pick(j, rows))]),
        s: order.iter().map(|&i| sv[i]).collect(),
        v: CMat::from_fn(cols, cols, |i, j| v[(i, pick(j, cols))]),
    }
}

/// Singular values, nonincreasing.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = to_faer(m)
        .singular_values()
        .expect("SVD converges on finite input")
        .into_iter()
        .map(|x| x.max(0.0))
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigenvalues of a square matrix, in no particular order.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.is_empty() {
        return Vec::new();
    }
    to_faer(m).eigenvalues().expect("eigenvalues converge on finite input")
}

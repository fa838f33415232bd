use nalgebra::DMatrix;

use super::{kmeans, AffinityMatrix, ClusterLabels, KMEANS_RESTARTS};
use crate::error::{Error, Result};

use crate::linalg::{sym_eigen_desc, Tridiagonal};

/// Eigenvalues within `TIE_TOL · max(1, |λ₁|)` of `λ_K` count as tied with it.
pub const TIE_TOL: f64 = 1e-9;

/// Row-normalized leading eigenvectors of `D^{-1/2} W D^{-1/2}`.
///
/// Takes the top `k` eigenvectors, plus any further eigenvectors whose
/// eigenvalue ties with the `k`-th: when the eigenspace is degenerate (for
/// example a graph with more than `k` components) a `k`-column slice of it
/// would be an arbitrary rotation. Zero-degree rows are treated as degree 1
/// and zero embedding rows stay zero.
pub fn spectral_embedding(w: &AffinityMatrix, k: usize) -> Result<DMatrix<f64>> {
    let n = w.len();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} must be in 1..={n}")));
    }
    let scale: Vec<f64> = w
        .degrees()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 })
        .collect();
    let m = w.matrix();
    let normalized = DMatrix::from_fn(n, n, |i, j| scale[i] * m[(i, j)] * scale[j]);
    let t = Tridiagonal::new(&normalized);
    let values = t.top_eigenvalues(k, TIE_TOL);
    let mut u = t.eigenvectors(&values);
    if !is_eigenbasis(&normalized, &u, &values) {
        u = sym_eigen_desc(&normalized)?.1.columns(0, values.len()).into_owned();
    }
    // Sign convention: the largest-magnitude entry of each column is positive.
    for mut col in u.column_iter_mut() {
        let pivot = col
            .iter()
            .copied()
            .fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
    for mut row in u.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(u)
}

/// Whether the columns of `u` are orthonormal eigenvectors of `m` for
/// `values`, to a tolerance well inside what the embedding needs.
fn is_eigenbasis(m: &DMatrix<f64>, u: &DMatrix<f64>, values: &[f64]) -> bool {
    const TOL: f64 = 1e-9;
    let scale = values.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let mu = m * u;
    let residual_ok = values
        .iter()
        .enumerate()
        .all(|(c, &l)| (mu.column(c) - u.column(c) * l).norm() <= TOL * scale);
    let gram = u.tr_mul(u);
    let orthonormal = gram.iter().enumerate().all(|(idx, g)| {
        let (r, c) = (idx % gram.nrows(), idx / gram.nrows());
        (g - if r == c { 1.0 } else { 0.0 }).abs() <= TOL
    });
    residual_ok && orthonormal
}

/// Normalized spectral clustering: [`spectral_embedding`] followed by
/// k-means on its rows.
pub fn spectral_cluster(w: &AffinityMatrix, k: usize, seed: u64) -> Result<ClusterLabels> {
    let u = spectral_embedding(w, k)?;
    Ok(kmeans(&u, k, seed, KMEANS_RESTARTS)?.labels)
}

//! Grassmannian `G(p, ℓ)` of ℓ-dimensional subspaces of `R^p`.
//!
//! A point is stored as a `p × ℓ` matrix `X` with orthonormal columns; any
//! `XR` with `R ∈ O(ℓ)` names the same subspace. Tangent vectors at `X` are
//! horizontal matrices `Δ` with `XᵀΔ = 0` and the Frobenius inner product.
//!
//! ```text
//! log_X(Y):  M = (I − XXᵀ) Y (XᵀY)⁻¹,  M = UΣVᵀ,  log = U atan(Σ) Vᵀ
//!            (evaluated through the principal vectors of XᵀY, which gives
//!            the same U and atan(Σ) = θ)
//! exp_X(Δ):  Δ = UΣVᵀ,  Y = X V cos(Σ) Vᵀ + U sin(Σ) Vᵀ
//! dist(X,Y) = ‖θ‖₂ over the principal angles θ
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::orthonormalize;

/// Smallest singular value of `XᵀY` below which `Y` is in the cut locus of `X`.
pub const CUT_LOCUS_TOL: f64 = 1e-12;

/// Principal vectors of a pair of subspaces: `XᵀY = A diag(c) Bᵀ`, plus the
/// components of `Y b_k` orthogonal to `span(X)` (column `k` of `ux`, norm
/// `sin θ_k`) and of `X a_k` orthogonal to `span(Y)` (`uy`).
struct Principal {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    cos: Vec<f64>,
    ux: DMatrix<f64>,
    uy: DMatrix<f64>,
}

impl Principal {
    fn new(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        let svd = (x.transpose() * y).svd(true, true);
        let a = svd.u.ok_or(Error::EigenFailure)?;
        let b = svd.v_t.ok_or(Error::EigenFailure)?.transpose();
        let cos: Vec<f64> = svd.singular_values.iter().map(|c| c.min(1.0)).collect();
        let xa = x * &a;
        let yb = y * &b;
        let mut ux = yb.clone();
        let mut uy = xa.clone();
        for (k, &c) in cos.iter().enumerate() {
            ux.column_mut(k).axpy(-c, &xa.column(k), 1.0);
            uy.column_mut(k).axpy(-c, &yb.column(k), 1.0);
        }
        Ok(Self { a, b, cos, ux, uy })
    }

    /// Principal angle `k`, from the sine and cosine together so that tiny
    /// and near-π/2 angles both keep full accuracy.
    fn angle(&self, k: usize) -> f64 {
        self.ux.column(k).norm().atan2(self.cos[k])
    }

    fn on_cut_locus(&self) -> bool {
        self.cos.iter().any(|&c| c < CUT_LOCUS_TOL)
    }

    /// `Σ_k θ_k û_k frameᵀ_k` with `û_k` the normalized columns of `u`.
    fn tangent(&self, u: &DMatrix<f64>, frame: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(u.nrows(), frame.nrows());
        for k in 0..self.cos.len() {
            let s = u.column(k).norm();
            if s > 0.0 {
                let theta = self.angle(k);
                out.ger(theta / s, &u.column(k), &frame.column(k), 1.0);
            }
        }
        out
    }
}

pub(crate) fn log(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let pr = Principal::new(x, y)?;
    if pr.on_cut_locus() {
        return Err(Error::CutLocus);
    }
    Ok(pr.tangent(&pr.ux, &pr.a))
}

/// `(log_X(Y), log_Y(X))` from one decomposition.
pub(crate) fn log_pair(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let pr = Principal::new(x, y)?;
    if pr.on_cut_locus() {
        return Err(Error::CutLocus);
    }
    Ok((pr.tangent(&pr.ux, &pr.a), pr.tangent(&pr.uy, &pr.b)))
}

/// Principal angles between the column spaces of `x` and `y`, ascending
/// order not guaranteed.
pub(crate) fn principal_angles(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Vec<f64>> {
    let pr = Principal::new(x, y)?;
    Ok((0..pr.cos.len()).map(|k| pr.angle(k)).collect())
}

/// Norm of the principal angles; defined on the cut locus as well.
pub(crate) fn distance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    Ok(principal_angles(x, y)?.iter().map(|t| t * t).sum::<f64>().sqrt())
}

pub(crate) fn exp(x: &DMatrix<f64>, delta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if delta.norm() == 0.0 {
        return Ok(x.clone());
    }
    let svd = delta.clone().svd(true, true);
    let u = svd.u.ok_or(Error::EigenFailure)?;
    let v_t = svd.v_t.ok_or(Error::EigenFailure)?;
    let v = v_t.transpose();
    let l = x.ncols();
    let mut cos = DMatrix::zeros(l, l);
    let mut sin = DMatrix::zeros(l, l);
    for (k, s) in svd.singular_values.iter().enumerate() {
        cos[(k, k)] = s.cos();
        sin[(k, k)] = s.sin();
    }
    let y = x * &v * cos * &v_t + u * sin * &v_t;
    Ok(orthonormalize(&y))
}

pub(crate) fn project(x: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    w - x * (x.transpose() * w)
}

pub(crate) fn tangency_residual(x: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    (x.transpose() * v).norm()
}

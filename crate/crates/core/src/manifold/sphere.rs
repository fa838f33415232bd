//! Unit sphere `S^D ⊂ R^{D+1}`.
//!
//! Points are unit column vectors; tangent vectors at `x` are vectors `v` with
//! `xᵀv = 0`, measured with the Euclidean inner product.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `|xᵀy + 1|` below this is treated as antipodal.
pub const CUT_LOCUS_TOL: f64 = 1e-12;

pub(crate) fn log(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dot = x.dot(y).clamp(-1.0, 1.0);
    if (dot + 1.0).abs() < CUT_LOCUS_TOL {
        return Err(Error::CutLocus);
    }
    let u = y - x * dot;
    let nu = u.norm();
    if nu == 0.0 {
        return Ok(DMatrix::zeros(x.nrows(), 1));
    }
    // atan2 keeps full relative accuracy for both tiny and near-π angles;
    // for tiny angles theta / nu -> 1 without cancellation.
    let theta = nu.atan2(dot);
    Ok(u * (theta / nu))
}

/// `log_x(y)` into `fwd` and `log_y(x)` into `back`, on raw coordinates.
pub(crate) fn log_pair_into(x: &[f64], y: &[f64], fwd: &mut [f64], back: &mut [f64]) -> Result<()> {
    let dot = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0);
    if (dot + 1.0).abs() < CUT_LOCUS_TOL {
        return Err(Error::CutLocus);
    }
    for k in 0..x.len() {
        fwd[k] = y[k] - x[k] * dot;
        back[k] = x[k] - y[k] * dot;
    }
    // Both residuals have norm sin θ; take it from the forward one.
    let nu = fwd.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if nu == 0.0 { 0.0 } else { nu.atan2(dot) / nu };
    fwd.iter_mut().chain(back.iter_mut()).for_each(|v| *v *= scale);
    Ok(())
}

pub(crate) fn distance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let dot = x.dot(y).clamp(-1.0, 1.0);
    if (dot + 1.0).abs() < CUT_LOCUS_TOL {
        return std::f64::consts::PI;
    }
    let u = y - x * dot;
    u.norm().atan2(dot)
}

pub(crate) fn exp(x: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let t = v.norm();
    if t == 0.0 {
        return x.clone();
    }
    let y = x * t.cos() + v * (t.sin() / t);
    let n = y.norm();
    y / n
}

pub(crate) fn project(x: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    w - x * x.dot(w)
}

pub(crate) fn tangency_residual(x: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    x.dot(v).abs()
}

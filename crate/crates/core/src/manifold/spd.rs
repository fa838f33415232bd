//! Symmetric positive-definite matrices with the affine-invariant metric.
//!
//! ```text
//! log_M(N) = M^{1/2} logm(M^{-1/2} N M^{-1/2}) M^{1/2}
//! exp_M(V) = M^{1/2} expm(M^{-1/2} V M^{-1/2}) M^{1/2}
//! ‖V‖_M    = ‖M^{-1/2} V M^{-1/2}‖_F
//! ```
//!
//! The whitened matrix `M^{-1/2} V M^{-1/2}` is used as the isometric
//! coordinate representation of a tangent vector.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{sym_compose, sym_eigen_desc, symmetrize};

/// Square root and inverse square root of a base point.
#[derive(Debug, Clone)]
pub(crate) struct SpdFrame {
    pub sqrt: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
}

impl SpdFrame {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let (values, vectors) = sym_eigen_desc(m)?;
        if values.last().is_none_or(|&l| l <= 0.0) {
            return Err(Error::InvalidPoint("matrix is not positive definite".into()));
        }
        Ok(Self {
            sqrt: sym_compose(&values, &vectors, f64::sqrt),
            inv_sqrt: sym_compose(&values, &vectors, |l| 1.0 / l.sqrt()),
        })
    }

    /// Whitened log: `logm(M^{-1/2} N M^{-1/2})`.
    pub fn log_whitened(&self, n: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let w = symmetrize(&(&self.inv_sqrt * n * &self.inv_sqrt));
        let (values, vectors) = sym_eigen_desc(&w)?;
        if values.last().is_none_or(|&l| l <= 0.0) {
            return Err(Error::InvalidPoint("target is not positive definite".into()));
        }
        Ok(sym_compose(&values, &vectors, f64::ln))
    }

    /// Whitened logs in both directions, `(logm(W_M N W_M), logm(W_N M W_N))`
    /// with `W = (·)^{-1/2}`, from a single eigendecomposition: if
    /// `W_M N W_M = V Λ Vᵀ` and `U = W_N M^{1/2}`, then `W_N M W_N = UUᵀ` has
    /// eigenvectors `U v_k` and eigenvalues `1/λ_k`.
    pub fn log_pair(&self, other: &SpdFrame, n: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let w = symmetrize(&(&self.inv_sqrt * n * &self.inv_sqrt));
        let (values, vectors) = sym_eigen_desc(&w)?;
        if values.last().is_none_or(|&l| l <= 0.0) {
            return Err(Error::InvalidPoint("target is not positive definite".into()));
        }
        let forward = sym_compose(&values, &vectors, f64::ln);
        let mut back_vectors = &other.inv_sqrt * &self.sqrt * &vectors;
        for mut col in back_vectors.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        let backward = sym_compose(&values, &back_vectors, |l| -l.ln());
        Ok((forward, backward))
    }

    pub fn whiten(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.inv_sqrt * v * &self.inv_sqrt))
    }

    pub fn unwhiten(&self, l: &DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&(&self.sqrt * l * &self.sqrt))
    }

    pub fn exp(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let l = self.whiten(v);
        let (values, vectors) = sym_eigen_desc(&l)?;
        let e = sym_compose(&values, &vectors, f64::exp);
        Ok(self.unwhiten(&e))
    }
}

pub(crate) fn project(w: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(w)
}

pub(crate) fn tangency_residual(v: &DMatrix<f64>) -> f64 {
    (v - v.transpose()).norm()
}

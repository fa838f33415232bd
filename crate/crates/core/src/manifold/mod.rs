//! Points, tangent vectors and the exponential/logarithm maps on the three
//! supported manifolds: the unit sphere, the Grassmannian and the cone of
//! symmetric positive-definite matrices.
//!
//! Every point is stored in an ambient matrix representation:
//!
//! | manifold            | ambient shape | tangent condition |
//! |---------------------|---------------|-------------------|
//! | `Sphere { dim: D }` | `(D+1) × 1`   | `xᵀv = 0`         |
//! | `Grassmannian{p,l}` | `p × l`       | `XᵀΔ = 0`         |
//! | `Spd { p }`         | `p × p`       | `V = Vᵀ`          |
//!
//! Tangent vectors also have *coordinates*: a flat row-major vector in which
//! the Euclidean norm equals the Riemannian norm. For the sphere and the
//! Grassmannian these are the ambient entries; for SPD they are the entries of
//! the whitened matrix `M^{-1/2} V M^{-1/2}`. Local covariances and angles are
//! computed in coordinates.

mod grassmann;
mod spd;
mod sphere;

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{flatten_row_major, orthonormalize, sym_eigen_desc, symmetrize, unflatten_row_major};

pub use grassmann::CUT_LOCUS_TOL as GRASSMANN_CUT_LOCUS_TOL;
pub use sphere::CUT_LOCUS_TOL as SPHERE_CUT_LOCUS_TOL;

/// Tolerance used by [`validate`].
pub const VALIDATION_TOL: f64 = 1e-10;

/// Tolerance for the tangency check in [`exp_map`], relative to `max(1, ‖v‖)`.
pub const TANGENCY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldId {
    /// Unit sphere `S^dim` in `R^{dim+1}`.
    Sphere { dim: usize },
    /// `l`-dimensional subspaces of `R^p`.
    Grassmannian { p: usize, l: usize },
    /// `p × p` symmetric positive-definite matrices.
    Spd { p: usize },
}

impl ManifoldId {
    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            ManifoldId::Sphere { dim } => dim >= 1,
            ManifoldId::Grassmannian { p, l } => l >= 1 && l < p,
            ManifoldId::Spd { p } => p >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidManifold(self.to_string()))
        }
    }

    /// Shape of the ambient matrix representation.
    pub fn ambient_shape(&self) -> (usize, usize) {
        match *self {
            ManifoldId::Sphere { dim } => (dim + 1, 1),
            ManifoldId::Grassmannian { p, l } => (p, l),
            ManifoldId::Spd { p } => (p, p),
        }
    }

    /// Length of the flattened coordinate vector of a tangent vector.
    pub fn coord_len(&self) -> usize {
        let (r, c) = self.ambient_shape();
        r * c
    }

    /// Intrinsic dimension of the manifold.
    pub fn dim(&self) -> usize {
        match *self {
            ManifoldId::Sphere { dim } => dim,
            ManifoldId::Grassmannian { p, l } => l * (p - l),
            ManifoldId::Spd { p } => p * (p + 1) / 2,
        }
    }

    fn same_as(&self, other: &ManifoldId) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ManifoldMismatch(*self, *other))
        }
    }
}

impl fmt::Display for ManifoldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ManifoldId::Sphere { dim } => write!(f, "sphere({dim})"),
            ManifoldId::Grassmannian { p, l } => write!(f, "grassmannian({p},{l})"),
            ManifoldId::Spd { p } => write!(f, "spd({p})"),
        }
    }
}

/// A point on one of the supported manifolds.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    manifold: ManifoldId,
    data: DMatrix<f64>,
}

impl ManifoldPoint {
    /// Builds a point, normalizing `data` onto the manifold: unit length for
    /// the sphere, sign-fixed QR for the Grassmannian, symmetrization for SPD.
    pub fn new(manifold: ManifoldId, data: DMatrix<f64>) -> Result<Self> {
        manifold.check()?;
        check_shape(&manifold, &data)?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint("non-finite entry".into()));
        }
        let data = match manifold {
            ManifoldId::Sphere { .. } => {
                let n = data.norm();
                if n == 0.0 {
                    return Err(Error::InvalidPoint("zero vector".into()));
                }
                data / n
            }
            ManifoldId::Grassmannian { .. } => {
                let q = orthonormalize(&data);
                let rank_ok = (q.transpose() * &data)
                    .diagonal()
                    .iter()
                    .all(|d| d.abs() > 1e-12 * data.norm());
                if !rank_ok {
                    return Err(Error::InvalidPoint("spanning set is rank deficient".into()));
                }
                q
            }
            ManifoldId::Spd { .. } => {
                let s = symmetrize(&data);
                let (values, _) = sym_eigen_desc(&s)?;
                if values.last().is_none_or(|&l| l <= 0.0) {
                    return Err(Error::InvalidPoint("matrix is not positive definite".into()));
                }
                s
            }
        };
        Ok(Self { manifold, data })
    }

    /// Wraps `data` without normalization. Use [`validate`] to check it.
    pub fn from_raw(manifold: ManifoldId, data: DMatrix<f64>) -> Result<Self> {
        manifold.check()?;
        check_shape(&manifold, &data)?;
        Ok(Self { manifold, data })
    }

    pub fn sphere(coords: &[f64]) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidManifold(format!(
                "sphere needs ambient dimension >= 2, got {}",
                coords.len()
            )));
        }
        Self::new(
            ManifoldId::Sphere { dim: coords.len() - 1 },
            DMatrix::from_column_slice(coords.len(), 1, coords),
        )
    }

    pub fn grassmannian(basis: DMatrix<f64>) -> Result<Self> {
        let (p, l) = basis.shape();
        Self::new(ManifoldId::Grassmannian { p, l }, basis)
    }

    pub fn spd(m: DMatrix<f64>) -> Result<Self> {
        let (p, q) = m.shape();
        if p != q {
            return Err(Error::ShapeMismatch {
                expected: (p, p),
                found: (p, q),
            });
        }
        Self::new(ManifoldId::Spd { p }, m)
    }

    pub fn manifold(&self) -> ManifoldId {
        self.manifold
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Ambient entries in row-major order.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_row_major(&self.data)
    }
}

fn check_shape(manifold: &ManifoldId, data: &DMatrix<f64>) -> Result<()> {
    let expected = manifold.ambient_shape();
    if data.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            found: data.shape(),
        });
    }
    Ok(())
}

/// An element of `T_base M` in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: ManifoldPoint,
    data: DMatrix<f64>,
}

impl TangentVector {
    /// Wraps `data` as a tangent vector at `base` without projecting it.
    pub fn new(base: ManifoldPoint, data: DMatrix<f64>) -> Result<Self> {
        check_shape(&base.manifold, &data)?;
        Ok(Self { base, data })
    }

    pub fn zero(base: &ManifoldPoint) -> Self {
        let (r, c) = base.manifold.ambient_shape();
        Self {
            base: base.clone(),
            data: DMatrix::zeros(r, c),
        }
    }

    pub fn base(&self) -> &ManifoldPoint {
        &self.base
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Isometric coordinates (see the module docs).
    pub fn coords(&self) -> Result<DVector<f64>> {
        Ok(Chart::new(&self.base)?.coords_of(&self.data))
    }

    /// Riemannian norm.
    pub fn norm(&self) -> Result<f64> {
        Ok(self.coords()?.norm())
    }

    /// Residual of the tangency condition at the base point.
    pub fn tangency_residual(&self) -> f64 {
        tangency_residual(&self.base, &self.data)
    }
}

fn tangency_residual(base: &ManifoldPoint, v: &DMatrix<f64>) -> f64 {
    let x = &base.data;
    match base.manifold {
        ManifoldId::Sphere { .. } => sphere::tangency_residual(x, v),
        ManifoldId::Grassmannian { .. } => grassmann::tangency_residual(x, v),
        ManifoldId::Spd { .. } => spd::tangency_residual(v),
    }
}

/// A base point prepared for repeated log maps and distance evaluations.
///
/// For SPD this caches `M^{1/2}` and `M^{-1/2}`.
#[derive(Debug, Clone)]
pub struct Chart<'a> {
    base: &'a ManifoldPoint,
    spd: Option<spd::SpdFrame>,
}

impl<'a> Chart<'a> {
    pub fn new(base: &'a ManifoldPoint) -> Result<Self> {
        let spd = match base.manifold {
            ManifoldId::Spd { .. } => Some(spd::SpdFrame::new(&base.data)?),
            _ => None,
        };
        Ok(Self { base, spd })
    }

    pub fn base(&self) -> &'a ManifoldPoint {
        self.base
    }

    /// `log_base(target)` in ambient form.
    pub fn log(&self, target: &ManifoldPoint) -> Result<TangentVector> {
        self.base.manifold.same_as(&target.manifold)?;
        let x = &self.base.data;
        let y = &target.data;
        let data = match (&self.base.manifold, &self.spd) {
            (ManifoldId::Sphere { .. }, _) => sphere::log(x, y)?,
            (ManifoldId::Grassmannian { .. }, _) => grassmann::log(x, y)?,
            (ManifoldId::Spd { .. }, Some(frame)) => frame.unwhiten(&frame.log_whitened(y)?),
            (ManifoldId::Spd { .. }, None) => unreachable!("chart built without SPD frame"),
        };
        Ok(TangentVector {
            base: self.base.clone(),
            data,
        })
    }

    /// `log_base(target)` in isometric coordinates.
    pub fn log_coords(&self, target: &ManifoldPoint) -> Result<DVector<f64>> {
        self.base.manifold.same_as(&target.manifold)?;
        let x = &self.base.data;
        let y = &target.data;
        let m = match &self.spd {
            Some(frame) => frame.log_whitened(y)?,
            None => match self.base.manifold {
                ManifoldId::Sphere { .. } => sphere::log(x, y)?,
                _ => grassmann::log(x, y)?,
            },
        };
        Ok(DVector::from_vec(flatten_row_major(&m)))
    }

    /// `(log_base(other), log_other(base))` in the isometric coordinates of
    /// each chart, sharing one factorization where the manifold allows it.
    pub fn log_pair_coords(&self, other: &Chart<'_>) -> Result<(DVector<f64>, DVector<f64>)> {
        let len = self.base.manifold.coord_len();
        let mut fwd = DVector::zeros(len);
        let mut back = DVector::zeros(len);
        self.log_pair_into(other, fwd.as_mut_slice(), back.as_mut_slice())?;
        Ok((fwd, back))
    }

    /// [`Chart::log_pair_coords`] written into caller buffers of length
    /// `coord_len`.
    pub fn log_pair_into(&self, other: &Chart<'_>, fwd: &mut [f64], back: &mut [f64]) -> Result<()> {
        self.base.manifold.same_as(&other.base.manifold)?;
        let x = &self.base.data;
        let y = &other.base.data;
        let (f, b) = match (&self.spd, &other.spd) {
            (Some(a), Some(b)) => a.log_pair(b, y)?,
            _ => match self.base.manifold {
                ManifoldId::Sphere { .. } => return sphere::log_pair_into(x.as_slice(), y.as_slice(), fwd, back),
                _ => grassmann::log_pair(x, y)?,
            },
        };
        write_row_major(&f, fwd);
        write_row_major(&b, back);
        Ok(())
    }

    /// Geodesic distance from the base point. On the sphere the antipode is
    /// at distance `π`; on the Grassmannian cut locus the principal-angle
    /// norm is returned.
    pub fn distance(&self, target: &ManifoldPoint) -> Result<f64> {
        self.base.manifold.same_as(&target.manifold)?;
        let x = &self.base.data;
        let y = &target.data;
        match &self.spd {
            Some(frame) => Ok(frame.log_whitened(y)?.norm()),
            None => match self.base.manifold {
                ManifoldId::Sphere { .. } => Ok(sphere::distance(x, y)),
                _ => grassmann::distance(x, y),
            },
        }
    }

    /// Maps an ambient tangent matrix to isometric coordinates.
    pub fn coords_of(&self, v: &DMatrix<f64>) -> DVector<f64> {
        let m = match &self.spd {
            Some(frame) => frame.whiten(v),
            None => v.clone(),
        };
        DVector::from_vec(flatten_row_major(&m))
    }

    /// Inverse of [`Chart::coords_of`].
    pub fn ambient_of(&self, coords: &DVector<f64>) -> DMatrix<f64> {
        let (r, c) = self.base.manifold.ambient_shape();
        let m = unflatten_row_major(coords.as_slice(), r, c);
        match &self.spd {
            Some(frame) => frame.unwhiten(&m),
            None => m,
        }
    }

    /// `exp_base(v)`; only the ambient data of `v` is used.
    pub fn exp(&self, v: &TangentVector) -> Result<ManifoldPoint> {
        self.base.manifold.same_as(&v.base.manifold)?;
        let residual = tangency_residual(self.base, &v.data);
        if residual > TANGENCY_TOL * v.data.norm().max(1.0) {
            return Err(Error::TangencyViolation(residual));
        }
        let x = &self.base.data;
        let data = match (&self.base.manifold, &self.spd) {
            (ManifoldId::Sphere { .. }, _) => sphere::exp(x, &v.data),
            (ManifoldId::Grassmannian { .. }, _) => grassmann::exp(x, &v.data)?,
            (ManifoldId::Spd { .. }, Some(frame)) => frame.exp(&v.data)?,
            (ManifoldId::Spd { .. }, None) => unreachable!("chart built without SPD frame"),
        };
        Ok(ManifoldPoint {
            manifold: self.base.manifold,
            data,
        })
    }
}

/// `log_base(target)`.
pub fn log_map(base: &ManifoldPoint, target: &ManifoldPoint) -> Result<TangentVector> {
    Chart::new(base)?.log(target)
}

/// `exp_base(v)`; `v` must be tangent at `base`.
pub fn exp_map(base: &ManifoldPoint, v: &TangentVector) -> Result<ManifoldPoint> {
    Chart::new(base)?.exp(v)
}

pub fn geodesic_distance(x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64> {
    Chart::new(x)?.distance(y)
}

/// Orthogonal projection of an ambient matrix onto `T_base M`.
pub fn project_to_tangent(base: &ManifoldPoint, w: &DMatrix<f64>) -> Result<TangentVector> {
    check_shape(&base.manifold, w)?;
    let x = &base.data;
    let data = match base.manifold {
        ManifoldId::Sphere { .. } => sphere::project(x, w),
        ManifoldId::Grassmannian { .. } => grassmann::project(x, w),
        ManifoldId::Spd { .. } => spd::project(w),
    };
    Ok(TangentVector {
        base: base.clone(),
        data,
    })
}

/// Principal angles between two Grassmannian points.
pub fn principal_angles(x: &ManifoldPoint, y: &ManifoldPoint) -> Result<Vec<f64>> {
    x.manifold.same_as(&y.manifold)?;
    match x.manifold {
        ManifoldId::Grassmannian { .. } => grassmann::principal_angles(&x.data, &y.data),
        other => Err(Error::InvalidManifold(format!(
            "principal angles need a Grassmannian, got {other}"
        ))),
    }
}

/// One failed manifold invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite,
    /// `|‖x‖ − 1|` for sphere points.
    NormError(f64),
    /// `‖XᵀX − I‖_F` for Grassmannian bases.
    OrthonormalityError(f64),
    /// `‖M − Mᵀ‖_F` for SPD matrices.
    Asymmetry(f64),
    NotPositiveDefinite {
        min_eigenvalue: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite => write!(f, "non-finite entry"),
            Violation::NormError(e) => write!(f, "norm error {e:e}"),
            Violation::OrthonormalityError(e) => write!(f, "orthonormality error {e:e}"),
            Violation::Asymmetry(e) => write!(f, "asymmetry {e:e}"),
            Violation::NotPositiveDefinite { min_eigenvalue } => {
                write!(f, "not positive definite (min eigenvalue {min_eigenvalue:e})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub violations: Vec<Violation>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks the invariants of a point to [`VALIDATION_TOL`].
pub fn validate(point: &ManifoldPoint) -> std::result::Result<(), Diagnostic> {
    let x = &point.data;
    let mut violations = Vec::new();
    if x.iter().any(|v| !v.is_finite()) {
        violations.push(Violation::NonFinite);
    } else {
        match point.manifold {
            ManifoldId::Sphere { .. } => {
                let err = (x.norm() - 1.0).abs();
                if err > VALIDATION_TOL {
                    violations.push(Violation::NormError(err));
                }
            }
            ManifoldId::Grassmannian { l, .. } => {
                let err = (x.transpose() * x - DMatrix::identity(l, l)).norm();
                if err > VALIDATION_TOL {
                    violations.push(Violation::OrthonormalityError(err));
                }
            }
            ManifoldId::Spd { .. } => {
                let asym = (x - x.transpose()).norm();
                if asym > VALIDATION_TOL {
                    violations.push(Violation::Asymmetry(asym));
                }
                match sym_eigen_desc(x) {
                    Ok((values, _)) => {
                        let min = values.last().copied().unwrap_or(0.0);
                        if min <= 0.0 {
                            violations.push(Violation::NotPositiveDefinite { min_eigenvalue: min });
                        }
                    }
                    Err(_) => violations.push(Violation::NonFinite),
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Diagnostic { violations })
    }
}

#[cfg(test)]
mod tests;

fn write_row_major(m: &DMatrix<f64>, out: &mut [f64]) {
    let cols = m.ncols();
    for r in 0..m.nrows() {
        for c in 0..cols {
            out[r * cols + c] = m[(r, c)];
        }
    }
}

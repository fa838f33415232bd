//! Small dense linear-algebra helpers shared by the manifold and clustering code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// The input is symmetrized first; column `k` of the returned matrix is the
/// unit eigenvector for the `k`-th largest eigenvalue.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let sym = symmetrize(m);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Applies a scalar function to the spectrum of a symmetric matrix.
pub fn sym_apply(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen_desc(m)?;
    Ok(sym_compose(&values, &vectors, f))
}

/// `Q f(Λ) Qᵀ` for an already computed eigendecomposition.
pub fn sym_compose(values: &[f64], vectors: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (k, &lambda) in values.iter().enumerate() {
        let fk = f(lambda);
        scaled.column_mut(k).scale_mut(fk);
    }
    symmetrize(&(scaled * vectors.transpose()))
}

/// Thin QR factor with a sign-fixed (nonnegative) diagonal of `R`.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..q.ncols().min(r.nrows()) {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Row-major flattening.
pub fn flatten_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Inverse of [`flatten_row_major`].
pub fn unflatten_row_major(data: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

/// Householder reduction `A = Q T Qᵀ` of a symmetric matrix, for computing a
/// few eigenpairs without a full decomposition.
///
/// Eigenvalues come from bisection on Sturm counts and eigenvectors from
/// inverse iteration on `T`, mapped back through the stored reflectors.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    /// Reflector `k` acts on coordinates `k + 1..n`.
    reflectors: Vec<(DVector<f64>, f64)>,
    scale: f64,
}

impl Tridiagonal {
    /// Reduces the symmetric part of `m`; only its lower triangle is read
    /// after symmetrizing.
    pub fn new(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut a = symmetrize(m);
        let mut off = vec![0.0; n.saturating_sub(1)];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
        for (k, e) in off.iter_mut().enumerate().take(n.saturating_sub(2)) {
            let len = n - k - 1;
            let mut v: DVector<f64> = a.view((k + 1, k), (len, 1)).column(0).into_owned();
            let norm = v.norm();
            if norm == 0.0 {
                reflectors.push((v, 0.0));
                continue;
            }
            let alpha = if v[0] > 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let beta = 2.0 / v.norm_squared();
            *e = alpha;
            let mut a22 = a.view_mut((k + 1, k + 1), (len, len));
            let mut p = DVector::zeros(len);
            p.sygemv(beta, &a22, &v, 0.0);
            let w = &p - &v * (0.5 * beta * p.dot(&v));
            a22.syger(-1.0, &v, &w, 1.0);
            a22.syger(-1.0, &w, &v, 1.0);
            reflectors.push((v, beta));
        }
        if n >= 2 {
            off[n - 2] = a[(n - 1, n - 2)];
        }
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let scale = (0..n)
            .map(|i| diag[i].abs() + if i > 0 { off[i - 1].abs() } else { 0.0 } + off.get(i).map_or(0.0, |e| e.abs()))
            .fold(0.0, f64::max);
        Tridiagonal {
            diag,
            off,
            reflectors,
            scale,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        self.scale
    }

    fn pivot_floor(&self) -> f64 {
        f64::MIN_POSITIVE * self.off.iter().map(|e| e * e).fold(1.0, f64::max)
    }

    /// Number of eigenvalues below `x`.
    fn count_below(&self, x: f64) -> usize {
        let floor = self.pivot_floor();
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let e2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            q = self.diag[i] - x - e2 / q;
            if q.abs() < floor {
                q = -floor;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `j`-th largest eigenvalue (0-based), to about machine precision
    /// relative to the norm.
    pub fn eigenvalue_desc(&self, j: usize) -> f64 {
        self.bisect(j, &mut Vec::new())
    }

    /// The `k` largest eigenvalues in descending order, extended by every
    /// further eigenvalue within `tie_tol · max(1, |λ₁|)` of the `k`-th.
    pub fn top_eigenvalues(&self, k: usize, tie_tol: f64) -> Vec<f64> {
        let n = self.len();
        let k = k.min(n);
        // Sturm counts already evaluated, shared between the bisections so a
        // cluster of equal eigenvalues costs one search.
        let mut samples = Vec::new();
        let mut values: Vec<f64> = (0..k).map(|j| self.bisect(j, &mut samples)).collect();
        if let Some(&first) = values.first() {
            let tol = tie_tol * first.abs().max(1.0);
            while values.len() < n {
                let next = self.bisect(values.len(), &mut samples);
                if (values[k - 1] - next).abs() > tol {
                    break;
                }
                values.push(next);
            }
        }
        values
    }

    fn bisect(&self, j: usize, samples: &mut Vec<(f64, usize)>) -> f64 {
        let n = self.len();
        assert!(j < n, "eigenvalue index {j} out of range for {n}");
        let target = n - 1 - j;
        let floor = self.pivot_floor();
        let pad = 2.0 * f64::EPSILON * self.scale + floor;
        let (mut lo, mut hi) = (-self.scale - pad, self.scale + pad);
        for &(x, count) in samples.iter() {
            if count > target {
                hi = hi.min(x);
            } else {
                lo = lo.max(x);
            }
        }
        while hi - lo > 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + floor {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let count = self.count_below(mid);
            samples.push((mid, count));
            if count > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Unit eigenvectors of the original matrix for `values`, which must be
    /// eigenvalues of `T` in descending order. Vectors for close values are
    /// orthogonalized against each other, so a repeated value yields a basis
    /// of its eigenspace. The caller should check residuals.
    pub fn eigenvectors(&self, values: &[f64]) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::zeros(n, values.len());
        if n == 0 {
            return out;
        }
        // Shifts are kept apart so each solve sees a distinct singular direction.
        let sep = 10.0 * f64::EPSILON * self.scale.max(f64::MIN_POSITIVE);
        let mut rng = ChaCha8Rng::seed_from_u64(0x7d1a);
        let mut shift = f64::INFINITY;
        for (c, &value) in values.iter().enumerate() {
            shift = value.min(shift - sep);
            let lu = TridiagonalLu::new(&self.diag, &self.off, shift, sep);
            let mut y = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            for _ in 0..3 {
                lu.solve(y.as_mut_slice());
                for prev in 0..c {
                    let q = out.column(prev);
                    let d = q.dot(&y);
                    y.axpy(-d, &q, 1.0);
                }
                let norm = y.norm();
                if norm == 0.0 || !norm.is_finite() {
                    break;
                }
                y /= norm;
            }
            out.set_column(c, &y);
        }
        for (k, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            if *beta == 0.0 {
                continue;
            }
            let mut tail = out.rows_mut(k + 1, n - k - 1);
            let d = tail.tr_mul(v);
            tail.ger(-beta, v, &d, 1.0);
        }
        out
    }
}

/// LU factorization with partial pivoting of `T - shift·I`; the upper factor
/// has two superdiagonals.
struct TridiagonalLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn new(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut u0: Vec<f64> = diag.iter().map(|d| d - shift).collect();
        let mut u1 = off.to_vec();
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let guard = |x: f64| if x.abs() < tiny { tiny.copysign(x) } else { x };
        for i in 0..n.saturating_sub(1) {
            let below = off[i];
            if u0[i].abs() >= below.abs() {
                u0[i] = guard(u0[i]);
                mult[i] = below / u0[i];
                u0[i + 1] -= mult[i] * u1[i];
            } else {
                swapped[i] = true;
                mult[i] = u0[i] / below;
                let b = u1[i];
                u0[i] = below;
                u1[i] = u0[i + 1];
                if i + 2 < n {
                    u2[i] = u1[i + 1];
                    u1[i + 1] = -mult[i] * u2[i];
                }
                u0[i + 1] = b - mult[i] * u1[i];
            }
        }
        if n > 0 {
            u0[n - 1] = guard(u0[n - 1]);
        }
        TridiagonalLu {
            u0,
            u1,
            u2,
            mult,
            swapped,
        }
    }

    fn solve(&self, y: &mut [f64]) {
        let n = y.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= self.mult[i] * y[i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= self.u1[i] * y[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * y[i + 2];
            }
            y[i] = s / self.u0[i];
        }
    }
}

//! Local geometry around each data point: radius neighborhoods, log-mapped
//! local covariances, estimated tangent subspaces and empirical geodesic
//! angles.
//!
//! Everything here works in the isometric tangent coordinates of
//! [`Chart`](crate::manifold::Chart), so covariances and angles are taken
//! with respect to the Riemannian inner product at the base point.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, sym_eigen_desc};
use crate::manifold::{Chart, ManifoldPoint};

/// Norm below which a log image counts as the zero vector.
pub const ZERO_VECTOR_TOL: f64 = 1e-12;

/// Symmetric matrix of pairwise geodesic distances with a zero diagonal.
pub fn pairwise_distances(points: &[ManifoldPoint]) -> Result<DMatrix<f64>> {
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let chart = Chart::new(&points[i]).map_err(|e| e.at_pair(i, i))?;
            (i + 1..n)
                .map(|j| chart.distance(&points[j]).map_err(|e| e.at_pair(i, j)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

/// `log_{x_i}(x_j)` in isometric coordinates for every ordered pair, with the
/// distances they imply.
#[derive(Debug, Clone)]
pub struct PairwiseLogs {
    n: usize,
    /// Column `i * n + j` holds `log_{x_i}(x_j)`; zero on the diagonal and
    /// for cut-locus pairs.
    coords: DMatrix<f64>,
    cut: Vec<bool>,
    distances: DMatrix<f64>,
}

impl PairwiseLogs {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `None` when `x_j` is in the cut locus of `x_i`.
    pub fn get(&self, i: usize, j: usize) -> Option<DVector<f64>> {
        let c = i * self.n + j;
        (!self.cut[c]).then(|| self.coords.column(c).into_owned())
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.distances
    }

    pub fn into_distances(self) -> DMatrix<f64> {
        self.distances
    }
}

/// Logs in both directions for every pair, one factorization per unordered
/// pair. Distances are the norms of the logs (principal-angle or `π`
/// distances on the cut locus).
pub fn pairwise_logs(points: &[ManifoldPoint]) -> Result<PairwiseLogs> {
    let n = points.len();
    let len = points.first().map_or(0, |p| p.manifold().coord_len());
    let charts = points
        .iter()
        .enumerate()
        .map(|(i, p)| Chart::new(p).map_err(|e| e.at_pair(i, i)))
        .collect::<Result<Vec<_>>>()?;

    struct Row {
        fwd: Vec<f64>,
        back: Vec<f64>,
        dist: Vec<f64>,
        cut: Vec<bool>,
    }
    let rows: Vec<Row> = (0..n)
        .into_par_iter()
        .map(|i| {
            let m = n - i - 1;
            let mut row = Row {
                fwd: vec![0.0; m * len],
                back: vec![0.0; m * len],
                dist: vec![0.0; m],
                cut: vec![false; m],
            };
            for (o, j) in (i + 1..n).enumerate() {
                let fwd = &mut row.fwd[o * len..(o + 1) * len];
                let back = &mut row.back[o * len..(o + 1) * len];
                match charts[i].log_pair_into(&charts[j], fwd, back) {
                    Ok(()) => row.dist[o] = fwd.iter().map(|v| v * v).sum::<f64>().sqrt(),
                    Err(Error::CutLocus) => {
                        fwd.fill(0.0);
                        back.fill(0.0);
                        row.cut[o] = true;
                        row.dist[o] = charts[i].distance(&points[j]).map_err(|e| e.at_pair(i, j))?;
                    }
                    Err(e) => return Err(e.at_pair(i, j)),
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut coords = DMatrix::zeros(len, n * n);
    let mut cut = vec![false; n * n];
    let mut distances = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        let first = i * n + i + 1;
        coords.as_mut_slice()[first * len..(i + 1) * n * len].copy_from_slice(&row.fwd);
        for (o, j) in (i + 1..n).enumerate() {
            coords
                .column_mut(j * n + i)
                .copy_from_slice(&row.back[o * len..(o + 1) * len]);
            distances[(i, j)] = row.dist[o];
            distances[(j, i)] = row.dist[o];
            cut[i * n + j] = row.cut[o];
            cut[j * n + i] = row.cut[o];
        }
    }
    Ok(PairwiseLogs {
        n,
        coords,
        cut,
        distances,
    })
}

/// Mean over all points of the distance to the `n`-th nearest other point.
pub fn choose_radius(distances: &DMatrix<f64>, n: usize) -> Result<f64> {
    let count = distances.nrows();
    if n == 0 || n >= count {
        return Err(Error::InvalidParameter(format!(
            "neighbor count {n} must be in 1..{count} for {count} points"
        )));
    }
    let total: f64 = (0..count)
        .map(|i| {
            let mut row: Vec<f64> = (0..count).filter(|&j| j != i).map(|j| distances[(i, j)]).collect();
            let (_, nth, _) = row.select_nth_unstable_by(n - 1, f64::total_cmp);
            *nth
        })
        .sum();
    Ok(total / count as f64)
}

/// Radius neighborhoods `J(x_i, r) = { j : dist(x_i, x_j) < r }`, always
/// containing `i` itself.
#[derive(Debug, Clone)]
pub struct NeighborhoodIndex {
    radius: f64,
    neighbors: Vec<Vec<usize>>,
    distances: DMatrix<f64>,
}

impl NeighborhoodIndex {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Sorted member indices of `J(x_i, r)`, including `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.distances
    }
}

pub fn build_neighborhoods(distances: &DMatrix<f64>, radius: f64) -> NeighborhoodIndex {
    let n = distances.nrows();
    let neighbors = (0..n)
        .map(|i| (0..n).filter(|&j| j == i || distances[(i, j)] < radius).collect())
        .collect();
    NeighborhoodIndex {
        radius,
        neighbors,
        distances: distances.clone(),
    }
}

/// Nonzero spectrum of `XXᵀ` obtained from the small Gram matrix `XᵀX`.
#[derive(Debug, Clone)]
pub struct GramEigen {
    /// `min(k, D)` eigenvalues of `XXᵀ`, descending, clamped at zero.
    pub values: Vec<f64>,
    /// Unit eigenvectors in ambient coordinates, one column per strictly
    /// positive eigenvalue.
    pub vectors: DMatrix<f64>,
}

/// Eigendecomposition of `XXᵀ` for a `D × k` matrix `X` whose columns are the
/// vectors. When `k < D` it goes through the `k × k` Gram matrix: if
/// `XᵀX v = λ v` then `XXᵀ (Xv) = λ (Xv)` with `‖Xv‖² = λ`.
pub fn gram_eigen(x: &DMatrix<f64>) -> Result<GramEigen> {
    let (dim, k) = x.shape();
    if k == 0 {
        return Ok(GramEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(dim, 0),
        });
    }
    // Decompose whichever of XXᵀ and XᵀX is smaller.
    let direct = dim <= k;
    let (values, small) = if direct {
        sym_eigen_desc(&(x * x.transpose()))?
    } else {
        sym_eigen_desc(&(x.transpose() * x))?
    };
    let keep = k.min(dim);
    let values: Vec<f64> = values.into_iter().take(keep).map(|v| v.max(0.0)).collect();
    let top = values.first().copied().unwrap_or(0.0);
    let positive = values.iter().take_while(|&&v| v > top * 1e-12 && v > 0.0).count();
    let mut vectors = DMatrix::zeros(dim, positive);
    for c in 0..positive {
        if direct {
            vectors.set_column(c, &small.column(c));
        } else {
            let u = x * small.column(c);
            let norm = u.norm();
            vectors.set_column(c, &(u / norm));
        }
    }
    Ok(GramEigen { values, vectors })
}

/// Log images `log_{x_i}(x_j)` of a neighborhood in isometric coordinates.
#[derive(Debug, Clone)]
pub struct NeighborImages {
    pub index: usize,
    /// Members of `J(x_i, r)`, including `index`.
    pub members: Vec<usize>,
    /// One column per member, in the order of `members`.
    pub coords: DMatrix<f64>,
}

impl NeighborImages {
    pub fn column_of(&self, j: usize) -> Option<usize> {
        self.members.iter().position(|&m| m == j)
    }
}

pub fn neighbor_images(points: &[ManifoldPoint], nbhd: &NeighborhoodIndex, i: usize) -> Result<NeighborImages> {
    let base = &points[i];
    let chart = Chart::new(base).map_err(|e| e.at_pair(i, i))?;
    let members = nbhd.neighbors(i).to_vec();
    let mut coords = DMatrix::zeros(base.manifold().coord_len(), members.len());
    for (c, &j) in members.iter().enumerate() {
        if j != i {
            let v = chart.log_coords(&points[j]).map_err(|e| e.at_pair(i, j))?;
            coords.set_column(c, &v);
        }
    }
    Ok(NeighborImages {
        index: i,
        members,
        coords,
    })
}

/// [`neighbor_images`] read from precomputed logs.
pub fn neighbor_images_from_logs(logs: &PairwiseLogs, nbhd: &NeighborhoodIndex, i: usize) -> Result<NeighborImages> {
    let members = nbhd.neighbors(i).to_vec();
    let coord_len = logs.coords.nrows();
    let mut coords = DMatrix::zeros(coord_len, members.len());
    for (c, &j) in members.iter().enumerate() {
        if j != i {
            let v = logs.get(i, j).ok_or(Error::CutLocus).map_err(|e| e.at_pair(i, j))?;
            coords.set_column(c, &v);
        }
    }
    Ok(NeighborImages {
        index: i,
        members,
        coords,
    })
}

/// Spectrum of the local sample covariance at one point.
#[derive(Debug, Clone)]
pub struct LocalCovariance {
    pub index: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// Covariance (population divisor) of a neighborhood's log images.
pub fn covariance_of_images(images: &NeighborImages) -> Result<LocalCovariance> {
    let k = images.coords.ncols();
    if k < 2 {
        return Err(Error::DegenerateNeighborhood {
            index: images.index,
            size: k,
        });
    }
    let mean = images.coords.column_mean();
    let mut centered = images.coords.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    centered /= (k as f64).sqrt();
    let eig = gram_eigen(&centered)?;
    Ok(LocalCovariance {
        index: images.index,
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
    })
}

pub fn local_covariance(points: &[ManifoldPoint], nbhd: &NeighborhoodIndex, i: usize) -> Result<LocalCovariance> {
    let size = nbhd.neighbors(i).len();
    if size < 2 {
        return Err(Error::DegenerateNeighborhood { index: i, size });
    }
    covariance_of_images(&neighbor_images(points, nbhd, i)?)
}

/// Number of eigenvalues strictly above `eta · λ₁`.
pub fn estimate_dimension_threshold(eigenvalues: &[f64], eta: f64) -> Result<usize> {
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(Error::AllZeroSpectrum);
    }
    Ok(eigenvalues.iter().filter(|&&l| l > eta * top).count().max(1))
}

/// Position of the largest gap `λ_m − λ_{m+1}` for `m ≤ max_dim`; ties go to
/// the smallest `m`.
pub fn estimate_dimension_gap(eigenvalues: &[f64], max_dim: usize) -> usize {
    let upper = eigenvalues.len().saturating_sub(1).min(max_dim);
    let mut best = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for m in 1..=upper {
        let gap = eigenvalues[m - 1] - eigenvalues[m];
        if gap > best_gap {
            best_gap = gap;
            best = m;
        }
    }
    best
}

/// Estimated tangent subspace `T^E` at one point.
#[derive(Debug, Clone)]
pub struct TangentEstimate {
    pub index: usize,
    pub eigenvalues: Vec<f64>,
    /// Orthonormal basis, one column per dimension; zero columns for a
    /// degenerate neighborhood.
    pub basis: DMatrix<f64>,
}

impl TangentEstimate {
    /// Keeps the top `dim` eigenvectors (capped by the available rank).
    pub fn from_covariance(cov: &LocalCovariance, dim: usize) -> Self {
        let m = dim.min(cov.eigenvectors.ncols());
        let top = cov.eigenvectors.columns(0, m).into_owned();
        let basis = if m > 0 { orthonormalize(&top) } else { top };
        Self {
            index: cov.index,
            eigenvalues: cov.eigenvalues.clone(),
            basis,
        }
    }

    /// Rank-0 estimate for an isolated point.
    pub fn degenerate(index: usize, coord_len: usize) -> Self {
        Self {
            index,
            eigenvalues: Vec::new(),
            basis: DMatrix::zeros(coord_len, 0),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_degenerate(&self) -> bool {
        self.basis.ncols() == 0
    }

    /// Elevation angle of `v` over this subspace.
    pub fn angle(&self, v: &DVector<f64>) -> f64 {
        elevation_angle(&self.basis, v)
    }
}

/// Angle in `[0, π/2]` between `v` and the span of the orthonormal columns
/// of `basis`; zero for (numerically) zero `v`.
pub fn elevation_angle(basis: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let norm = v.norm();
    if norm < ZERO_VECTOR_TOL {
        return 0.0;
    }
    let along = basis.tr_mul(v);
    let residual = v - basis * &along;
    residual.norm().atan2(along.norm())
}

/// `θ_ij`, the elevation angle of `log_{x_i}(x_j)` over `T^E_{x_i}`.
/// Not symmetric in general; the diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMatrix(pub DMatrix<f64>);

impl AngleMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

pub fn geodesic_angles(points: &[ManifoldPoint], estimates: &[TangentEstimate]) -> Result<AngleMatrix> {
    let n = points.len();
    if estimates.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} tangent estimates for {n} points",
            estimates.len()
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let chart = Chart::new(&points[i]).map_err(|e| e.at_pair(i, i))?;
            (0..n)
                .map(|j| {
                    if i == j {
                        return Ok(0.0);
                    }
                    let v = chart.log_coords(&points[j]).map_err(|e| e.at_pair(i, j))?;
                    Ok(estimates[i].angle(&v))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(AngleMatrix(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
}

/// [`geodesic_angles`] from precomputed logs. Cut-locus pairs get `π/2`.
pub fn geodesic_angles_from_logs(logs: &PairwiseLogs, estimates: &[TangentEstimate]) -> Result<AngleMatrix> {
    let n = logs.len();
    if estimates.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} tangent estimates for {n} points",
            estimates.len()
        )));
    }
    let len = logs.coords.nrows();
    // Column i of `out` holds row i of the angle matrix.
    let mut out = DMatrix::zeros(n, n);
    out.as_mut_slice()
        .par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            // Column j of the block is log_{x_i}(x_j).
            let block = logs.coords.columns(i * n, n);
            let basis = &estimates[i].basis;
            let along = basis.tr_mul(&block);
            let residual = block - basis * &along;
            let d = basis.ncols();
            // Distances are symmetric, so column i is row i in memory order.
            let dist = logs.distances.column(i);
            let cut = &logs.cut[i * n..(i + 1) * n];
            let (res, along) = (residual.as_slice(), along.as_slice());
            for (j, theta) in row.iter_mut().enumerate() {
                *theta = if i == j || (!cut[j] && dist[j] < ZERO_VECTOR_TOL) {
                    0.0
                } else if cut[j] {
                    std::f64::consts::FRAC_PI_2
                } else {
                    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    sq(&res[j * len..(j + 1) * len]).atan2(sq(&along[j * d..(j + 1) * d]))
                };
            }
        });
    Ok(AngleMatrix(out.transpose()))
}

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{AffinityMatrix, GctParams, GctSupport, SmcParams, SmcWeight, TgctParams};
use crate::error::{Error, Result};
use crate::local::{
    build_neighborhoods, choose_radius, covariance_of_images, estimate_dimension_gap, estimate_dimension_threshold,
    geodesic_angles_from_logs, local_covariance, neighbor_images, neighbor_images_from_logs, pairwise_distances,
    pairwise_logs, NeighborImages, NeighborhoodIndex, PairwiseLogs, TangentEstimate,
};
use crate::manifold::{Chart, ManifoldPoint};
use crate::sparse::{solve_sparse_code, SolverOptions, SparseCodeProblem};

/// Default bandwidth of [`apply_spatial_modifier`].
pub const SPATIAL_SIGMA: f64 = 0.1;

/// Per-point output of the local step shared by GCT and SMC.
struct LocalCode {
    /// `(j, S_ij, θ_ij)` for every `j ≠ i` in the neighborhood, sorted by `j`.
    entries: Vec<(usize, f64, f64)>,
    estimate: Option<TangentEstimate>,
}

impl LocalCode {
    fn get(&self, j: usize) -> Option<(f64, f64)> {
        self.entries
            .binary_search_by_key(&j, |e| e.0)
            .ok()
            .map(|k| (self.entries[k].1, self.entries[k].2))
    }
}

/// Sparse codes (and, when `with_angles`, geodesic angles to a largest-gap
/// tangent estimate) for every point.
fn local_codes(
    points: &[ManifoldPoint],
    nbhd: &NeighborhoodIndex,
    images_of: impl Fn(usize) -> Result<NeighborImages> + Sync,
    sigma_d: f64,
    solver: &SolverOptions,
    with_angles: bool,
) -> Result<Vec<LocalCode>> {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            if nbhd.neighbors(i).len() < 2 {
                return Ok(LocalCode {
                    entries: Vec::new(),
                    estimate: None,
                });
            }
            let images = images_of(i)?;
            let others: Vec<usize> = (0..images.members.len()).filter(|&c| images.members[c] != i).collect();
            let candidates = images.coords.select_columns(&others);
            let problem = SparseCodeProblem::new(nalgebra::DVector::zeros(candidates.nrows()), candidates, sigma_d);
            let code = match solve_sparse_code(&problem, solver) {
                Ok(code) => code,
                Err(Error::MaxIterExceeded(best)) => *best,
                Err(e) => return Err(e),
            };
            let estimate = if with_angles {
                let cov = covariance_of_images(&images)?;
                let dim = estimate_dimension_gap(&cov.eigenvalues, points[i].manifold().dim());
                Some(TangentEstimate::from_covariance(&cov, dim))
            } else {
                None
            };
            let entries = others
                .iter()
                .zip(&code.coefficients)
                .map(|(&c, &s)| {
                    let theta = estimate
                        .as_ref()
                        .map_or(0.0, |e| e.angle(&images.coords.column(c).into_owned()));
                    (images.members[c], s, theta)
                })
                .collect();
            Ok(LocalCode { entries, estimate })
        })
        .collect()
}

/// Fills `W_ij = W_ji = f(i, j)` for every neighbor pair `i < j`.
fn symmetric_from_pairs(nbhd: &NeighborhoodIndex, f: impl Fn(usize, usize) -> f64 + Sync) -> Result<AffinityMatrix> {
    let n = nbhd.len();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            nbhd.neighbors(i)
                .iter()
                .filter(|&&j| j > i)
                .map(|&j| (j, f(i, j)))
                .collect()
        })
        .collect();
    let mut w = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row {
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    AffinityMatrix::new(w)
}

fn code_pair(codes: &[LocalCode], i: usize, j: usize) -> ((f64, f64), (f64, f64)) {
    let a = codes[i].get(j).unwrap_or((0.0, 0.0));
    let b = codes[j].get(i).unwrap_or((0.0, 0.0));
    (a, b)
}

fn neighborhoods_for(distances: &DMatrix<f64>, neighbors: usize) -> Result<NeighborhoodIndex> {
    let r = choose_radius(distances, neighbors)?;
    Ok(build_neighborhoods(distances, r))
}

/// `exp(|S_ij| + |S_ji|) · exp(−(θ_ij + θ_ji) / σ_a)`.
pub fn gct_weight(s_ij: f64, s_ji: f64, theta_ij: f64, theta_ji: f64, sigma_a: f64) -> f64 {
    (s_ij.abs() + s_ji.abs() - (theta_ij + theta_ji) / sigma_a).exp()
}

pub fn smc_weight(s_ij: f64, s_ji: f64, mode: SmcWeight) -> f64 {
    let sum = s_ij.abs() + s_ji.abs();
    match mode {
        SmcWeight::Linear => sum,
        SmcWeight::Exponential => sum.exp(),
    }
}

/// GCT affinity
/// `W_ij = exp(|S_ij| + |S_ji|) · exp(−(θ_ij + θ_ji) / σ_a)`, over every pair
/// or only neighbor pairs depending on [`GctParams::support`].
///
/// A point with fewer than two neighbors has no tangent estimate; its angles
/// are `π/2`.
pub fn gct_affinity(points: &[ManifoldPoint], params: &GctParams) -> Result<AffinityMatrix> {
    match params.support {
        GctSupport::AllPairs => gct_affinity_from_logs(points, &pairwise_logs(points)?, params),
        GctSupport::Neighbors => gct_affinity_from(points, &pairwise_distances(points)?, params),
    }
}

/// [`gct_affinity`] with precomputed pairwise distances.
pub fn gct_affinity_from(
    points: &[ManifoldPoint],
    distances: &DMatrix<f64>,
    params: &GctParams,
) -> Result<AffinityMatrix> {
    params.validate()?;
    let nbhd = neighborhoods_for(distances, params.neighbors)?;
    match params.support {
        GctSupport::Neighbors => {
            let codes = local_codes(
                points,
                &nbhd,
                |i| neighbor_images(points, &nbhd, i),
                params.sigma_d,
                &params.solver,
                true,
            )?;
            symmetric_from_pairs(&nbhd, |i, j| {
                let ((s_ij, t_ij), (s_ji, t_ji)) = code_pair(&codes, i, j);
                gct_weight(s_ij, s_ji, t_ij, t_ji, params.sigma_a)
            })
        }
        GctSupport::AllPairs => gct_all_pairs(points, &pairwise_logs(points)?, &nbhd, params),
    }
}

/// All-pairs [`gct_affinity`] on precomputed logs; the neighborhoods come
/// from the distances stored with them.
pub fn gct_affinity_from_logs(
    points: &[ManifoldPoint],
    logs: &PairwiseLogs,
    params: &GctParams,
) -> Result<AffinityMatrix> {
    params.validate()?;
    let nbhd = neighborhoods_for(logs.distances(), params.neighbors)?;
    gct_all_pairs(points, logs, &nbhd, params)
}

fn gct_all_pairs(
    points: &[ManifoldPoint],
    logs: &PairwiseLogs,
    nbhd: &NeighborhoodIndex,
    params: &GctParams,
) -> Result<AffinityMatrix> {
    let codes = local_codes(
        points,
        nbhd,
        |i| neighbor_images_from_logs(logs, nbhd, i),
        params.sigma_d,
        &params.solver,
        true,
    )?;
    let coord_len = points.first().map_or(0, |p| p.manifold().coord_len());
    let estimates: Vec<TangentEstimate> = codes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.estimate
                .clone()
                .unwrap_or_else(|| TangentEstimate::degenerate(i, coord_len))
        })
        .collect();
    let theta = geodesic_angles_from_logs(logs, &estimates)?.0;
    let n = points.len();
    let mut s = DMatrix::zeros(n, n);
    for (i, code) in codes.iter().enumerate() {
        for &(j, s_ij, _) in &code.entries {
            s[(i, j)] = s_ij;
        }
    }
    let w = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        gct_weight(s[(i, j)], s[(j, i)], theta[(i, j)], theta[(j, i)], params.sigma_a)
    });
    AffinityMatrix::new(w)
}

/// SMC affinity from the same sparse codes as GCT, without angles.
pub fn smc_affinity(points: &[ManifoldPoint], params: &SmcParams) -> Result<AffinityMatrix> {
    smc_affinity_from(points, &pairwise_distances(points)?, params)
}

/// [`smc_affinity`] with precomputed pairwise distances.
pub fn smc_affinity_from(
    points: &[ManifoldPoint],
    distances: &DMatrix<f64>,
    params: &SmcParams,
) -> Result<AffinityMatrix> {
    params.validate()?;
    let nbhd = neighborhoods_for(distances, params.neighbors)?;
    let codes = local_codes(
        points,
        &nbhd,
        |i| neighbor_images(points, &nbhd, i),
        params.sigma_d,
        &params.solver,
        false,
    )?;
    symmetric_from_pairs(&nbhd, |i, j| {
        let ((s_ij, _), (s_ji, _)) = code_pair(&codes, i, j);
        smc_weight(s_ij, s_ji, params.weight)
    })
}

/// TGCT affinity: `W_ij = 1` when `dist(x_i, x_j) < σ_d`, both points have
/// the same η-threshold local dimension and `θ_ij + θ_ji < σ_a`.
///
/// Points whose radius-`r` neighborhood holds only themselves (or only
/// duplicates) get no edges.
pub fn tgct_affinity(points: &[ManifoldPoint], params: &TgctParams) -> Result<AffinityMatrix> {
    tgct_affinity_from(points, &pairwise_distances(points)?, params)
}

/// [`tgct_affinity`] with precomputed pairwise distances.
pub fn tgct_affinity_from(
    points: &[ManifoldPoint],
    distances: &DMatrix<f64>,
    params: &TgctParams,
) -> Result<AffinityMatrix> {
    params.validate()?;
    let n = points.len();
    let nbhd = build_neighborhoods(distances, params.r);
    let estimates: Vec<Option<TangentEstimate>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if nbhd.neighbors(i).len() < 2 {
                return Ok(None);
            }
            let cov = local_covariance(points, &nbhd, i)?;
            match estimate_dimension_threshold(&cov.eigenvalues, params.eta) {
                Ok(dim) => Ok(Some(TangentEstimate::from_covariance(&cov, dim))),
                Err(Error::AllZeroSpectrum) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    // θ_ij for every pair within σ_d of each other.
    let close = build_neighborhoods(distances, params.sigma_d);
    let angles: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let Some(est) = &estimates[i] else {
                return Ok(Vec::new());
            };
            let chart = Chart::new(&points[i]).map_err(|e| e.at_pair(i, i))?;
            close
                .neighbors(i)
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let v = chart.log_coords(&points[j]).map_err(|e| e.at_pair(i, j))?;
                    Ok((j, est.angle(&v)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let angle = |i: usize, j: usize| angles[i].binary_search_by_key(&j, |e| e.0).ok().map(|k| angles[i][k].1);

    symmetric_from_pairs(&close, |i, j| {
        let (Some(a), Some(b)) = (&estimates[i], &estimates[j]) else {
            return 0.0;
        };
        if a.dim() != b.dim() {
            return 0.0;
        }
        match (angle(i, j), angle(j, i)) {
            (Some(t_ij), Some(t_ji)) if t_ij + t_ji < params.sigma_a => 1.0,
            _ => 0.0,
        }
    })
}

/// Gaussian kernel `exp(−d² / (2σ²))` on geodesic distances.
pub fn scr_affinity(distances: &DMatrix<f64>, sigma: f64) -> Result<AffinityMatrix> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let w = distances.map(|d| (-d * d / (2.0 * sigma * sigma)).exp());
    AffinityMatrix::new(w)
}

/// `W_ij · exp(−‖p_i − p_j‖² / σ)` for pixel coordinates `p` (one row per
/// point).
pub fn apply_spatial_modifier(w: &AffinityMatrix, pixels: &DMatrix<f64>, sigma: f64) -> Result<AffinityMatrix> {
    let n = w.len();
    if pixels.shape() != (n, 2) {
        return Err(Error::ShapeMismatch {
            expected: (n, 2),
            found: pixels.shape(),
        });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let m = w.matrix();
    let out = DMatrix::from_fn(n, n, |i, j| {
        let d2 = (pixels.row(i) - pixels.row(j)).norm_squared();
        m[(i, j)] * (-d2 / sigma).exp()
    });
    AffinityMatrix::new(out)
}

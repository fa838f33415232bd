//! Affinity construction, spectral clustering and the method dispatcher.
//!
//! Methods:
//! - **TGCT**: indicator affinity from distances, local dimensions and
//!   empirical geodesic angles.
//! - **GCT**: sparse-coding weights damped by geodesic angles.
//! - **SMC**: sparse-coding weights only.
//! - **SCR**: Gaussian kernel on geodesic distances.
//! - **EKM**: k-means on a Euclidean embedding of the manifold.

mod affinity;
mod embed;
mod kmeans;
mod spectral;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::local::{pairwise_distances, pairwise_logs};
use crate::manifold::ManifoldPoint;
use crate::sparse::SolverOptions;

pub use affinity::{
    apply_spatial_modifier, gct_affinity, gct_affinity_from, gct_affinity_from_logs, gct_weight, scr_affinity,
    smc_affinity, smc_affinity_from, smc_weight, tgct_affinity, tgct_affinity_from, SPATIAL_SIGMA,
};
pub use embed::embed_euclidean;
pub use kmeans::{kmeans, KMeansFit, KMEANS_MAX_ITER, KMEANS_RESTARTS, KMEANS_TOL};
pub use spectral::{spectral_cluster, spectral_embedding, TIE_TOL};

/// Symmetric, nonnegative affinity matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(DMatrix<f64>);

impl AffinityMatrix {
    /// Symmetry tolerance accepted by [`AffinityMatrix::new`].
    pub const SYMMETRY_TOL: f64 = 1e-12;

    /// Validates `w` and zeroes its diagonal.
    pub fn new(mut w: DMatrix<f64>) -> Result<Self> {
        let (r, c) = w.shape();
        if r != c {
            return Err(Error::ShapeMismatch {
                expected: (r, r),
                found: (r, c),
            });
        }
        for i in 0..r {
            for j in 0..r {
                let v = w[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "affinity ({i}, {j}) = {v} is not a finite nonnegative number"
                    )));
                }
                if (v - w[(j, i)]).abs() > Self::SYMMETRY_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "affinity is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        w.fill_diagonal(0.0);
        Ok(Self(w))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.0.row_iter().map(|r| r.sum()).collect()
    }
}

/// Cluster assignment with labels in `0..k`.
///
/// Files and CLI output use labels `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClusterLabels {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterLabels {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidParameter(format!("label {bad} out of range for k = {k}")));
        }
        Ok(Self { labels, k })
    }

    /// From labels in `1..=k`.
    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::InvalidParameter("label 0 in one-based labels".into()));
        }
        Self::new(labels.iter().map(|l| l - 1).collect(), k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    /// Restriction to the given indices, keeping `k`.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            k: self.k,
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TgctParams {
    /// Neighborhood radius for the local covariance.
    pub r: f64,
    /// Eigenvalue threshold for the local dimension.
    pub eta: f64,
    pub sigma_d: f64,
    pub sigma_a: f64,
}

impl TgctParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("r", self.r)?;
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must be in (0, 1), got {}",
                self.eta
            )));
        }
        check_positive("sigma_d", self.sigma_d)?;
        check_positive("sigma_a", self.sigma_a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GctParams {
    /// Neighbor count used to pick the radius.
    pub neighbors: usize,
    pub sigma_d: f64,
    pub sigma_a: f64,
    pub support: GctSupport,
    pub solver: SolverOptions,
}

/// Which pairs receive a GCT weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GctSupport {
    /// Every pair; sparse codes are zero outside neighborhoods.
    #[default]
    AllPairs,
    /// Only pairs where one point is in the other's neighborhood.
    Neighbors,
}

impl FromStr for GctSupport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" | "all-pairs" => Ok(Self::AllPairs),
            "neighbors" => Ok(Self::Neighbors),
            _ => Err(Error::InvalidParameter(format!(
                "unknown GCT support '{s}' (expected all or neighbors)"
            ))),
        }
    }
}

impl fmt::Display for GctSupport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AllPairs => "all",
            Self::Neighbors => "neighbors",
        })
    }
}

impl Default for GctParams {
    fn default() -> Self {
        Self {
            neighbors: 20,
            sigma_d: 1.0,
            sigma_a: 1.0,
            support: GctSupport::default(),
            solver: SolverOptions::default(),
        }
    }
}

impl GctParams {
    pub fn validate(&self) -> Result<()> {
        if self.neighbors == 0 {
            return Err(Error::InvalidParameter("neighbor count must be at least 1".into()));
        }
        check_positive("sigma_d", self.sigma_d)?;
        check_positive("sigma_a", self.sigma_a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmcWeight {
    /// `W_ij = |S_ij| + |S_ji|`.
    Linear,
    /// `W_ij = exp(|S_ij| + |S_ji|)`.
    #[default]
    Exponential,
}

impl FromStr for SmcWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "exponential" | "exp" => Ok(Self::Exponential),
            _ => Err(Error::InvalidParameter(format!(
                "unknown SMC weight mode '{s}' (expected linear or exponential)"
            ))),
        }
    }
}

impl fmt::Display for SmcWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcParams {
    pub neighbors: usize,
    pub sigma_d: f64,
    pub weight: SmcWeight,
    pub solver: SolverOptions,
}

impl Default for SmcParams {
    fn default() -> Self {
        Self {
            neighbors: 20,
            sigma_d: 1.0,
            weight: SmcWeight::default(),
            solver: SolverOptions::default(),
        }
    }
}

impl SmcParams {
    pub fn validate(&self) -> Result<()> {
        if self.neighbors == 0 {
            return Err(Error::InvalidParameter("neighbor count must be at least 1".into()));
        }
        check_positive("sigma_d", self.sigma_d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrParams {
    pub sigma: f64,
}

impl Default for ScrParams {
    fn default() -> Self {
        Self { sigma: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Gct(GctParams),
    Tgct(TgctParams),
    Smc(SmcParams),
    Scr(ScrParams),
    Ekm,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gct(_) => "GCT",
            Method::Tgct(_) => "TGCT",
            Method::Smc(_) => "SMC",
            Method::Scr(_) => "SCR",
            Method::Ekm => "EKM",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Method::Gct(p) => p.validate(),
            Method::Tgct(p) => p.validate(),
            Method::Smc(p) => p.validate(),
            Method::Scr(p) => check_positive("sigma", p.sigma),
            Method::Ekm => Ok(()),
        }
    }
}

/// Wall-clock milliseconds spent in each stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    /// Distances and affinity (or the embedding for EKM).
    pub affinity_ms: f64,
    /// Spectral clustering (or k-means for EKM).
    pub spectral_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput {
    pub labels: ClusterLabels,
    pub timings: Timings,
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs one clustering method end to end.
///
/// Points with zero affinity to everything else take the label of their
/// nearest (by geodesic distance) point that has positive degree.
pub fn run_method(method: &Method, points: &[ManifoldPoint], k: usize, seed: u64) -> Result<MethodOutput> {
    method.validate()?;
    if k == 0 || k > points.len() {
        return Err(Error::InvalidParameter(format!(
            "cluster count {k} must be in 1..={}",
            points.len()
        )));
    }
    let start = Instant::now();
    if let Method::Ekm = method {
        let embedded = embed_euclidean(points)?;
        let affinity_ms = elapsed_ms(start);
        let mid = Instant::now();
        let fit = kmeans(&embedded, k, seed, KMEANS_RESTARTS)?;
        let spectral_ms = elapsed_ms(mid);
        return Ok(MethodOutput {
            labels: fit.labels,
            timings: Timings {
                affinity_ms,
                spectral_ms,
                total_ms: elapsed_ms(start),
            },
        });
    }

    // All-pairs GCT needs every log anyway, so its distances come with them.
    let (distances, w) = if let Method::Gct(
        p @ GctParams {
            support: GctSupport::AllPairs,
            ..
        },
    ) = method
    {
        let logs = pairwise_logs(points)?;
        let w = gct_affinity_from_logs(points, &logs, p)?;
        (logs.into_distances(), w)
    } else {
        let distances = pairwise_distances(points)?;
        let w = affinity_for(method, points, &distances)?;
        (distances, w)
    };
    let affinity_ms = elapsed_ms(start);
    let mid = Instant::now();
    let mut labels = spectral_cluster(&w, k, seed)?;
    assign_isolated(&mut labels, &w, &distances);
    let spectral_ms = elapsed_ms(mid);
    Ok(MethodOutput {
        labels,
        timings: Timings {
            affinity_ms,
            spectral_ms,
            total_ms: elapsed_ms(start),
        },
    })
}

fn affinity_for(method: &Method, points: &[ManifoldPoint], distances: &DMatrix<f64>) -> Result<AffinityMatrix> {
    match method {
        Method::Gct(p) => gct_affinity_from(points, distances, p),
        Method::Tgct(p) => tgct_affinity_from(points, distances, p),
        Method::Smc(p) => smc_affinity_from(points, distances, p),
        Method::Scr(p) => scr_affinity(distances, p.sigma),
        Method::Ekm => unreachable!("EKM has no affinity"),
    }
}

fn assign_isolated(labels: &mut ClusterLabels, w: &AffinityMatrix, distances: &DMatrix<f64>) {
    let degrees = w.degrees();
    let connected: Vec<usize> = (0..degrees.len()).filter(|&i| degrees[i] > 0.0).collect();
    if connected.is_empty() {
        return;
    }
    for i in 0..degrees.len() {
        if degrees[i] > 0.0 {
            continue;
        }
        let nearest = connected
            .iter()
            .copied()
            .min_by(|&a, &b| distances[(i, a)].total_cmp(&distances[(i, b)]).then(a.cmp(&b)))
            .expect("nonempty");
        labels.labels[i] = labels.labels[nearest];
    }
}

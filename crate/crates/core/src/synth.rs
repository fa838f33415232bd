//! Seeded generators for the six synthetic two-cluster benchmark datasets.
//!
//! | id  | manifold  | families                                  |
//! |-----|-----------|-------------------------------------------|
//! | I   | G(6,2)    | two non-intersecting curves of 2-planes    |
//! | II  | G(6,2)    | two curves meeting at span{e₁, e₂}         |
//! | III | SPD(3)    | two intersecting one-parameter families    |
//! | IV  | SPD(3)    | scaled identities vs. diag(β, β², β³)      |
//! | V   | S²        | two parallel arcs                         |
//! | VI  | S²        | two arcs of great circles crossing at e₂   |
//!
//! Parameters are equispaced over their interval; noise is i.i.d. standard
//! normal scaled by `noise_sigma`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cluster::ClusterLabels;
use crate::error::{Error, Result};
use crate::linalg::{sym_apply, symmetrize};
use crate::manifold::{ManifoldId, ManifoldPoint};

/// Smallest eigenvalue kept when repairing generated SPD matrices.
pub const SPD_EIGEN_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DatasetId {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl DatasetId {
    pub const ALL: [DatasetId; 6] = [Self::I, Self::II, Self::III, Self::IV, Self::V, Self::VI];

    /// Position in [`DatasetId::ALL`].
    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn manifold(self) -> ManifoldId {
        match self {
            Self::I | Self::II => ManifoldId::Grassmannian { p: 6, l: 2 },
            Self::III | Self::IV => ManifoldId::Spd { p: 3 },
            Self::V | Self::VI => ManifoldId::Sphere { dim: 2 },
        }
    }

    pub fn clusters(self) -> usize {
        2
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::I => "I",
            Self::II => "II",
            Self::III => "III",
            Self::IV => "IV",
            Self::V => "V",
            Self::VI => "VI",
        })
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    /// Accepts roman numerals (any case) or `1`–`6`.
    fn from_str(s: &str) -> Result<Self> {
        let id = match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Self::I,
            "II" | "2" => Self::II,
            "III" | "3" => Self::III,
            "IV" | "4" => Self::IV,
            "V" | "5" => Self::V,
            "VI" | "6" => Self::VI,
            _ => return Err(Error::InvalidSpec(format!("unknown dataset '{s}' (expected I..VI)"))),
        };
        Ok(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub id: DatasetId,
    pub points_per_cluster: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl DatasetSpec {
    pub const DEFAULT_POINTS_PER_CLUSTER: usize = 130;
    pub const DEFAULT_NOISE: f64 = 0.025;

    pub fn new(id: DatasetId, seed: u64) -> Self {
        Self {
            id,
            points_per_cluster: Self::DEFAULT_POINTS_PER_CLUSTER,
            noise_sigma: Self::DEFAULT_NOISE,
            seed,
        }
    }

    pub fn with_noise(self, noise_sigma: f64) -> Self {
        Self { noise_sigma, ..self }
    }

    pub fn with_points_per_cluster(self, points_per_cluster: usize) -> Self {
        Self {
            points_per_cluster,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_cluster < 2 {
            return Err(Error::InvalidSpec(format!(
                "points_per_cluster must be at least 2, got {}",
                self.points_per_cluster
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "noise_sigma must be finite and nonnegative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Spec(DatasetSpec),
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifold: ManifoldId,
    pub points: Vec<ManifoldPoint>,
    pub truth: Option<ClusterLabels>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n` equispaced values from `lo` to `hi` inclusive.
fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

struct Noise {
    rng: ChaCha8Rng,
    sigma: f64,
}

impl Noise {
    fn sample(&mut self) -> f64 {
        self.sigma * self.rng.sample::<f64, _>(StandardNormal)
    }

    fn vector(&mut self, base: &[f64]) -> Vec<f64> {
        base.iter().map(|b| b + self.sample()).collect()
    }

    /// Symmetric matrix with i.i.d. entries on and above the diagonal.
    fn symmetric(&mut self, p: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(p, p);
        for r in 0..p {
            for c in r..p {
                let v = self.sample();
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        m
    }
}

fn grassmann_point(noise: &mut Noise, u: [f64; 6], v: [f64; 6]) -> Result<ManifoldPoint> {
    let u = noise.vector(&u);
    let v = noise.vector(&v);
    let mut span = DMatrix::zeros(6, 2);
    span.set_column(0, &nalgebra::DVector::from_vec(u));
    span.set_column(1, &nalgebra::DVector::from_vec(v));
    ManifoldPoint::grassmannian(span)
}

fn spd_point(noise: &mut Noise, a: DMatrix<f64>) -> Result<ManifoldPoint> {
    let m = symmetrize(&(a + noise.symmetric(3)));
    ManifoldPoint::spd(sym_apply(&m, |l| l.max(SPD_EIGEN_FLOOR))?)
}

fn sphere_point(noise: &mut Noise, x: [f64; 3]) -> Result<ManifoldPoint> {
    ManifoldPoint::sphere(&noise.vector(&x))
}

/// Generates the dataset described by `spec`. Cluster 0 comes first, then
/// cluster 1.
pub fn generate(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.points_per_cluster;
    let mut noise = Noise {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        sigma: spec.noise_sigma,
    };
    let mut points = Vec::with_capacity(2 * n);
    match spec.id {
        DatasetId::I | DatasetId::II => {
            for t in grid(-FRAC_PI_3, FRAC_PI_3, n) {
                let (s, c) = t.sin_cos();
                points.push(grassmann_point(
                    &mut noise,
                    [c, 0.0, s, 0.0, 0.0, 0.0],
                    [0.0, c, 0.0, s, 0.0, 0.0],
                )?);
            }
            for t in grid(-FRAC_PI_3, FRAC_PI_3, n) {
                let (s, c) = t.sin_cos();
                let (u, v) = if spec.id == DatasetId::I {
                    ([c, 0.0, s, 0.0, 0.5, 0.0], [0.0, c, 0.0, s, 0.5, 0.0])
                } else {
                    ([c, 0.0, 0.0, 0.0, s, 0.0], [0.0, c, 0.0, 0.0, 0.0, s])
                };
                points.push(grassmann_point(&mut noise, u, v)?);
            }
        }
        DatasetId::III => {
            for t in grid(0.0, PI, n) {
                let (s, c) = (t + FRAC_PI_4).sin_cos();
                #[rustfmt::skip]
                let a = DMatrix::from_row_slice(3, 3, &[
                    4.0, 4.0 * c, 4.0 * s,
                    4.0 * c, 4.0, 0.0,
                    4.0 * s, 0.0, 4.0,
                ]);
                points.push(spd_point(&mut noise, a)?);
            }
            for t in grid(0.0, PI, n) {
                let (sm, cm) = (t - FRAC_PI_4).sin_cos();
                let sp = (t + FRAC_PI_4).sin();
                // The (2,3) and (3,2) entries differ; symmetrization averages them.
                #[rustfmt::skip]
                let a = DMatrix::from_row_slice(3, 3, &[
                    4.0, 0.0, 4.0 * cm,
                    0.0, 4.0, 4.0 * sm,
                    4.0 * cm, 4.0 * sp, 4.0,
                ]);
                points.push(spd_point(&mut noise, a)?);
            }
        }
        DatasetId::IV => {
            for a in grid(0.5, 1.0, n) {
                points.push(spd_point(&mut noise, DMatrix::from_diagonal_element(3, 3, 10.0 * a))?);
            }
            for b in grid(0.5, 1.0, n) {
                let d = nalgebra::DVector::from_vec(vec![10.0 * b, 10.0 * b * b, 10.0 * b * b * b]);
                points.push(spd_point(&mut noise, DMatrix::from_diagonal(&d))?);
            }
        }
        DatasetId::V => {
            let (rho, h) = (0.97_f64.sqrt(), 0.03_f64.sqrt());
            for t in grid(0.0, FRAC_PI_2, n) {
                points.push(sphere_point(&mut noise, [t.cos(), t.sin(), 0.0])?);
            }
            for t in grid(0.0, FRAC_PI_2, n) {
                points.push(sphere_point(&mut noise, [rho * t.cos(), rho * t.sin(), h])?);
            }
        }
        DatasetId::VI => {
            for t in grid(0.0, FRAC_PI_2, n) {
                let a = t + FRAC_PI_4;
                points.push(sphere_point(&mut noise, [a.cos(), a.sin(), 0.0])?);
            }
            for t in grid(0.0, FRAC_PI_2, n) {
                let a = t - FRAC_PI_4;
                points.push(sphere_point(&mut noise, [0.0, a.cos(), a.sin()])?);
            }
        }
    }
    let labels = (0..2 * n).map(|i| i / n).collect();
    Ok(Dataset {
        manifold: spec.id.manifold(),
        points,
        truth: Some(ClusterLabels::new(labels, 2)?),
        provenance: Provenance::Spec(*spec),
    })
}

/// One dataset per noise level; the `i`-th uses seed `base.seed + i`
/// (wrapping), so the first matches `generate` with the base seed.
pub fn noise_sweep(base: &DatasetSpec, sigmas: &[f64]) -> Result<Vec<Dataset>> {
    if sigmas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidSpec("noise levels must be ascending".into()));
    }
    sigmas
        .iter()
        .enumerate()
        .map(|(i, &sigma)| {
            generate(&DatasetSpec {
                noise_sigma: sigma,
                seed: base.seed.wrapping_add(i as u64),
                ..*base
            })
        })
        .collect()
}

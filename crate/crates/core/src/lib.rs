//! Clustering of data sampled near unions of geodesic submanifolds of a
//! Riemannian manifold.
//!
//! The main entry points are the affinity builders in [`cluster`] (GCT,
//! TGCT and the SMC/SCR/EKM baselines), the synthetic dataset generators in
//! [`synth`] and the clustering-rate metric in [`eval`]. Supported manifolds
//! are the unit sphere, the Grassmannian and SPD matrices; see [`manifold`].

pub mod cluster;
pub mod error;
pub mod eval;
pub mod format;
pub mod linalg;
pub mod local;
pub mod manifold;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
pub use manifold::{ManifoldId, ManifoldPoint, TangentVector};

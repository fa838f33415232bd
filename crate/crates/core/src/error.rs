use thiserror::Error;

use crate::manifold::ManifoldId;
use crate::sparse::SparseCode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("manifold mismatch: {0} vs {1}")]
    ManifoldMismatch(ManifoldId, ManifoldId),

    #[error("target lies in the cut locus of the base point")]
    CutLocus,

    #[error("vector is not tangent to the base point (residual {0:e})")]
    TangencyViolation(f64),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid manifold: {0}")]
    InvalidManifold(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("neighborhood of point {index} has {size} member(s), need at least 2")]
    DegenerateNeighborhood { index: usize, size: usize },

    #[error("covariance spectrum is identically zero")]
    AllZeroSpectrum,

    #[error("sparse coding problem has no candidates")]
    EmptyCandidates,

    #[error("sparse coding did not converge after {} iterations", .0.iterations)]
    MaxIterExceeded(Box<SparseCode>),

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_pair(self, i: usize, j: usize) -> Self {
        Error::Pair {
            i,
            j,
            source: Box::new(self),
        }
    }
}

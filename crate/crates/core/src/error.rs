use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is numerically rank deficient (sigma_min / sigma_max = {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("factor is not orthonormal (deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("vector is not unit length (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("vectors are not orthogonal (inner product {dot:e})")]
    NotOrthogonal { dot: f64 },
    #[error("block matrix B is singular (sigma_min = {sigma_min:e})")]
    SingularB { sigma_min: f64 },
    #[error("normal equations are ill conditioned (pivot ratio {ratio:e})")]
    IllConditioned { ratio: f64 },
    #[error("sketched matrix rank deficient after {attempts} attempts")]
    SketchRankDeficient { attempts: usize },
    #[error("iterative solver did not converge in {iterations} iterations (gradient ratio {gradient:e})")]
    NoConvergence { iterations: usize, gradient: f64 },
    #[error("insufficient samples: need {needed} blocks, have {available}")]
    InsufficientSamples { needed: usize, available: usize },
    #[error("least-squares factor collapsed at iteration {iteration}")]
    RankCollapse { iteration: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed container: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

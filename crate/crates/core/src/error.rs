use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} is not on the complex variety M' (|theta.theta - 1| = {residual:e})")]
    NotOnVariety { point: String, residual: f64 },

    #[error("direction {0} falls in the excluded set of M' and could not be moved off it")]
    ExcludedDirection(String),

    #[error("harmonic degree {degree} aliases on a quadrature of order {order} (max {max})")]
    Aliasing { degree: usize, order: usize, max: usize },

    #[error("linear solver did not converge: {0}")]
    SolverFailure(String),

    #[error("least-squares system is rank deficient (rank {rank} of {dim}); set ridge > 0")]
    RankDeficient { rank: usize, dim: usize },

    #[error("no feasible theta on the kappa grid for lambda = {lambda:?}")]
    NoFeasibleTheta { lambda: [f64; 3] },

    #[error("series not converged: {0}")]
    SeriesNotConverged(String),

    #[error("coverage error: cutoff {lambda0} exceeds sampled radius {sampled}")]
    Coverage { lambda0: f64, sampled: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable code used in report rows.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "DomainError",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NotOnVariety { .. } => "NotOnVariety",
            Error::ExcludedDirection(_) => "ExcludedDirection",
            Error::Aliasing { .. } => "Aliasing",
            Error::SolverFailure(_) => "SolverFailure",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::NoFeasibleTheta { .. } => "NoFeasibleTheta",
            Error::SeriesNotConverged(_) => "SeriesNotConverged",
            Error::Coverage { .. } => "CoverageError",
            Error::Schema(_) => "SchemaError",
            Error::Config { .. } => "ConfigError",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}

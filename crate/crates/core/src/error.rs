use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("point cloud contains a non-finite coordinate at index {0}")]
    NonFinite(usize),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("insufficient parts: {available} candidate parts for {required} reference components")]
    InsufficientParts { available: usize, required: usize },

    #[error("no dominant plane found (best inlier fraction {best_fraction:.3})")]
    NoPlaneFound { best_fraction: f64 },

    #[error("invalid superquadric parameters: {0}")]
    InvalidParams(String),

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("part {0} has no point cloud")]
    MissingCloud(String),

    #[error("candidate effect `{effect}` does not satisfy goal `{goal}`")]
    NotASolution { effect: String, goal: String },

    #[error("candidate solution is identical to the reference solution")]
    IdentitySolution,

    #[error("empty ranked build list")]
    EmptyRanking,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Json { .. } => "json",
            Error::EmptyCloud => "empty_cloud",
            Error::NonFinite(_) => "non_finite",
            Error::DegenerateGeometry(_) => "degenerate_geometry",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::InsufficientParts { .. } => "insufficient_parts",
            Error::NoPlaneFound { .. } => "no_plane_found",
            Error::InvalidParams(_) => "invalid_params",
            Error::InvalidTransform(_) => "invalid_transform",
            Error::InvalidInput(_) => "invalid_input",
            Error::MissingCloud(_) => "missing_cloud",
            Error::NotASolution { .. } => "not_a_solution",
            Error::IdentitySolution => "identity_solution",
            Error::EmptyRanking => "empty_ranking",
        }
    }

    /// True for failures of the fitting stage (insufficient or degenerate data).
    pub fn is_fit_failure(&self) -> bool {
        matches!(self, Error::InsufficientData { .. } | Error::DegenerateGeometry(_))
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes; each maps to a process exit code in the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Geometry,
    Solver,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Geometry => 3,
            ErrorCategory::Solver => 4,
            ErrorCategory::Io => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("set is not periodically connected: {0}")]
    NotConnected(String),

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("degenerate stencil: interaction range {range} is below the grid spacing {spacing}")]
    DegenerateStencil { range: f64, spacing: f64 },

    #[error("no discrete path: point {point:?} is unreachable with r1 = {r1}, nu = {nu}")]
    NoPath { point: Vec<f64>, r1: f64, nu: f64 },

    #[error("collar width t = {t} too large: {} collar nodes reflect outside C ∩ 3Q (first: {:?})", .offending.len(), .offending.first())]
    CollarTooWide { t: f64, offending: Vec<Vec<f64>> },

    #[error("margin violated: {0}")]
    Margin(String),

    #[error("integrand violates the upper growth bound at xi = {xi:?}, z = {z}: h = {value} > bound {bound}")]
    GrowthBound { xi: Vec<f64>, z: f64, value: f64, bound: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("malformed field dump: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) => ErrorCategory::Config,
            Error::InvalidArgument(_)
            | Error::EmptyDomain(_)
            | Error::NotConnected(_)
            | Error::EmptyRegion(_)
            | Error::DegenerateStencil { .. }
            | Error::NoPath { .. }
            | Error::CollarTooWide { .. }
            | Error::Margin(_) => ErrorCategory::Geometry,
            Error::GrowthBound { .. } | Error::NoConvergence { .. } | Error::NonFinite(_) => {
                ErrorCategory::Solver
            }
            Error::Format(_) | Error::Io { .. } => ErrorCategory::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

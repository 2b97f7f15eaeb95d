use std::path::PathBuf;

use thiserror::Error;

/// Which elliptic leg of a time step produced a solver failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    PLaplacian,
    Mobility,
    Coupled,
}

impl std::fmt::Display for Leg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Leg::PLaplacian => "p-laplacian",
            Leg::Mobility => "mobility",
            Leg::Coupled => "coupled",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid value for `{field}`: {msg}")]
    InvalidParam { field: &'static str, msg: String },

    #[error("field shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("conjugate gradient breakdown at iteration {iteration}: curvature {curvature:.3e}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("{leg} leg failed: {source}")]
    InLeg {
        leg: Leg,
        #[source]
        source: Box<Error>,
    },

    #[error("fixed-point iteration did not converge after {} iterations (last residual {:.3e})", history.len(), history.last().copied().unwrap_or(f64::NAN))]
    FixedPointNonConvergence { history: Vec<f64> },

    #[error("step {k} failed: {source}")]
    Step {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time {t} lies outside [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },

    #[error("config line {line}: {msg}")]
    ConfigSyntax { line: usize, msg: String },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(field: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_leg(self, leg: Leg) -> Self {
        Error::InLeg {
            leg,
            source: Box::new(self),
        }
    }

    /// True if the failure originates in an iterative solver rather than bad input.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. }
            | Error::FixedPointNonConvergence { .. }
            | Error::Breakdown { .. } => true,
            Error::InLeg { source, .. } | Error::Step { source, .. } => {
                source.is_non_convergence()
            }
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

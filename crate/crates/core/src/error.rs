use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate strip: 1 + λ·f reaches {min_factor:.6e} (must stay positive)")]
    DegenerateStrip { min_factor: f64 },

    #[error("profile is identically zero")]
    ZeroProfile,

    #[error("quadrature interval [{lo}, {hi}] does not cover [{need_lo}, {need_hi}]")]
    QuadratureCoverage {
        lo: f64,
        hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    #[error("mode index {index} out of range 1..={max}")]
    ModeIndex { index: usize, max: usize },

    #[error("table {path:?}, line {line}: {reason}")]
    Table { path: PathBuf, line: usize, reason: String },

    #[error("tabulated profile mean {relative_mean:.3e} (relative) is too large to project away")]
    NonZeroMean { relative_mean: f64 },

    #[error("problem size {unknowns} unknowns exceeds the cap of {cap}")]
    TooLarge { unknowns: usize, cap: usize },

    #[error("eigensolver did not converge in {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("factorization breakdown: {0}")]
    Breakdown(String),

    #[error("{what} unavailable: {reason}")]
    Unavailable { what: &'static str, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config{}: {reason}", at_line(*line))]
    Config { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" line {line}")
    }
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

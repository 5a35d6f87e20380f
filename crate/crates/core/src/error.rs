use thiserror::Error;

use crate::geometry::ArrayKind;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid array layout: {0}")]
    InvalidLayout(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("far-field point has no finite distance")]
    FarField,

    #[error("degenerate endfire point: |theta| = 1 with b > 0")]
    Endfire,

    #[error("operation requires a linear array, got {0}")]
    NotLinear(ArrayKind),

    #[error("infeasible panel: {n} antennas at spacing {spacing} m need {required} m, panel is {panel} m")]
    InfeasiblePanel {
        n: usize,
        spacing: f64,
        required: f64,
        panel: f64,
    },

    #[error("dictionary undersampled: need S >= {min_s} and T >= {min_t}, got S = {s}, T = {t}")]
    Undersampled {
        min_s: usize,
        min_t: usize,
        s: usize,
        t: usize,
    },

    #[error("matched surrogate distance: use the angle cross-section formula instead")]
    MatchedDistance,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

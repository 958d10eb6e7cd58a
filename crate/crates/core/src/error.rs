use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{material}: wavelength {wavelength_um:.4} um outside valid range [{min_um}, {max_um}] um")]
    OutOfRange {
        material: String,
        wavelength_um: f64,
        min_um: f64,
        max_um: f64,
    },

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("material `{name}`: {reason}")]
    MaterialData { name: String, reason: String },

    #[error("no phase-matching solution for pump at {pump_nm} nm in {crystal}")]
    NoPhaseMatching { crystal: String, pump_nm: f64 },

    #[error("invalid `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("config not found: {0}")]
    ConfigNotFound(PathBuf),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("at grid index ({row}, {col}): {source}")]
    AtGridPoint {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("SVD did not converge on {rows}x{cols} matrix (Frobenius norm {norm:e})")]
    SvdFailed { rows: usize, cols: usize, norm: f64 },

    #[error("{0}")]
    Numerical(String),

    #[error("at drift phase {phase:.6} rad: {source}")]
    AtPhase {
        phase: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub(crate) fn field(name: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::field(name, reason)
}

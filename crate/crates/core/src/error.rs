use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Corner blocks of a 6×6 expectation matrix that must be inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    /// Rows 1–3, columns 1–3.
    A,
    /// Rows 4–6, columns 4–6.
    D,
}

impl fmt::Display for Corner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Corner::A => f.write_str("A (rows 1-3, cols 1-3)"),
            Corner::D => f.write_str("D (rows 4-6, cols 4-6)"),
        }
    }
}

/// Inversion steps of the QST → QDT → QST loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    /// Known observables for settings 1–3 (QST on the A corner).
    KnownSettings,
    /// Reconstructed states 1–3 (QDT on the B corner).
    States1To3,
    /// Reconstructed observables 4–6 (QST on the D corner).
    Settings4To6,
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Leg::KnownSettings => f.write_str("known settings 1-3"),
            Leg::States1To3 => f.write_str("states 1-3"),
            Leg::Settings4To6 => f.write_str("settings 4-6"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-physical state: Stokes vector norm {norm} exceeds 1")]
    NonPhysicalState { norm: f64 },

    #[error("non-positive POVM: observable vector norm {norm} exceeds 1")]
    NonPositivePovm { norm: f64 },

    #[error("unsupported POVM: biased pair with Tr(E) = {trace}")]
    UnsupportedPovm { trace: f64 },

    #[error("invalid POVM pair: {0}")]
    InvalidPovm(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid measurement element: eigenvalue {eigenvalue} outside [0, 1]")]
    InvalidElement { eigenvalue: f64 },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("relative error undefined: reference operator has zero norm")]
    DivisionDegenerate,

    #[error("singular gauge transform (det = {det})")]
    SingularGauge { det: f64 },

    #[error("index out of range: {what} = {index}, valid range 1..={max}")]
    Bounds {
        what: &'static str,
        index: usize,
        max: usize,
    },

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("singular corner {corner}: relative determinant {rel_det:e} below cutoff")]
    SingularCorner { corner: Corner, rel_det: f64 },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("at least 2 samples are required for statistics, got {0}")]
    InsufficientSamples(usize),

    #[error("singular measurement block: known observables are not invertible")]
    SingularMeasurement,

    #[error("singular preparation block: known states are not invertible")]
    SingularPreparation,

    #[error("singular loop leg: {0}")]
    SingularLeg(Leg),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: line {line}: {message}")]
    Data {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("entry out of range at block {block}, row {row}, col {col}: {value}")]
    Range {
        block: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("report has no delta statistics to emit")]
    MissingStats,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("malformed instance document: {0}")]
    Malformed(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("negative weight {value} on edge {from}->{to}")]
    NegativeWeight { from: usize, to: usize, value: f64 },

    #[error("nonzero self-loop weight {value} at node {node}")]
    NonzeroDiagonal { node: usize, value: f64 },

    #[error("vehicle count k={k} out of range 1..={max} for n={n}")]
    VehicleCount { n: usize, k: usize, max: usize },

    #[error("{what} of size {size} exceeds the limit of {limit}")]
    Resource {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("closed-form and expanded QUBO disagree at configuration {index}: {closed_form} vs {expanded}")]
    FormulationMismatch {
        index: u64,
        closed_form: f64,
        expanded: f64,
    },

    #[error("objective returned a non-finite value at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by a size guard rather than invalid input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

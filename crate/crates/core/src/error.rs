use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, expected {expected}, got {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("{op}: matrix must be square, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{op}: matrix is not Hermitian (relative deviation {deviation:e})")]
    NotHermitian { op: &'static str, deviation: f64 },
    #[error("{0}: input must be nonempty")]
    Empty(&'static str),
    #[error("entry {index} has modulus {modulus}, expected 1")]
    NotUnimodular { index: usize, modulus: f64 },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("angle is undefined between coincident points ({x}, {y})")]
    CoincidentPoints { x: f64, y: f64 },
    #[error("reciprocal channel model requires n_tx == n_rx, got {n_tx} and {n_rx}")]
    ReciprocityRequired { n_tx: usize, n_rx: usize },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("Fisher information {fisher:e} is not positive; the bound is undefined")]
    SingularInformation { fisher: f64 },
    #[error("quartic form has imaginary residue {relative:e} relative to its value")]
    ImaginaryResidue { relative: f64 },
}

impl Error {
    pub(crate) fn dims(op: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

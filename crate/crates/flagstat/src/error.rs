use thiserror::Error;

/// Errors produced by factorizations, manifold constructors, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix column was (numerically) linearly dependent on the ones before it.
    #[error("rank deficient: column {column} is linearly dependent (|R[{column},{column}]| below tolerance)")]
    RankDeficient { column: usize },

    /// An iterative kernel failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Input violated a precondition (non-finite entries, bad sizes, bad parameters).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A representative matrix was not orthonormal within tolerance.
    #[error("matrix is not orthonormal: max deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    NotOrthonormal { deviation: f64, tolerance: f64 },

    /// Matrix dimensions did not match what the operation requires.
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    /// Two flag points (or a point and a config) disagree on the signature.
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    /// The operation is only defined for a restricted family of signatures.
    #[error("unsupported signature: {0}")]
    UnsupportedSignature(String),

    /// An operation that needs at least one element received none.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Weight vector length does not match the number of points.
    #[error("weight length mismatch: {points} points but {weights} weights")]
    WeightLengthMismatch { points: usize, weights: usize },

    /// The orthogonal matrix sits on the contraction horizon (|M44| ~ 0), so no
    /// finite rigid motion maps to it.
    #[error("contraction singularity: |M[4,4]| = {m44:.3e} is below 1e-12")]
    ContractionSingularity { m44: f64 },

    /// A block or element index was out of range.
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    /// Malformed experiment or CLI configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error stems from user-supplied data or configuration
    /// rather than from a numerical kernel.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::NotOrthonormal { .. }
                | Error::ShapeMismatch { .. }
                | Error::SignatureMismatch(_)
                | Error::UnsupportedSignature(_)
                | Error::EmptyInput(_)
                | Error::WeightLengthMismatch { .. }
                | Error::IndexOutOfRange { .. }
                | Error::Config(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

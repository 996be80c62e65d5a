use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Axis lengths or vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An input contained NaN or infinite entries.
    #[error("non-finite numerical input: {0}")]
    NumericalInput(String),

    /// Polar projection of a (numerically) rank-deficient matrix.
    #[error("degenerate polar input: smallest singular value {smallest:.3e} below rank tolerance")]
    DegeneratePolar { smallest: f64 },

    /// A matrix that must be Hermitian is not.
    #[error("matrix not hermitian: max |h - h†| entry = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    /// A matrix that must be unitary is not.
    #[error("matrix not unitary: max |u†u - I| entry = {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    /// Dense statevector operations are capped to keep memory bounded.
    #[error("{qubits} qubits exceeds the dense-statevector guard of {max}")]
    SizeGuard { qubits: usize, max: usize },

    /// A state that must be normalized is not.
    #[error("state not normalized: |psi| = {norm}")]
    Normalization { norm: f64 },

    /// Invalid configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// The objective returned NaN or an infinite value.
    #[error("objective evaluated to a non-finite value at the given parameters")]
    Evaluation { params: Vec<f64> },

    /// LAPACK/BLAS failure surfaced from the linear-algebra backend.
    #[error("linear algebra backend error: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    /// LAPACK routine returned a nonzero info code.
    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    /// IO failure with path context.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Serialization / deserialization failure.
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

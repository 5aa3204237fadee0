use thiserror::Error;

/// Failures reported by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad input: meshes, coefficients, configuration values.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("index {index} out of range for stencil on a mesh with {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    /// Elimination hit an exactly (or numerically) vanishing pivot.
    #[error("zero pivot in {solver} at row {row}")]
    ZeroPivot { solver: &'static str, row: usize },

    #[error("characteristic roots on the unit circle at z = {z_re} + {z_im}i; increase the inversion radius")]
    IllPosedFrequency { z_re: f64, z_im: f64 },

    #[error("eigen-solver failure: {0}")]
    Eigen(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroPivot { .. }
                | Error::IllPosedFrequency { .. }
                | Error::Eigen(_)
                | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

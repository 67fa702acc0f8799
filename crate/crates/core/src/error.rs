use thiserror::Error;

/// Errors raised anywhere in the transcoding pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("trace is {trace} but must be 1")]
    BadTrace { trace: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("latent vector norm {norm} is not 1")]
    NotUnitNorm { norm: f64 },

    #[error("latent vector of length {len} does not fit a {n}x{n} factor")]
    DimensionTooSmall { len: usize, n: usize },

    #[error("Cholesky factorization failed even after jitter")]
    SingularInput,

    #[error("noise parameter {0} outside [0, 1]")]
    BadNoise(f64),

    #[error("observable has near-zero Hilbert-Schmidt norm {0:e}")]
    DegenerateObservable(f64),

    #[error("expectation value has imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("latent pre-normalization norm {0:e} vanished")]
    VanishingNorm(f64),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

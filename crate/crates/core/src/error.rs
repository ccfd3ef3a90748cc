use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index ({i}, {j}) out of range for dimension {n}")]
    OutOfBounds { i: usize, j: usize, n: usize },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("matrix is not positive semidefinite (eigenvalue {min_eig:e} below {floor:e})")]
    NotPsd { min_eig: f64, floor: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("numerical failure after {retries} retries: {reason}")]
    Numerical { retries: usize, reason: String },
    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular(_) | Error::Numerical { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    Dimension {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate chord: endpoints coincide")]
    DegenerateChord,
    #[error("degenerate angle: neighbor coincides with the candidate point")]
    DegenerateAngle,
    #[error("profiles belong to different curves or have different lengths")]
    MismatchedProfiles,
    #[error("transform {0} has no geometric point map")]
    NotGeometric(String),
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("malformed {kind}: {message}")]
    Format { kind: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

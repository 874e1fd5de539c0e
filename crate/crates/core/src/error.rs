use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("direction is not a unit vector (norm {0})")]
    NonUnitDirection(f64),
    #[error("zero-length frontier vector")]
    ZeroFrontierVector,
    #[error("start voxel {0:?} is occupied")]
    StartOccupied([i32; 3]),
    #[error("path is empty")]
    EmptyPath,
    #[error("infeasible input bounds: {0}")]
    InfeasibleBounds(String),
    #[error("no previous plan to repair")]
    NoPlan,
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.into(),
        reason: reason.into(),
    }
}

impl Error {
    /// Prefixes the parameter name of an invalid-parameter error with the
    /// config section it came from.
    pub fn in_section(self, section: &str) -> Self {
        match self {
            Error::InvalidParameter { name, reason } => Error::InvalidParameter {
                name: format!("{section}.{name}"),
                reason,
            },
            e => e,
        }
    }
}

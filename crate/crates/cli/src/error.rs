use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] qsphere::Error),

    #[error("invalid input: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Process exit status of every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    /// All checks pass.
    Pass = 0,
    /// A numerical check failed.
    Fail = 1,
    /// The input was rejected.
    Invalid = 2,
}

impl CliError {
    /// Input errors exit with 2, numerical failures with 1.
    pub fn exit_status(&self) -> ExitStatus {
        use qsphere::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Json(_) | CliError::Csv(_) => {
                ExitStatus::Invalid
            }
            CliError::Core(e) => match e {
                E::NotAdmissible { .. }
                | E::DegenerateRatio { .. }
                | E::CriticalCase
                | E::SymmetryViolation { .. }
                | E::InvalidInput(_)
                | E::Json(_) => ExitStatus::Invalid,
                E::QuadratureFailure(_)
                | E::TailOverflow { .. }
                | E::NonPositiveConformalFactor { .. }
                | E::NewtonDiverged { .. } => ExitStatus::Fail,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

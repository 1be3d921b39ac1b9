use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Numeric(#[from] intermittent::Error),

    #[error("{failed} acceptance criteria failed")]
    AcceptanceFailed { failed: usize },
}

impl CliError {
    /// 1 for configuration problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use intermittent::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numeric(e) => match e {
                E::Domain { .. }
                | E::InvalidParameter(_)
                | E::InvalidBranches(_)
                | E::MeshMisaligned { .. }
                | E::EmptyWindow { .. }
                | E::BoxOverflow(_) => 1,
                E::NonConvergence { .. } | E::Censored { .. } | E::NonPositiveValues { .. } => 2,
            },
            CliError::AcceptanceFailed { .. } => 2,
        }
    }
}

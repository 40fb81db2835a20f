use std::io;

/// Failures surfaced by the harness and the command line tool.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] drkf_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    /// Process exit status: 2 for infeasible problems, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        use drkf_core::Error as E;
        match self {
            Self::Core(E::Infeasible | E::OrderCapExceeded(_) | E::GammaTooSmall { .. }) => 2,
            _ => 1,
        }
    }
}

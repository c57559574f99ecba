use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] ifs_core::Error),
    #[error("trajectory aborted by the Zeno guard at t = {0}")]
    Zeno(f64),
    #[error("audit mismatch: {0}")]
    Audit(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2: bad input, 3: Zeno abort, 4: audit mismatch, 1: anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) | CliError::Core(ifs_core::Error::ScenarioInvalid(_)) => 2,
            CliError::Zeno(_) => 3,
            CliError::Audit(_) => 4,
            _ => 1,
        }
    }
}

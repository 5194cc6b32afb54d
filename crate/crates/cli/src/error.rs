use std::process::ExitCode;

use thiserror::Error;

use gcnpipe_core::{EngineError, GraphError, PerfError, ReduceError, SimError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{0}")]
    Diverged(String),
    #[error("acceptance: {0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Config(_) => 1,
            Self::Data(_) | Self::Acceptance(_) => 2,
            Self::Diverged(_) => 3,
        })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<ReduceError> for CliError {
    fn from(e: ReduceError) -> Self {
        match e {
            ReduceError::Config(m) => Self::Config(m),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Diverged { .. } => Self::Diverged(e.to_string()),
            EngineError::Config(m) => Self::Config(m),
            EngineError::Reduce(r) => r.into(),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<PerfError> for CliError {
    fn from(e: PerfError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invalid(m) => Self::Config(m),
            SimError::Stream(m) => Self::Data(m),
        }
    }
}

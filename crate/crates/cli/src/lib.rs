//! Command-line pipeline: simulate, build the Markov process, solve the
//! control problem, plot, validate.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use bmdp_core::schedule::ScheduleError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Io(_) => 5,
            CliError::Data(_) => 6,
            CliError::Validation(_) => 7,
        }
    }
}

impl From<ScheduleError> for CliError {
    fn from(e: ScheduleError) -> Self {
        let msg = e.to_string();
        match e {
            ScheduleError::Profile { source, .. } => match CliError::from(*source) {
                CliError::Infeasible(_) => CliError::Infeasible(msg),
                CliError::Io(_) => CliError::Io(msg),
                CliError::Config(_) => CliError::Config(msg),
                _ => CliError::Data(msg),
            },
            ScheduleError::Infeasible { .. } | ScheduleError::Solver { .. } => CliError::Infeasible(msg),
            ScheduleError::Io(_) => CliError::Io(msg),
            ScheduleError::Config(_) => CliError::Config(msg),
            _ => CliError::Data(msg),
        }
    }
}

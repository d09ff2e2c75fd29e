use std::fmt;

use sublime_core::corpus::CorpusError;
use sublime_core::experiment::ExperimentError;

/// Process exit status per failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Other = 1,
    Schema = 2,
    Sampling = 3,
    Fidelity = 4,
    Redundancy = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn new(code: ExitCode, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            code: self.code,
            error: self.error.context(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(ExitCode::Other, e)
    }
}

/// Loading a result matrix: rows that do not line up with the benchmark are
/// a fidelity failure, anything else is a schema failure.
pub fn results_error(e: CorpusError) -> CliError {
    let code = match e {
        CorpusError::IncompleteMatrix { .. } | CorpusError::UnknownSample { .. } => ExitCode::Fidelity,
        _ => ExitCode::Schema,
    };
    CliError::new(code, e)
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::new(ExitCode::Schema, e)
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::TextStats(_) => ExitCode::Schema,
            ExperimentError::Fidelity(_) | ExperimentError::Misaligned(_) => ExitCode::Fidelity,
            ExperimentError::Redundancy(_) => ExitCode::Redundancy,
            _ => ExitCode::Sampling,
        };
        Self::new(code, e)
    }
}

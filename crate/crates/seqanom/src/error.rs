use std::io;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] seqanom_core::Error),
    #[error("degenerate report: {0}")]
    Degenerate(String),
    #[error("calibration failed: {0}")]
    CalibrationFailure(String),
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn config(line: Option<usize>, message: impl Into<String>) -> Self {
        HarnessError::Config { line, message: message.into() }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid source model: {0}")]
    InvalidModel(String),
    #[error("observation {0} is outside the common support of the hypotheses")]
    Domain(f64),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("{0} summary is undefined for this set")]
    UndefinedSummary(&'static str),
    #[error("{sets} candidate anomaly sets exceed the cap of {cap}")]
    CombinatorialBlowup { sets: u128, cap: u128 },
    #[error("unsupported sampling rule: {0}")]
    UnsupportedRule(String),
}

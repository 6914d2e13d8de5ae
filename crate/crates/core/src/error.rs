use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("malformed state string {text:?}: {reason}")]
    State { text: String, reason: String },
    #[error("unknown or out-of-range action {0:?}")]
    Action(String),
    #[error("invalid state: {0}")]
    Invalid(String),
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
}

impl DomainError {
    pub(crate) fn state(text: &str, reason: impl Into<String>) -> Self {
        Self::State {
            text: text.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {reason}")]
    Line { path: String, line: usize, reason: String },
    #[error("{path}:{line}: {source}")]
    State {
        path: String,
        line: usize,
        #[source]
        source: DomainError,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Autodiff(#[from] autodiff::AutodiffError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("empty current instruction")]
    EmptyInstruction,
    #[error("model was built for domain {expected:?}, not {actual:?}")]
    DomainMismatch { expected: String, actual: String },
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("malformed model manifest: {0}")]
    Manifest(String),
    #[error("turn {turn} out of range for an interaction with {turns} turns")]
    TurnOutOfRange { turn: usize, turns: usize },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Autodiff(#[from] autodiff::AutodiffError),
    #[error("non-finite gradient at epoch {epoch}, batch starting at example {example}")]
    NonFiniteGradient { epoch: usize, example: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no training examples")]
    EmptyDataset,
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid TOML: {0}")]
    Parse(String),
    #[error("config schema violation: {0}")]
    Schema(String),
    #[error("{0}")]
    Invalid(String),
    #[error("no domain given on the command line or in the config file")]
    MissingDomain,
}

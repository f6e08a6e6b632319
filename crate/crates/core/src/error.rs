use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown distribution family `{0}`")]
    UnknownFamily(String),

    #[error("family `{family}` takes {expected} argument(s), got {got}")]
    FamilyArity {
        family: String,
        expected: usize,
        got: usize,
    },

    #[error("mixture weights must be positive and sum to 1 (sum = {0})")]
    MixtureWeights(f64),

    #[error("invalid truncation bounds [{lower}, {upper}]: {reason}")]
    Truncation {
        lower: f64,
        upper: f64,
        reason: String,
    },

    #[error("expected {expected} parameter value(s), got {got}")]
    ParameterArity { expected: usize, got: usize },

    #[error("parameter out of domain for `{family}`: {message}")]
    ParameterDomain { family: String, message: String },

    #[error("probability {0} outside (0, 1)")]
    Probability(f64),

    #[error("invalid edge list: {0}")]
    Edges(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Neyman modified statistic undefined: bin {bin} has zero observed count")]
    ZeroObservedCount { bin: usize },

    #[error("no admissible binning scheme: {0}")]
    NoAdmissibleScheme(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

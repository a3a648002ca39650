use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid disorder: {0}")]
    InvalidDisorder(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("index {index} out of range 0..={max}")]
    OutOfRange { index: usize, max: usize },
    #[error("ruin probability needs a < b <= c, got a={a}, b={b}, c={c}")]
    BadOrdering { a: usize, b: usize, c: usize },
    #[error("disorder sequence has {have} sites, need {need}")]
    ShortDisorder { have: usize, need: usize },
    #[error(
        "step budget of {budget} exhausted before absorption at {target} (replica {replica:?})"
    )]
    StepBudget {
        budget: u64,
        target: usize,
        replica: Option<u64>,
    },
    #[error("brute force enumeration limited to n <= {max}, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("need at least {min} replicas, got {got}")]
    TooFewReplicas { min: usize, got: usize },
    #[error("no bracket found for h in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

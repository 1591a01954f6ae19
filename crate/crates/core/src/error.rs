use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lacunarity violated at n={n}: a_(n+1)/a_n = {ratio} < declared ratio {declared}")]
    LacunarityViolation {
        n: usize,
        ratio: String,
        declared: String,
    },

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("supplied digits insufficient: need {needed} fractional digits for N={n}, have {supplied}")]
    InsufficientDigits {
        n: usize,
        needed: u64,
        supplied: u64,
    },

    #[error("alpha*a_{n} lies within the error radius of an integer even at doubled precision")]
    NearIntegerAmbiguity { n: usize },

    #[error("support too wide for direct evaluation: N={n} must exceed 2L={two_l}")]
    SupportTooWide { n: usize, two_l: f64 },

    #[error("cost guard exceeded: {0}")]
    CostGuardExceeded(String),

    #[error("test function family `{0}` decays too slowly for a certified spectral tail")]
    SlowDecay(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("predicted cost {predicted_seconds:.1}s exceeds budget {budget_seconds:.1}s")]
    BudgetExceeded {
        predicted_seconds: f64,
        budget_seconds: f64,
    },

    #[error("{count} boundary-ambiguous decisions could not be certified")]
    BoundaryAmbiguous { count: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid site probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("Gamma function pole: argument {argument} at index {index} is not positive")]
    Domain { index: usize, argument: f64 },

    #[error("torus side {0} is unsupported (need N >= 3)")]
    UnsupportedTorus(usize),

    #[error("invalid neighborhood: {0}")]
    InvalidNeighborhood(String),

    #[error("enumeration budget of {budget} nodes exceeded; use the Monte Carlo estimator instead")]
    Budget { budget: u64 },

    #[error("enumeration size cap {cap} reached by the minimizer; raise the cap")]
    SizeCap { cap: usize },

    #[error("gamma estimate failed: no simple exit in {trials} trials")]
    EstimateFailed { trials: u64 },

    #[error("gamma estimation failed at site {site:?} (environment seed {env_seed:?}): {reason}")]
    GammaAtSite {
        site: Vec<i32>,
        env_seed: Option<u64>,
        reason: String,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("stationary solve did not converge: residual {residual:e} after {sweeps} sweeps")]
    Convergence { residual: f64, sweeps: u64 },

    #[error("invalid experiment configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate spread: {0}")]
    DegenerateSpread(String),

    #[error("site budget of {budget} distinct sites exceeded")]
    SiteBudget { budget: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

impl Error {
    /// Whether the error stems from invalid input parameters rather than
    /// from a failure during computation.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::InvalidWeights(_)
                | Error::InvalidProbabilities(_)
                | Error::Domain { .. }
                | Error::UnsupportedTorus(_)
                | Error::InvalidNeighborhood(_)
                | Error::InvalidGraph(_)
                | Error::Dimension { .. }
                | Error::Config(_)
        )
    }
}

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state space needs at least 2 states, got {0}")]
    TooFewStates(usize),

    #[error("duplicate state label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown state label `{0}`")]
    UnknownState(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("objects are defined on different state spaces")]
    SpaceMismatch,

    #[error("invalid rate k({from}, {to}) = {value}")]
    InvalidRate { from: String, to: String, value: f64 },

    #[error("edge ({from}, {to}) listed more than once")]
    DuplicateEdge { from: String, to: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rate graph is not strongly connected")]
    NotIrreducible,

    #[error("edge graph is disconnected")]
    DisconnectedGraph,

    #[error("rates are not detailed balanced (largest flux imbalance {0:e})")]
    NotDetailedBalance(f64),

    #[error("local detailed balance violated on edge ({from}, {to}): {detail}")]
    LocalDetailedBalanceViolated {
        from: String,
        to: String,
        detail: String,
    },

    #[error("stationary solve failed: {0}")]
    SolverFailure(String),

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("time step {step:e} underflows against horizon {horizon:e}")]
    StepSizeUnderflow { step: f64, horizon: f64 },

    /// The supremum defining the rate function is approached only as the
    /// log-density diverges. `supremum` is the extrapolated limit.
    #[error(
        "no interior maximizer ({zero_states} state(s) outside the support); supremum = {supremum}"
    )]
    NoInteriorMaximizer { supremum: f64, zero_states: usize },

    #[error(
        "optimality certificate failed: eigenvalue residual {eigenvalue:e}, \
         mean residual {mean:e}, stationarity residual {stationarity:e}"
    )]
    CertificateFailed {
        eigenvalue: f64,
        mean: f64,
        stationarity: f64,
    },

    #[error("constraint sigma(mu) = beta*E*<v> has no solution at variance {variance}")]
    ConstraintInfeasible { variance: f64 },

    #[error("Feynman-Kac exponent range {0} exceeds 700; rescale V")]
    OverflowGuard(f64),

    #[error("NaN produced while computing {0}")]
    NotANumber(&'static str),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SolverFailure(_)
                | Error::SolveFailure(_)
                | Error::StepSizeUnderflow { .. }
                | Error::NoInteriorMaximizer { .. }
                | Error::CertificateFailed { .. }
                | Error::OverflowGuard(_)
                | Error::NotANumber(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use alloc::string::String;

/// Which of the two mediation regressions an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Equation {
    /// `M ~ 1 + X`
    Mediator,
    /// `Y ~ 1 + M + X`
    Outcome,
    /// `M ~ 1` (null model for the X -> M path)
    MediatorNull,
    /// `Y ~ 1 + X` (null model for the M -> Y path)
    OutcomeNull,
}

impl core::fmt::Display for Equation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Equation::Mediator => "mediator equation (M ~ 1 + X)",
            Equation::Outcome => "outcome equation (Y ~ 1 + M + X)",
            Equation::MediatorNull => "mediator null equation (M ~ 1)",
            Equation::OutcomeNull => "outcome null equation (Y ~ 1 + X)",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical routine did not converge: {0}")]
    NonConvergence(String),

    #[error("moment of order {order} is undefined for nu = {nu} (requires nu > {order})")]
    MomentUndefined { order: u32, nu: f64 },

    #[error("posterior is improper: n = {n} observations must exceed k = {k} coefficients")]
    ImproperPosterior { n: usize, k: usize },

    #[error("design matrix is rank deficient (rank {rank} < {k} columns)")]
    RankDeficient { rank: usize, k: usize },

    #[error("response lies in the column space of the design matrix (zero residual)")]
    DegenerateResponse,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("design matrix has no intercept column")]
    NoIntercept,

    #[error("log posterior is not finite at the initial point")]
    NonFiniteLogPost,

    #[error("insufficient draws: {0}")]
    InsufficientDraws(String),

    #[error("sample covariance of the posterior draws is not positive definite")]
    DegenerateCovariance,

    #[error("need at least {needed} null Bayes factors for target FPR {target}, got {got}")]
    InsufficientNullRuns { needed: usize, got: usize, target: f64 },

    #[error("{equation}: {source}")]
    InEquation {
        equation: Equation,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn in_equation(self, equation: Equation) -> Self {
        Error::InEquation { equation, source: alloc::boxed::Box::new(self) }
    }

    /// The innermost error, with equation labels stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::InEquation { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

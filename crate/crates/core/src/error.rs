use thiserror::Error;

/// Errors raised by the certificate engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncated tail mass {tail:e} exceeds 1e-10 of total mass {mass:e}")]
    TailMassTooLarge { tail: f64, mass: f64 },

    #[error("drift ratio of e^(a|x|^b) is singular at the origin for b < 2")]
    SingularOrigin,

    #[error("no Lyapunov witness validated: {0}")]
    NoWitnessFound(String),

    #[error("infimum of phi is not bounded below on the tail: {0}")]
    UnboundedBelow(String),

    #[error("xi(t) diverges at t = {t:e} inside the integration range")]
    XiDiverges { t: f64 },

    #[error("F is not invertible at target {target:e} (F(u*) = {floor:e})")]
    NotInvertible { target: f64, floor: f64 },

    #[error("case premise not checked: {0}")]
    CasePremiseUnchecked(String),

    #[error("absolute mode requested for a certificate with unnormalized constants {0:?}")]
    ModeMismatch(Vec<String>),

    #[error("eigensolver failure: {0}")]
    SolverFailure(String),

    #[error("certificate route rejected: {0}")]
    RouteRejected(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical parameter violates its invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown Hamiltonian kind `{0}`")]
    UnknownKind(String),

    #[error("initial state must be normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("state dimension {got} does not match {kind} (dimension {expected})")]
    DimensionMismatch { kind: &'static str, expected: usize, got: usize },

    /// The adaptive integrator could not make progress.
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("operation requires zero one-photon detuning (delta = {delta})")]
    NonzeroDetuning { delta: f64 },

    /// Parameters sit on a critical point where dressed states cross.
    #[error("critical point: {0}")]
    CriticalPoint(String),

    #[error("cubic dressed-energy formula out of domain: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Envelope area leaves the state fully in `|r>`; the phase is undefined.
    #[error("full transfer to the Rydberg state (cos(S/2) = {cos_half_area:e})")]
    FullTransfer { cos_half_area: f64 },

    #[error(
        "no sign change of f - target in [{lo}, {hi}] (scanned f from {f_first} to {f_last})"
    )]
    Bracketing { lo: f64, hi: f64, f_first: f64, f_last: f64 },

    #[error("root finder did not converge: {0}")]
    NoConvergence(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

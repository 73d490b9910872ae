use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a physical formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid value at index {index}: {message}")]
    InvalidAt { index: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    /// No spinful site survived generation.
    #[error("empty environment: no spinful 13C site was drawn")]
    EmptyEnvironment,

    /// omega_k = 0, so the amplitude a_k is undefined.
    #[error(
        "degenerate spin {index}: omega + Azz cancels with zero transverse coupling; \
         a small change of the applied field rectifies this"
    )]
    DegenerateSpin { index: usize },

    /// A caller broke an operation's contract (wrong grid kind, mismatched field, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("resource limit: {spins} spins exceeds the dense oracle cap of {cap}")]
    Resource { spins: usize, cap: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

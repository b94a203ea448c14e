use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("capability missing: {0}")]
    Capability(String),

    /// Numerical method exhausted its budget; carries the best estimate found.
    #[error("no convergence: {message} (best estimate {best})")]
    NoConvergence { message: String, best: f64 },

    #[error("function returned NaN at {at}")]
    NotANumber { at: f64 },

    #[error("target {target} not bracketed by [{lo}, {hi}] (f values {flo}, {fhi})")]
    NotBracketed {
        target: f64,
        lo: f64,
        hi: f64,
        flo: f64,
        fhi: f64,
    },

    #[error("function is not monotone on the bracket: {0}")]
    NotMonotone(String),

    #[error("underflow: {0}; evaluate in the log domain")]
    Underflow(String),

    /// An integral over [0, ∞) diverges (heavy tail).
    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("not available: {0}")]
    NotAvailable(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors shared by all solver modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad dimensions, unparsable files, invalid parameters.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A structural mismatch between two objects that were supposed to agree
    /// (e.g. a cavity vector indexed by a different edge set).
    #[error("structural error: {0}")]
    Structural(String),

    /// The requested size N admits no k-regular graph for this spec.
    #[error("infeasible size N={n}: {reason}")]
    Infeasible { n: u64, reason: String },

    /// The operation's hypotheses are not met by this parameter regime.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// Graph sampling failed to produce a simple graph within the retry budget.
    #[error("sampling failed after {resamples} resamples (block {block}): {detail}")]
    SamplingFailed {
        block: String,
        resamples: u32,
        detail: String,
    },

    /// Exact enumeration or tree construction beyond the supported size.
    #[error("size limit exceeded: {0}")]
    TooLarge(String),

    /// A numeric procedure failed to reach its accuracy contract.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

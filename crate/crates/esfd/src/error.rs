//! Error type shared by all modules of the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by estimator, sampling and experiment operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation
    /// (non-positive Gamma argument, zero dimension, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller combined inputs in an unsupported way (dimension
    /// mismatch, unknown objective name, R(theta) = 0 where it must not
    /// be, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// An objective returned a non-finite value.
    #[error("objective '{objective}' returned non-finite value {value} for sample {index}")]
    NonFiniteEvaluation {
        objective: String,
        index: SampleIndex,
        value: f64,
    },

    /// Two algebraically identical computation routes disagreed beyond
    /// tolerance, indicating a numerical defect.
    #[error("numerical consistency check failed: {0}")]
    Inconsistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Identifies which evaluation inside a batch produced a bad value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleIndex {
    /// The evaluation of R at the batch center theta.
    Center,
    /// The evaluation of R at theta + epsilon_i.
    Perturbed(usize),
}

impl std::fmt::Display for SampleIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleIndex::Center => write!(f, "center"),
            SampleIndex::Perturbed(i) => write!(f, "{i}"),
        }
    }
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}

/// True for finite, strictly positive floats (rejects NaN and inf).
pub(crate) fn positive_real(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TailError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TailError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    /// Order-statistic spacings collapse (zero or sign-flipped ratio).
    #[error("degenerate spacing among the top order statistics")]
    DegenerateSpacing,

    /// (H1)^2 == H2, which includes all-equal top samples.
    #[error("degenerate log-moments among the top order statistics")]
    DegenerateMoments,

    #[error("non-positive sample among the top {0} order statistics")]
    NonPositiveSample(usize),

    #[error("estimation failed: every group was degenerate ({degenerate} degenerate)")]
    EstimationFailed { degenerate: usize },

    #[error("ill-conditioned linear system: {0}")]
    IllConditioned(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl TailError {
    /// Errors that come from the data rather than the caller: skipped and
    /// counted by split averaging and cross-tail estimation.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            TailError::DegenerateSpacing
                | TailError::DegenerateMoments
                | TailError::NonPositiveSample(_)
        )
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        TailError::Domain(msg.into())
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TnbsError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TnbsError {
    #[error("dimension mismatch: {what} ({left} vs {right})")]
    DimensionMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("dense tensor of {elements} elements exceeds the cap of {cap}")]
    CapExceeded { elements: usize, cap: usize },

    #[error("canonical site mismatch: expected {expected}, found {found:?}")]
    CanonicalSite {
        expected: usize,
        found: Option<usize>,
    },

    #[error("degenerate scaling: {0} signal is constant")]
    DegenerateScaling(&'static str),

    #[error("insufficient data: {needed} samples needed, {available} available")]
    InsufficientData { needed: usize, available: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl TnbsError {
    /// True for failures that originate in the numerics rather than in
    /// user-supplied data or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(self, TnbsError::Numerical(_))
    }

    pub(crate) fn mismatch(what: &'static str, left: usize, right: usize) -> Self {
        TnbsError::DimensionMismatch { what, left, right }
    }
}

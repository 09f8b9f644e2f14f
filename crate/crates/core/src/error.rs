use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two shapes that must agree do not.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        /// Operation or field being checked.
        context: &'static str,
        /// Required size.
        expected: usize,
        /// Supplied size.
        found: usize,
    },
    /// An input that must be non-empty was empty.
    #[error("empty input: {0}")]
    Empty(&'static str),
    /// Input is well-formed but numerically degenerate.
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    /// Cholesky hit a non-positive pivot.
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite {
        /// Index of the failing pivot.
        pivot: usize,
    },
    /// A class has no training samples.
    #[error("class {class} has no training samples")]
    MissingClass {
        /// The absent class.
        class: usize,
    },
    /// A label lies outside `[0, C)`.
    #[error("label {label} out of range for {classes} classes")]
    Label {
        /// Offending label.
        label: i64,
        /// Number of classes.
        classes: usize,
    },
    /// Training produced a non-finite loss.
    #[error("training diverged at step {step}: non-finite loss")]
    Divergence {
        /// Zero-based optimizer step.
        step: usize,
    },
    /// Too few samples for the requested statistic.
    #[error("insufficient data: need at least {needed} samples, found {found}")]
    InsufficientData {
        /// Minimum required.
        needed: usize,
        /// Available.
        found: usize,
    },
    /// Argument outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Convenience alias.
pub type Result<T> = core::result::Result<T, Error>;

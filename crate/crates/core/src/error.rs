use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cutoff {cutoff} for mode {mode}: cutoffs must be at least 1")]
    InvalidCutoff { mode: usize, cutoff: usize },
    #[error("space needs at least one mode")]
    NoModes,
    #[error("cutoff list has {got} entries for {expected} modes")]
    CutoffCount { expected: usize, got: usize },
    #[error("dimension {dim} exceeds the memory budget of {budget} basis states")]
    MemoryBudget { dim: usize, budget: usize },
    #[error("mode index {mode} out of range for {num_modes} modes")]
    ModeOutOfRange { mode: usize, num_modes: usize },
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("truncation tail mass {tail:.3e} exceeds threshold {threshold:.3e}")]
    TruncationTail { tail: f64, threshold: f64 },
    #[error("singular pulse at t = {t}: sin(phi + alpha) vanishes")]
    SingularPulse { t: f64 },
    #[error("singular detuning at t = {t}: sin(2 theta) vanishes with nonzero numerator")]
    SingularDetuning { t: f64 },
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget { t: f64, max_steps: usize },
    #[error("resolvent is singular at t = {t}")]
    SingularResolvent { t: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.into(), reason: reason.into() }
    }

    /// Configuration problems are distinguished from runtime failures by the CLI exit code.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParameter { .. }
                | Error::InvalidCutoff { .. }
                | Error::NoModes
                | Error::CutoffCount { .. }
                | Error::MemoryBudget { .. }
                | Error::ModeOutOfRange { .. }
                | Error::TruncationTail { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

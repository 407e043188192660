//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("empty tail: floor({n_max} / {gamma}) = 0 leaves the last class without instances")]
    EmptyTail { n_max: usize, gamma: f64 },

    #[error("class {class} has a nonpositive count")]
    ZeroClass { class: usize },

    #[error("class {class} needs {need} instances but the source only has {have}")]
    Coverage { class: usize, need: usize, have: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("bias is undefined for a single class")]
    DegenerateClass,

    #[error("class {class} has frequency 1, bias is infinite")]
    InfiniteBias { class: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("class {class} has negative weight {weight}")]
    InvalidWeight { class: usize, weight: f64 },

    #[error("lambda must be >= 1, got {lambda}")]
    InvalidLambda { lambda: f64 },

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("non-finite value in tensor `{tensor}`")]
    NumericalFailure { tensor: String },

    #[error("schedule exhausted: step {step} beyond total {total}")]
    ScheduleExhausted { step: usize, total: usize },

    #[error("optimizer error: {0}")]
    Optimizer(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelRange { label: usize, classes: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("per-class optimum unbounded: eta[{class}] = {eta}")]
    UnboundedOptimum { class: usize, eta: f64 },

    #[error("oracle evaluation not finite at coordinate {coordinate}")]
    OracleFailure { coordinate: usize },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("log-odds vector must have at least two entries (free + one class), got {0}")]
    TooFewClasses(usize),
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("vector length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid categorical distribution: {0}")]
    InvalidCategorical(String),
    #[error("point {point:?} lies outside the map bounds")]
    OutOfBounds { point: [f64; 3] },
    #[error("class {class} is not a valid object class (expected 1..={max})")]
    InvalidClass { class: usize, max: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("measurement inconsistent with sensor: {0}")]
    InvalidMeasurement(String),
    #[error("no path to goal")]
    NoPath,
    #[error("no reachable frontiers left")]
    Exhausted,
    #[error("malformed octree stream: {0}")]
    Decode(String),
}

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("invalid mode index {0}: modes start at 1")]
    InvalidMode(i64),
    #[error("grid of {grid} points cannot resolve {modes} modes")]
    Resolution { grid: usize, modes: usize },
    #[error("non-finite coefficient at position {index}")]
    NonFinite { index: usize },
    #[error("a field needs at least one mode")]
    Empty,
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

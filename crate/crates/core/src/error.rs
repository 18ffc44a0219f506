use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schedule infeasible: {0}")]
    ScheduleInfeasible(String),

    #[error("slot {t} precedes the first sample time {first}")]
    OutOfRange { t: usize, first: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid iota {iota}: must lie in 1..={max}")]
    InvalidIota { iota: usize, max: usize },

    #[error("contraction constants underflow: {0}")]
    Underflow(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dissemination from slot {start} did not complete within {available} supplied slots")]
    InsufficientHorizon { start: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("divergence at slot {slot}: {detail}")]
    Divergence { slot: usize, detail: String },

    #[error("oracle failed at slot {slot} (seed {seed}): residual {residual:e} after {iterations} iterations")]
    OracleFailure {
        slot: usize,
        seed: u64,
        residual: f64,
        iterations: usize,
    },

    #[error("misaligned traces: {0}")]
    Misaligned(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("plot error: {0}")]
    Plot(String),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::InvalidIota { .. }
            | Error::InvalidNetwork(_)
            | Error::ScheduleInfeasible(_) => 2,
            Error::Divergence { .. } => 3,
            Error::OracleFailure { .. } => 4,
            _ => 1,
        }
    }
}

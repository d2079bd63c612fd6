use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates one of its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A link was asked for a latency while it has no downlink bandwidth.
    #[error("unservable link: AV {av} has no subchannels at SBS {sbs}")]
    Unservable { av: usize, sbs: usize },

    #[error("pmf step mismatch: {0} ms vs {1} ms")]
    StepMismatch(f64, f64),

    #[error("AV {0} is not in the queue")]
    NotQueued(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The offer/reject loop exceeded its hard round cap. Convergence is
    /// guaranteed for well-formed inputs, so this points at a bug.
    #[error("matching did not converge within {0} rounds")]
    RoundCap(usize),

    #[error("instance too large for exhaustive search: {0} candidate deviations exceed limit {1}")]
    TooLarge(u128, u128),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

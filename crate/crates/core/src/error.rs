use thiserror::Error;

/// Errors shared by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument left the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter failed validation before any computation started.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical method left its stability envelope.
    #[error("numerics error: {0}")]
    Numerics(String),

    /// A simulated tree would have grown past the node cap.
    #[error("population cap exceeded: tree would grow past {limit} nodes")]
    PopulationCap { limit: usize },

    /// Conditioning on survival when the survival probability is (numerically) zero.
    #[error("degenerate conditioning: survival probability {survival:e} below threshold")]
    DegenerateConditioning { survival: f64 },

    /// Exact polynomial arithmetic would need more coefficients than allowed.
    #[error("coefficient budget exceeded: need {needed}, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    /// Two histograms with different axes cannot be combined.
    #[error("histogram axis mismatch: {0}")]
    AxisMismatch(String),

    /// Not enough observations for the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

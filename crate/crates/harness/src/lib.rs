//! Experiment engine around the estimation core: scenario generation,
//! seeded Monte Carlo benchmarking of the detection algorithms, a classical
//! per-cell CFAR baseline, recorded-cube ingestion and radar-parameter
//! conversion. The `lse` binary exposes it all as subcommands.

pub mod classical;
pub mod config;
pub mod experiment;
pub mod radar;
pub mod records;
pub mod scenario;

/// Errors raised by the harness layers.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Configuration file or flag validation failure.
    #[error("config error: {0}")]
    Config(String),

    /// Scenario constraints cannot be satisfied.
    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    /// Requested state lies outside the radar field of view.
    #[error("out of field of view: {0}")]
    OutOfFieldOfView(String),

    /// Error propagated from the estimation core.
    #[error(transparent)]
    Core(#[from] lse_core::Error),

    /// I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Harness-wide result alias.
pub type Result<T> = std::result::Result<T, HarnessError>;

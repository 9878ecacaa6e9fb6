//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by field construction, spectral operators, the time
/// integrators and the experiment layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {context} (first at flat index {index})")]
    NonFinite { context: &'static str, index: usize },

    #[error("grid too small to host one full dyadic annulus ({0})")]
    GridTooSmall(String),

    #[error("density floor breached: min rho = {min_rho:.6e} at t = {time:.6e}")]
    DensityFloor { min_rho: f64, time: f64 },

    #[error("director degenerate: min |d| = {min_norm:.6e} < 1/2")]
    DirectorDegenerate { min_norm: f64 },

    #[error("density must stay positive (rho = 1 + a > 0): min = {0:.6e}")]
    NonPositiveDensity(f64),

    #[error("dyadic rescaling by 2^{k} would discard {lost:.3e} relative spectral mass")]
    ScaleLoss { k: i32, lost: f64 },

    #[error("non-dyadic scale request: {0}")]
    NonDyadicScale(String),

    #[error("tau = {0} outside the admissible range (0, 8/9]")]
    TauOutOfRange(f64),

    #[error("trace has too few samples for a rate fit: {have} < {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("trajectory is missing snapshots: {0}")]
    MissingSnapshots(String),

    #[error("time step {dt:.3e} exceeds the advective CFL bound {bound:.3e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unreachable initial-data target: {0}")]
    UnreachableTarget(String),

    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),

    #[error("mask {mask:#b} is not in the sector (L={sites}, N={excitations})")]
    NotInSector {
        mask: u64,
        sites: usize,
        excitations: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension {dim} exceeds the dense cap of {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("eigensolver did not converge after {iterations} matvecs (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("ground state is degenerate (gap {gap:e})")]
    DegenerateGroundState { gap: f64 },

    #[error("finite-difference step underflow at delta_h = {delta_h:e}")]
    StepUnderflow { delta_h: f64 },

    #[error("QFI maximum sits on the range edge at h = {h:e} (F_Q = {qfi})")]
    PeakAtBoundary { h: f64, qfi: f64 },

    #[error("insufficient fit window: {0}")]
    InsufficientWindow(String),

    #[error("insufficient sizes: need at least {needed}, got {got}")]
    InsufficientSizes { needed: usize, got: usize },

    #[error(
        "degenerate collapse: size L={size} contributes {points} points to the overlap window"
    )]
    DegenerateCollapse { size: usize, points: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

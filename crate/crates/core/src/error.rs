use thiserror::Error;

use crate::control::SimulationResult;

/// Errors produced by the measurement, calibration and control routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("no platform signal in the {side} band")]
    NoPlatformSignal { side: &'static str },
    #[error("degenerate ellipse fit: {0}")]
    DegenerateFit(String),
    #[error("calibration span is zero (platform and gauge medians coincide)")]
    ZeroSpan,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("gage study needs at least 2 trials, got {0}")]
    InsufficientTrials(usize),
    #[error("incomplete measurement grid: {0}")]
    IncompleteGrid(String),
    #[error("length mismatch: {left} measured vs {right} reference values")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot add a copy of the last layer before any layer exists")]
    NoPreviousLayer,
    #[error("target height already reached ({measured_um:.3} >= {target_um:.3} um)")]
    TargetReached { measured_um: f64, target_um: f64 },
    #[error("layer budget exhausted after {} steps; controller diverged", .0.trace.len())]
    LayerBudgetExhausted(Box<SimulationResult>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

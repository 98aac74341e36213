//! Laser-triangulation profilometry for extrusion-based 3D printing.
//!
//! - [`profile`]: subpixel laser-line extraction, platform baseline and
//!   track edge detection.
//! - [`ellipse`]: ellipse-specific least-squares fitting with geometric
//!   residuals (the diffusion error metric).
//! - [`measure`]: the whole per-frame pipeline.
//! - [`calib`] and [`grr`]: gauge calibration, step-height reports and gage
//!   R&R.
//! - [`synth`]: ground-truth scene and frame generation.
//! - [`control`]: closed-loop layer-thickness simulation.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive
// values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calib;
pub mod control;
pub mod ellipse;
pub mod error;
pub mod frame;
pub mod grr;
pub mod measure;
pub mod profile;
pub mod stats;
pub mod synth;

pub use calib::{
    apply_calibration, calibrate_from_gauge, step_height_report, CalibrationMap, StepReport, StepRow,
};
pub use control::{
    control_add_skip, control_proportional, control_reslice, deposit_layer, run_simulation, ControlDecision,
    LayerState, Plant, ProcessModel, SimConfig, SimulationResult, Strategy, TraceRow,
};
pub use ellipse::{fit_ellipse, Ellipse, EllipseFit};
pub use error::{Error, Result};
pub use frame::Frame;
pub use grr::{grr_study, GrrMeasurementSet, GrrRecord, GrrResult, Unit};
pub use measure::{calibrate_from_gauge_frame, measure_track, MeasureOptions, TrackMeasurement};
pub use profile::{
    detect_platform, detect_track, extract_laser_line, LaserProfile, PlatformBaseline, TrackDetection,
};
pub use synth::{
    grr_dataset, make_staircase_scenes, material_table, render_frame, surface_height, Feature, GrrSimConfig,
    MaterialModel, SceneSpec,
};

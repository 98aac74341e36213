use laserprof_core::calib::DEFAULT_GAUGE_MM;
use laserprof_core::profile::{DEFAULT_INTENSITY_FLOOR, DEFAULT_RUN_LENGTH, DEFAULT_THRESHOLD_PX};
use laserprof_core::synth::DEFAULT_PIXEL_PITCH_UM;
use laserprof_core::{calibrate_from_gauge_frame, MeasureOptions};

use super::positive;
use crate::args::CalibrateArgs;
use crate::config::{self, CalibrateConfig};
use crate::io;
use crate::Status;

pub fn run(args: &CalibrateArgs) -> anyhow::Result<Status> {
    let cfg: CalibrateConfig = config::load(args.config.as_deref())?;
    let thickness = positive(
        "gauge thickness",
        args.thickness
            .or(cfg.gauge_thickness_mm)
            .unwrap_or(DEFAULT_GAUGE_MM),
    )?;
    let options = MeasureOptions {
        intensity_floor: args
            .floor
            .or(cfg.intensity_floor)
            .unwrap_or(DEFAULT_INTENSITY_FLOOR),
        threshold_px: args
            .threshold
            .or(cfg.threshold_px)
            .unwrap_or(DEFAULT_THRESHOLD_PX),
        run_length: args.run_length.or(cfg.run_length).unwrap_or(DEFAULT_RUN_LENGTH),
        tolerate_degenerate_fit: true,
    };
    config::require_exists(&args.gauge, "gauge frame")?;
    // The pitch does not enter the calibration; any positive value will do.
    let frame = io::read_frame(&args.gauge, DEFAULT_PIXEL_PITCH_UM)?;
    let map = calibrate_from_gauge_frame(&frame, &options, thickness)?;
    io::write_json(io::open_output(args.out.as_deref())?, &map)?;
    Ok(Status::Ok)
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use laserprof_core::profile::{DEFAULT_INTENSITY_FLOOR, DEFAULT_RUN_LENGTH, DEFAULT_THRESHOLD_PX};
use laserprof_core::synth::DEFAULT_PIXEL_PITCH_UM;
use laserprof_core::{measure_track, CalibrationMap, MeasureOptions};
use rayon::prelude::*;

use super::{positive, with_pool};
use crate::args::ExtractArgs;
use crate::config::{self, config_error, ExtractConfig};
use crate::io::{self, MeasurementRow, ProfileRow};
use crate::Status;

#[derive(Debug, Clone)]
pub struct ExtractSettings {
    pub inputs: Vec<PathBuf>,
    pub options: MeasureOptions,
    pub pixel_pitch_um: f64,
    pub calibration: CalibrationMap,
    pub out: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub jobs: Option<usize>,
}

pub fn resolve(args: &ExtractArgs) -> anyhow::Result<ExtractSettings> {
    let cfg: ExtractConfig = config::load(args.config.as_deref())?;
    let pitch = positive(
        "pixel pitch",
        args.pitch
            .or(cfg.pixel_pitch_um)
            .unwrap_or(DEFAULT_PIXEL_PITCH_UM),
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
        tolerate_degenerate_fit: cfg.tolerate_degenerate_fit.unwrap_or(true),
    };
    if !(0.0..1.0).contains(&options.intensity_floor) {
        return Err(config_error(format!(
            "floor must be in [0, 1), got {}",
            options.intensity_floor
        )));
    }
    if options.run_length == 0 {
        return Err(config_error("run length must be at least 1"));
    }
    for p in &args.inputs {
        config::require_exists(p, "input")?;
    }
    let calibration = match args.calibration.as_ref().or(cfg.calibration.as_ref()) {
        Some(p) => {
            let map: CalibrationMap = config::read_json(p, "calibration")?;
            map.validate()?;
            map
        }
        None => CalibrationMap::from_pixel_pitch(pitch),
    };
    Ok(ExtractSettings {
        inputs: io::collect_inputs(&args.inputs)?,
        options,
        pixel_pitch_um: pitch,
        calibration,
        out: args.out.clone(),
        profiles: args.profiles.clone().or(cfg.profiles),
        jobs: args.jobs.or(cfg.jobs),
    })
}

/// Result of measuring one input file.
#[derive(Debug, Clone)]
pub struct FrameOutcome {
    pub row: MeasurementRow,
    pub profile: Option<Vec<ProfileRow>>,
    pub error: Option<String>,
}

pub fn process(path: &Path, s: &ExtractSettings) -> FrameOutcome {
    let id = io::frame_id(path);
    let failed = |e: anyhow::Error| FrameOutcome {
        row: MeasurementRow {
            frame_id: id.clone(),
            width_um: None,
            height_um: None,
            diffusion_um: None,
            found: false,
        },
        profile: None,
        error: Some(format!("{e:#}")),
    };
    let frame = match io::read_frame(path, s.pixel_pitch_um) {
        Ok(f) => f,
        Err(e) => return failed(e),
    };
    match measure_track(&frame, &s.options, &s.calibration) {
        Ok(m) => FrameOutcome {
            row: MeasurementRow {
                frame_id: id,
                width_um: Some(m.width_um),
                height_um: Some(m.height_um),
                diffusion_um: m.diffusion_um,
                found: m.found,
            },
            profile: s.profiles.is_some().then(|| io::profile_rows(&m.profile)),
            error: None,
        },
        Err(e) => failed(anyhow::Error::new(e).context(path.display().to_string())),
    }
}

/// Measures every input (in parallel, results in input order).
pub fn execute(s: &ExtractSettings) -> anyhow::Result<Vec<FrameOutcome>> {
    with_pool(s.jobs, || s.inputs.par_iter().map(|p| process(p, s)).collect())
}

pub fn run(args: &ExtractArgs) -> anyhow::Result<Status> {
    let settings = resolve(args)?;
    let outcomes = execute(&settings)?;
    if let Some(dir) = &settings.profiles {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for o in &outcomes {
            if let Some(rows) = &o.profile {
                let path = dir.join(format!("{}.csv", o.row.frame_id));
                io::write_csv(io::open_output(Some(&path))?, rows)?;
            }
        }
    }
    let rows: Vec<&MeasurementRow> = outcomes.iter().map(|o| &o.row).collect();
    io::write_csv_with_header(
        io::open_output(settings.out.as_deref())?,
        &io::MEASUREMENT_HEADER,
        &rows,
    )?;
    let mut status = Status::Ok;
    for o in &outcomes {
        if let Some(e) = &o.error {
            eprintln!("error: {}: {e}", o.row.frame_id);
            status = Status::DataErrors;
        }
    }
    Ok(status)
}

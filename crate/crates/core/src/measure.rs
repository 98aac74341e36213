//! Full single-frame track measurement.

use serde::{Deserialize, Serialize};

use crate::calib::{calibrate_from_gauge, CalibrationMap};
use crate::ellipse::{fit_ellipse, EllipseFit};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::profile::{
    band_width, detect_platform, detect_track, elevations, extract_laser_line, LaserProfile,
    PlatformBaseline, TrackDetection, DEFAULT_INTENSITY_FLOOR, DEFAULT_RUN_LENGTH, DEFAULT_THRESHOLD_PX,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureOptions {
    pub intensity_floor: f64,
    pub threshold_px: f64,
    pub run_length: usize,
    /// Report a flat or otherwise unfittable track as `ellipse: None`
    /// instead of failing with `DegenerateFit`.
    pub tolerate_degenerate_fit: bool,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            intensity_floor: DEFAULT_INTENSITY_FLOOR,
            threshold_px: DEFAULT_THRESHOLD_PX,
            run_length: DEFAULT_RUN_LENGTH,
            tolerate_degenerate_fit: false,
        }
    }
}

/// Everything measured on one frame.
///
/// The ellipse is fitted in micrometres: `x` is column × pixel pitch and `z`
/// the calibrated elevation above the platform, so its residuals are the
/// diffusion error directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackMeasurement {
    pub frame_id: String,
    pub profile: LaserProfile,
    pub baseline: PlatformBaseline,
    pub detection: TrackDetection,
    pub ellipse: Option<EllipseFit>,
    /// Footprint width: the fitted ellipse's chord at platform level, or the
    /// edge-to-edge width when no ellipse is available.
    pub width_um: f64,
    pub edge_width_um: f64,
    pub height_um: f64,
    /// Mean absolute geometric residual to the fitted ellipse.
    pub diffusion_um: Option<f64>,
    pub found: bool,
}

pub fn measure_track(
    frame: &Frame,
    options: &MeasureOptions,
    calibration: &CalibrationMap,
) -> Result<TrackMeasurement> {
    calibration.validate()?;
    let profile = extract_laser_line(frame, options.intensity_floor);
    let baseline = detect_platform(&profile)?;
    let detection = detect_track(&profile, &baseline, options.threshold_px, options.run_length);
    let pitch = frame.pixel_pitch_um;
    let to_um = |px: f64| calibration.apply(px) * 1000.0;
    let mut out = TrackMeasurement {
        frame_id: frame.frame_id.clone(),
        profile,
        baseline,
        detection,
        ellipse: None,
        width_um: 0.0,
        edge_width_um: 0.0,
        height_um: 0.0,
        diffusion_um: None,
        found: false,
    };
    if !detection.found {
        return Ok(out);
    }
    out.found = true;
    out.edge_width_um = detection.width_px * pitch;
    out.width_um = out.edge_width_um;
    out.height_um = to_um(detection.height_px);

    let elev = elevations(&out.profile, &out.baseline);
    let points: Vec<(f64, f64)> = (detection.left_edge..=detection.right_edge)
        .filter_map(|c| elev[c].map(|e| (c as f64 * pitch, to_um(e))))
        .collect();
    match fit_ellipse(&points) {
        Ok(fit) => {
            if let Some(chord) = fit.ellipse.chord_at_z(0.0) {
                out.width_um = chord;
            }
            out.diffusion_um = Some(fit.mean_abs_residual);
            out.ellipse = Some(fit);
        }
        Err(Error::DegenerateFit(_)) if options.tolerate_degenerate_fit => {}
        Err(e) => return Err(e),
    }
    Ok(out)
}

/// Calibration from one frame of a gauge block resting on the platform.
///
/// Platform rows come from the two outer bands, gauge rows from the middle
/// half of the detected step, away from its edges.
pub fn calibrate_from_gauge_frame(
    frame: &Frame,
    options: &MeasureOptions,
    gauge_thickness_mm: f64,
) -> Result<CalibrationMap> {
    let profile = extract_laser_line(frame, options.intensity_floor);
    let baseline = detect_platform(&profile)?;
    let det = detect_track(&profile, &baseline, options.threshold_px, options.run_length);
    if !det.found {
        return Err(Error::InvalidFrame(format!(
            "no gauge step found in frame {}",
            frame.frame_id
        )));
    }
    let cols = profile.columns();
    let band = band_width(cols);
    let platform_rows: Vec<f64> = profile
        .valid_points()
        .filter(|&(c, _)| c < band || c >= cols - band)
        .map(|(_, r)| r)
        .collect();
    let quarter = (det.right_edge - det.left_edge) / 4;
    let inner = det.left_edge + quarter..=det.right_edge - quarter;
    let gauge_rows: Vec<f64> = profile
        .valid_points()
        .filter(|(c, _)| inner.contains(c))
        .map(|(_, r)| r)
        .collect();
    calibrate_from_gauge(&platform_rows, &gauge_rows, gauge_thickness_mm)
}

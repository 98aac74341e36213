//! Two-point gauge calibration and step-height reporting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::median;

/// Thickness of the rectangular calibration gauge, millimetres.
pub const DEFAULT_GAUGE_MM: f64 = 5.0;

/// Linear elevation-pixel to millimetre mapping.
///
/// When built from a gauge scan the pixel span of the gauge is kept, so the
/// two anchors (platform and gauge top) map to `0` and `gauge_mm` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationMap {
    pub gain_mm_per_px: f64,
    pub offset_mm: f64,
    pub gauge_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span_px: Option<f64>,
}

impl CalibrationMap {
    /// Calibration implied by the nominal optics: one pixel is one pitch.
    pub fn from_pixel_pitch(pixel_pitch_um: f64) -> Self {
        Self {
            gain_mm_per_px: pixel_pitch_um / 1000.0,
            offset_mm: 0.0,
            gauge_mm: 0.0,
            span_px: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain_mm_per_px > 0.0 && self.gain_mm_per_px.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "calibration gain must be positive, got {}",
                self.gain_mm_per_px
            )));
        }
        if let Some(span) = self.span_px {
            if !(span > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "span_px must be positive, got {span}"
                )));
            }
        }
        Ok(())
    }

    /// Millimetres for an elevation in pixels.
    pub fn apply(&self, elevation_px: f64) -> f64 {
        apply_calibration(self, elevation_px)
    }
}

pub fn apply_calibration(map: &CalibrationMap, elevation_px: f64) -> f64 {
    match map.span_px {
        Some(span) => map.offset_mm + map.gauge_mm * (elevation_px / span),
        None => map.gain_mm_per_px * elevation_px + map.offset_mm,
    }
}

pub fn calibrate_from_gauge(
    platform_rows: &[f64],
    gauge_rows: &[f64],
    gauge_thickness_mm: f64,
) -> Result<CalibrationMap> {
    let platform = median(platform_rows).ok_or(Error::EmptyInput("platform rows"))?;
    let gauge = median(gauge_rows).ok_or(Error::EmptyInput("gauge rows"))?;
    if !(gauge_thickness_mm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gauge thickness must be positive, got {gauge_thickness_mm}"
        )));
    }
    let span = (platform - gauge).abs();
    if span == 0.0 {
        return Err(Error::ZeroSpan);
    }
    Ok(CalibrationMap {
        gain_mm_per_px: gauge_thickness_mm / span,
        offset_mm: 0.0,
        gauge_mm: gauge_thickness_mm,
        span_px: Some(span),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub reference_mm: f64,
    pub measured_mm: f64,
    pub deviation_mm: f64,
}

/// Measured versus reference step heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub rows: Vec<StepRow>,
    pub max_abs_deviation_mm: f64,
}

pub fn step_height_report(measured_mm: &[f64], reference_mm: &[f64]) -> Result<StepReport> {
    if measured_mm.len() != reference_mm.len() {
        return Err(Error::LengthMismatch {
            left: measured_mm.len(),
            right: reference_mm.len(),
        });
    }
    if measured_mm.is_empty() {
        return Err(Error::EmptyInput("step heights"));
    }
    let rows: Vec<StepRow> = measured_mm
        .iter()
        .zip(reference_mm)
        .map(|(&m, &r)| StepRow {
            reference_mm: r,
            measured_mm: m,
            deviation_mm: m - r,
        })
        .collect();
    let max_abs_deviation_mm = rows.iter().map(|r| r.deviation_mm.abs()).fold(0.0, f64::max);
    Ok(StepReport {
        rows,
        max_abs_deviation_mm,
    })
}

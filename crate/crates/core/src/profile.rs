//! Laser-line extraction and track detection on a single frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::stats::median;

/// Default elevation threshold for track edges, in pixels.
pub const DEFAULT_THRESHOLD_PX: f64 = 3.0;
/// Consecutive above-threshold columns that mark a track side.
pub const DEFAULT_RUN_LENGTH: usize = 3;
/// Default minimum peak intensity for a column to count as lit.
pub const DEFAULT_INTENSITY_FLOOR: f64 = 0.1;

/// Per-column subpixel laser-line position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserProfile {
    pub row_subpixel: Vec<f64>,
    pub valid: Vec<bool>,
}

impl LaserProfile {
    pub fn columns(&self) -> usize {
        self.row_subpixel.len()
    }

    pub fn get(&self, column: usize) -> Option<f64> {
        self.valid[column].then(|| self.row_subpixel[column])
    }

    /// Iterator over `(column, row)` for valid columns.
    pub fn valid_points(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_subpixel
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter_map(|(c, (&r, &ok))| ok.then_some((c, r)))
    }
}

/// Vertex offset of the parabola through `(-1, prev)`, `(0, peak)`, `(1, next)`.
/// `None` unless the parabola is strictly concave.
#[inline]
pub fn parabola_vertex(prev: f64, peak: f64, next: f64) -> Option<f64> {
    let curvature = prev - 2.0 * peak + next;
    if curvature >= 0.0 {
        return None;
    }
    Some((prev - next) / (2.0 * curvature))
}

/// Subpixel laser-line row for every column.
///
/// The peak pixel of each column (first row wins ties) and its two vertical
/// neighbours define a parabola whose vertex is the line position. Columns
/// whose peak is at most `intensity_floor`, sits on the first or last row, or
/// has a non-concave neighbourhood are marked invalid.
pub fn extract_laser_line(frame: &Frame, intensity_floor: f64) -> LaserProfile {
    let (w, h) = (frame.width(), frame.height());
    // Row-major sweep keeps memory access sequential.
    let mut best_row = vec![0usize; w];
    let mut best_val = frame.row(0).to_vec();
    for r in 1..h {
        for ((br, bv), &v) in best_row.iter_mut().zip(best_val.iter_mut()).zip(frame.row(r)) {
            if v > *bv {
                *bv = v;
                *br = r;
            }
        }
    }
    let mut row_subpixel = vec![0.0; w];
    let mut valid = vec![false; w];
    for c in 0..w {
        let r0 = best_row[c];
        let peak = best_val[c];
        row_subpixel[c] = r0 as f64;
        if peak <= intensity_floor || r0 == 0 || r0 + 1 == h {
            continue;
        }
        if let Some(delta) = parabola_vertex(frame.get(c, r0 - 1), peak, frame.get(c, r0 + 1)) {
            row_subpixel[c] = r0 as f64 + delta;
            valid[c] = true;
        }
    }
    LaserProfile { row_subpixel, valid }
}

/// Platform reference line from the two outer 1/8-width bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformBaseline {
    pub left_median: f64,
    pub right_median: f64,
    /// Column centre of the left band.
    pub left_center: f64,
    /// Column centre of the right band.
    pub right_center: f64,
}

impl PlatformBaseline {
    /// Platform row at `column`, linear through both band centres.
    pub fn baseline_at(&self, column: f64) -> f64 {
        let t = (column - self.left_center) / (self.right_center - self.left_center);
        self.left_median + (self.right_median - self.left_median) * t
    }
}

/// Width of each platform band for a frame `columns` wide.
pub fn band_width(columns: usize) -> usize {
    columns / 8
}

pub fn detect_platform(profile: &LaserProfile) -> Result<PlatformBaseline> {
    let w = profile.columns();
    let band = band_width(w);
    if band == 0 {
        return Err(Error::InvalidParameter(format!(
            "profile with {w} columns has empty platform bands"
        )));
    }
    let collect =
        |range: std::ops::Range<usize>| -> Vec<f64> { range.filter_map(|c| profile.get(c)).collect() };
    let left_median = median(&collect(0..band)).ok_or(Error::NoPlatformSignal { side: "left" })?;
    let right_median = median(&collect(w - band..w)).ok_or(Error::NoPlatformSignal { side: "right" })?;
    let half = (band as f64 - 1.0) / 2.0;
    Ok(PlatformBaseline {
        left_median,
        right_median,
        left_center: half,
        right_center: (w - band) as f64 + half,
    })
}

/// Detected track footprint in pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackDetection {
    pub left_edge: usize,
    pub right_edge: usize,
    pub center: usize,
    pub width_px: f64,
    /// Elevation above the baseline, positive upwards.
    pub height_px: f64,
    pub found: bool,
}

impl TrackDetection {
    fn not_found() -> Self {
        Self {
            left_edge: 0,
            right_edge: 0,
            center: 0,
            width_px: 0.0,
            height_px: 0.0,
            found: false,
        }
    }
}

/// Elevation of each valid column above the baseline, positive upwards.
pub fn elevations(profile: &LaserProfile, baseline: &PlatformBaseline) -> Vec<Option<f64>> {
    (0..profile.columns())
        .map(|c| profile.get(c).map(|r| baseline.baseline_at(c as f64) - r))
        .collect()
}

/// First index starting a run of `run_length` consecutive entries that are
/// `Some` and exceed `threshold`.
fn first_run_start(
    elev: impl Iterator<Item = (usize, Option<f64>)>,
    threshold: f64,
    run_length: usize,
) -> Option<usize> {
    let mut run = 0;
    let mut start = 0;
    for (c, e) in elev {
        if e.is_some_and(|e| e > threshold) {
            if run == 0 {
                start = c;
            }
            run += 1;
            if run >= run_length {
                return Some(start);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Locate the track edges with the consecutive-column rule and measure its
/// height as the median elevation of the three columns around the centre.
pub fn detect_track(
    profile: &LaserProfile,
    baseline: &PlatformBaseline,
    threshold_px: f64,
    run_length: usize,
) -> TrackDetection {
    let elev = elevations(profile, baseline);
    detect_track_in_elevations(&elev, threshold_px, run_length)
}

pub(crate) fn detect_track_in_elevations(
    elev: &[Option<f64>],
    threshold_px: f64,
    run_length: usize,
) -> TrackDetection {
    let run_length = run_length.max(1);
    let left = first_run_start(elev.iter().copied().enumerate(), threshold_px, run_length);
    let right = first_run_start(elev.iter().copied().enumerate().rev(), threshold_px, run_length);
    let (Some(left_edge), Some(right_edge)) = (left, right) else {
        return TrackDetection::not_found();
    };
    if left_edge >= right_edge {
        return TrackDetection::not_found();
    }
    let center = (left_edge + right_edge).div_ceil(2);
    let around: Vec<f64> = [center - 1, center, center + 1]
        .iter()
        .filter_map(|&c| elev.get(c).copied().flatten())
        .collect();
    let height_px = median(&around).unwrap_or(0.0);
    TrackDetection {
        left_edge,
        right_edge,
        center,
        width_px: (right_edge - left_edge) as f64,
        height_px,
        found: height_px > threshold_px,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame_from_column(col: &[f64], width: usize) -> Frame {
        let h = col.len();
        let mut data = vec![0.0; width * h];
        for r in 0..h {
            for c in 0..width {
                data[r * width + c] = col[r];
            }
        }
        Frame::new(width, h, data, "t", 10.0).unwrap()
    }

    fn column_with(values: &[(usize, f64)]) -> Vec<f64> {
        let mut col = vec![0.0; 16];
        for &(r, v) in values {
            col[r] = v;
        }
        col
    }

    #[test]
    fn symmetric_peak_is_centered() {
        let f = frame_from_column(&column_with(&[(4, 0.1), (5, 0.2), (6, 0.1)]), 16);
        let p = extract_laser_line(&f, 0.05);
        assert!(p.valid.iter().all(|&v| v));
        assert_eq!(p.row_subpixel[3], 5.0);
    }

    #[test]
    fn asymmetric_peak_closed_form() {
        let f = frame_from_column(&column_with(&[(4, 0.1), (5, 0.2), (6, 0.18)]), 16);
        let p = extract_laser_line(&f, 0.05);
        let expect = 5.0 + (0.10 - 0.18) / (2.0 * (0.10 - 2.0 * 0.20 + 0.18));
        assert!((p.row_subpixel[0] - expect).abs() < 1e-15);
        assert!((p.row_subpixel[0] - 5.333_333_333_333_333).abs() < 1e-12);
    }

    #[test]
    fn flat_column_invalid() {
        let f = frame_from_column(&[0.5; 16], 16);
        let p = extract_laser_line(&f, 0.1);
        assert!(p.valid.iter().all(|&v| !v));
    }

    #[test]
    fn floor_and_border_rules() {
        let dim = frame_from_column(&column_with(&[(4, 0.05), (5, 0.08), (6, 0.05)]), 16);
        assert!(extract_laser_line(&dim, 0.08).valid.iter().all(|&v| !v));
        let top = frame_from_column(&column_with(&[(0, 0.9), (1, 0.3)]), 16);
        assert!(extract_laser_line(&top, 0.1).valid.iter().all(|&v| !v));
        let bottom = frame_from_column(&column_with(&[(14, 0.3), (15, 0.9)]), 16);
        assert!(extract_laser_line(&bottom, 0.1).valid.iter().all(|&v| !v));
    }

    #[test]
    fn ties_go_to_smallest_row() {
        // Plateau of two equal maxima: argmax is row 5, neighbour row 6 equal,
        // vertex shifts half a pixel down.
        let f = frame_from_column(&column_with(&[(4, 0.1), (5, 0.5), (6, 0.5), (7, 0.1)]), 16);
        let p = extract_laser_line(&f, 0.05);
        assert_eq!(p.row_subpixel[0], 5.5);
    }

    fn profile(rows: &[f64]) -> LaserProfile {
        LaserProfile {
            row_subpixel: rows.to_vec(),
            valid: vec![true; rows.len()],
        }
    }

    #[test]
    fn flat_platform() {
        let b = detect_platform(&profile(&[100.0; 32])).unwrap();
        assert_eq!(b.left_median, 100.0);
        assert_eq!(b.right_median, 100.0);
        for c in 0..32 {
            assert_eq!(b.baseline_at(c as f64), 100.0);
        }
    }

    #[test]
    fn platform_median_rejects_spike() {
        let mut rows = vec![100.0; 24];
        rows[1] = 140.0;
        let b = detect_platform(&profile(&rows)).unwrap();
        assert_eq!(b.left_median, 100.0);
        assert_eq!(b.right_median, 100.0);
    }

    #[test]
    fn empty_band_errors() {
        let mut p = profile(&[100.0; 32]);
        p.valid[28..].iter_mut().for_each(|v| *v = false);
        assert_eq!(
            detect_platform(&p),
            Err(Error::NoPlatformSignal { side: "right" })
        );
    }

    #[test]
    fn no_track_on_flat_profile() {
        let p = profile(&[100.0; 64]);
        let b = detect_platform(&p).unwrap();
        assert!(!detect_track(&p, &b, 3.0, 3).found);
    }

    #[test]
    fn run_rule_skips_short_runs() {
        let t = 3.0;
        let hi = Some(t + 0.5);
        let lo = Some(0.0);
        let elev = vec![lo, lo, hi, hi, lo, hi, hi, hi, hi, lo, lo];
        let d = detect_track_in_elevations(&elev, t, 3);
        assert_eq!(d.left_edge, 5);
        assert_eq!(d.right_edge, 8);
        assert!(d.found);
    }

    #[test]
    fn invalid_columns_break_runs() {
        let hi = Some(10.0);
        let elev = vec![Some(0.0), hi, hi, None, hi, hi, hi, Some(0.0)];
        let d = detect_track_in_elevations(&elev, 3.0, 3);
        assert_eq!((d.left_edge, d.right_edge), (4, 6));
    }
}

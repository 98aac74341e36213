use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted frame side; the 1/8-width platform bands need two columns.
pub const MIN_FRAME_SIDE: usize = 16;

/// Grayscale intensity image from the triangulation camera.
///
/// Intensities are stored row-major and normalised to `[0, 1]`. Image rows
/// grow downwards, so a surface that rises moves the laser line to smaller
/// row indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    width: usize,
    height: usize,
    intensities: Vec<f64>,
    pub frame_id: String,
    /// Micrometres per pixel, equal in both directions.
    pub pixel_pitch_um: f64,
}

impl Frame {
    /// Image z-axis convention: rows increase downwards. Always true.
    pub const Z_AXIS_POINTS_DOWN: bool = true;

    pub fn new(
        width: usize,
        height: usize,
        intensities: Vec<f64>,
        frame_id: impl Into<String>,
        pixel_pitch_um: f64,
    ) -> Result<Self> {
        if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} is smaller than {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}"
            )));
        }
        if intensities.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "expected {} intensities, got {}",
                width * height,
                intensities.len()
            )));
        }
        if let Some(i) = intensities.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidFrame(format!(
                "intensity {} at index {i} outside [0, 1]",
                intensities[i]
            )));
        }
        if !(pixel_pitch_um > 0.0 && pixel_pitch_um.is_finite()) {
            return Err(Error::InvalidFrame(format!(
                "pixel pitch must be positive, got {pixel_pitch_um}"
            )));
        }
        Ok(Self {
            width,
            height,
            intensities,
            frame_id: frame_id.into(),
            pixel_pitch_um,
        })
    }

    /// All-zero frame.
    pub fn zeros(width: usize, height: usize, pixel_pitch_um: f64) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height], "zeros", pixel_pitch_um)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    #[inline]
    pub fn get(&self, column: usize, row: usize) -> f64 {
        self.intensities[row * self.width + column]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.intensities[row * self.width..(row + 1) * self.width]
    }

    pub fn column(&self, column: usize) -> Vec<f64> {
        (0..self.height).map(|r| self.get(column, r)).collect()
    }
}

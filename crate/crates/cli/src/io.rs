//! Image, CSV and JSON persistence.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use image::codecs::pnm::{GraymapHeader, PnmEncoder, PnmHeader, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};
use laserprof_core::{Frame, LaserProfile};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// File extensions accepted as frames.
pub const IMAGE_EXTENSIONS: [&str; 2] = ["pgm", "png"];

pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

/// Expands directories to their image files (sorted by name); plain files
/// are kept as given.
pub fn collect_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_image(p))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn frame_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Decodes a grayscale PGM (P5/P2) or PNG into a frame with intensities
/// normalised to [0, 1]. The decoder rescales PGM maxvals to the full 8- or
/// 16-bit range; colour PNGs are converted to luma.
pub fn read_frame(path: &Path, pixel_pitch_um: f64) -> anyhow::Result<Frame> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .with_context(|| format!("reading {}", path.display()))?;
    let format =
        image::guess_format(&bytes).with_context(|| format!("{}: unknown image format", path.display()))?;
    if !matches!(format, ImageFormat::Pnm | ImageFormat::Png) {
        bail!("{}: unsupported image format {format:?}", path.display());
    }
    let img = image::load_from_memory_with_format(&bytes, format)
        .with_context(|| format!("decoding {}", path.display()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        other => other
            .into_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
    };
    Frame::new(w, h, values, frame_id(path), pixel_pitch_um).with_context(|| format!("{}", path.display()))
}

/// Writes a frame as a 16-bit binary PGM (P5, maxval 65535).
pub fn write_pgm16(path: &Path, frame: &Frame) -> anyhow::Result<()> {
    let mut buf = Vec::with_capacity(frame.intensities().len() * 2);
    for &v in frame.intensities() {
        let q = (v * 65535.0).round() as u16;
        buf.extend_from_slice(&q.to_ne_bytes());
    }
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    let header = PnmHeader::from(GraymapHeader {
        encoding: SampleEncoding::Binary,
        height: h,
        width: w,
        maxwhite: 65535,
    });
    // Encode to memory first so a failure never leaves a truncated file.
    let mut encoded = Vec::with_capacity(buf.len() + 32);
    PnmEncoder::new(&mut encoded)
        .with_header(header)
        .write_image(&buf, w, h, ExtendedColorType::L16)
        .with_context(|| format!("encoding {}", path.display()))?;
    fs::write(path, encoded).with_context(|| format!("writing {}", path.display()))
}

/// Destination of a tabular or JSON report: a file, or stdout when absent.
pub fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            ))
        }
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

pub fn write_csv<T: Serialize>(out: impl Write, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Like [`write_csv`] but emits the header even for an empty table.
pub fn write_csv_with_header<T: Serialize>(
    out: impl Write,
    header: &[&str],
    rows: &[T],
) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    csv::Reader::from_reader(BufReader::new(file))
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(mut out: impl Write, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

/// One row of the `extract` measurement table. Numbers are empty when the
/// frame could not be processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub frame_id: String,
    pub width_um: Option<f64>,
    pub height_um: Option<f64>,
    pub diffusion_um: Option<f64>,
    pub found: bool,
}

pub const MEASUREMENT_HEADER: [&str; 5] = ["frame_id", "width_um", "height_um", "diffusion_um", "found"];

/// One column of a laser-line profile; the row is empty for invalid columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub column: usize,
    pub row_subpixel: Option<f64>,
    pub valid: bool,
}

pub fn profile_rows(profile: &LaserProfile) -> Vec<ProfileRow> {
    (0..profile.columns())
        .map(|c| ProfileRow {
            column: c,
            row_subpixel: profile.get(c),
            valid: profile.valid[c],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f64> = (0..16 * 20).map(|i| (i % 97) as f64 / 96.0).collect();
        let frame = Frame::new(16, 20, values, "x", 10.0).unwrap();
        let path = dir.path().join("x.pgm");
        write_pgm16(&path, &frame).unwrap();
        let back = read_frame(&path, 10.0).unwrap();
        assert_eq!((back.width(), back.height()), (16, 20));
        for (a, b) in frame.intensities().iter().zip(back.intensities()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
    }

    #[test]
    fn pgm_maxval_normalises() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let mut bytes = b"P5\n16 16\n100\n".to_vec();
        bytes.extend((0..256).map(|i| (i % 101) as u8));
        fs::write(&path, bytes).unwrap();
        let f = read_frame(&path, 10.0).unwrap();
        assert_eq!(f.intensities()[100], 1.0);
        assert!((f.intensities()[50] - 0.5).abs() < 1.0 / 255.0);
    }

    #[test]
    fn garbage_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        fs::write(&path, b"not an image").unwrap();
        assert!(read_frame(&path, 10.0).is_err());
    }
}

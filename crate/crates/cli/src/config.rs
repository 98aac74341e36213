//! JSON configuration files and the configuration-error marker.
//!
//! Every command accepts `--config <file>`; values given as flags override
//! the file, which overrides built-in defaults.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

pub const SCHEMA_VERSION: u32 = 1;

/// Marks an error as a configuration problem (exit code 1).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Configuration structs carry their schema version.
pub trait Versioned {
    fn schema_version(&self) -> u32;
}

/// Reads a JSON document whose shape is part of the run configuration
/// (scene, process model, calibration); any failure is a config error.
pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> anyhow::Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("invalid {what} {}: {e}", path.display())))
}

/// Loads a command config file, or the defaults when no file is given.
pub fn load<T: DeserializeOwned + Default + Versioned>(path: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let cfg: T = read_json(path, "config")?;
    if cfg.schema_version() != SCHEMA_VERSION {
        return Err(config_error(format!(
            "{}: unsupported schema_version {} (expected {SCHEMA_VERSION})",
            path.display(),
            cfg.schema_version()
        )));
    }
    Ok(cfg)
}

/// Fails with a config error unless `path` exists.
pub fn require_exists(path: &Path, what: &str) -> anyhow::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(config_error(format!("{what} {} does not exist", path.display())))
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

macro_rules! command_config {
    ($(#[$meta:meta])* $name:ident { $($(#[$fmeta:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            pub schema_version: u32,
            $($(#[$fmeta])* #[serde(default)] pub $field: Option<$ty>,)*
        }

        impl Default for $name {
            fn default() -> Self {
                Self { schema_version: default_schema(), $($field: None,)* }
            }
        }

        impl Versioned for $name {
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
        }
    };
}

command_config!(
    /// `extract` settings.
    ExtractConfig {
        intensity_floor: f64,
        threshold_px: f64,
        run_length: usize,
        pixel_pitch_um: f64,
        /// Calibration JSON; defaults to one pixel = one pitch.
        calibration: std::path::PathBuf,
        profiles: std::path::PathBuf,
        tolerate_degenerate_fit: bool,
        jobs: usize,
    }
);

command_config!(
    /// `synth` settings.
    SynthConfig {
        frames: usize,
        seed: u64,
    }
);

command_config!(
    /// `bench` settings.
    BenchConfig {
        seed: u64,
        /// Frames per material for the diffusion table.
        frames: usize,
        /// Seeds for the R&R band.
        seeds: usize,
        jobs: usize,
    }
);

command_config!(
    /// `control` settings.
    ControlConfig {
        strategy: laserprof_core::Strategy,
        model: laserprof_core::ProcessModel,
        layers: usize,
        nominal_um: f64,
        seed: u64,
        initial_offset_um: f64,
    }
);

command_config!(
    /// `calibrate` settings.
    CalibrateConfig {
        gauge_thickness_mm: f64,
        intensity_floor: f64,
        threshold_px: f64,
        run_length: usize,
    }
);

command_config!(
    /// `grr` settings.
    GrrConfig {
        unit: laserprof_core::Unit,
    }
);

//! Ground-truth synthetic scenes and frames.
//!
//! Every generator is a pure function of its inputs and seed; the analytic
//! surface heights act as the oracle for the measurement pipeline.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, MIN_FRAME_SIDE};
use crate::grr::{GrrMeasurementSet, Unit};

pub const DEFAULT_PSF_SIGMA_PX: f64 = 1.2;
pub const DEFAULT_PIXEL_PITCH_UM: f64 = 10.0;
pub const LASER_PEAK: f64 = 0.9;
/// Ground-truth step heights of the staircase benchmark, millimetres.
pub const STAIRCASE_STEPS_MM: [f64; 4] = [1.36, 2.28, 3.30, 4.28];
pub const DEFAULT_PLATEAU_WIDTH_UM: f64 = 3000.0;

/// Raised feature on the platform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Feature {
    /// Half-ellipse bead with semi-axes `width_um / 2` and `height_um`.
    Track {
        center_x: f64,
        width_um: f64,
        height_um: f64,
    },
    /// Flat-topped rectangular step.
    Plateau {
        center_x: f64,
        width_um: f64,
        height_um: f64,
    },
}

impl Feature {
    pub fn height_um(&self) -> f64 {
        match *self {
            Feature::Track { height_um, .. } | Feature::Plateau { height_um, .. } => height_um,
        }
    }

    pub fn width_um(&self) -> f64 {
        match *self {
            Feature::Track { width_um, .. } | Feature::Plateau { width_um, .. } => width_um,
        }
    }

    pub fn center_x(&self) -> f64 {
        match *self {
            Feature::Track { center_x, .. } | Feature::Plateau { center_x, .. } => center_x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub pixel_pitch_um: f64,
    pub platform_row: f64,
    /// Platform height change from the first to the last column.
    #[serde(default)]
    pub platform_roll_um: f64,
    #[serde(default)]
    pub feature: Option<Feature>,
    #[serde(default = "default_psf")]
    pub laser_psf_sigma: f64,
    #[serde(default)]
    pub diffusion_mean_abs_um: f64,
    #[serde(default)]
    pub sensor_noise_sigma: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_psf() -> f64 {
    DEFAULT_PSF_SIGMA_PX
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            pixel_pitch_um: DEFAULT_PIXEL_PITCH_UM,
            platform_row: 400.0,
            platform_roll_um: 0.0,
            feature: None,
            laser_psf_sigma: DEFAULT_PSF_SIGMA_PX,
            diffusion_mean_abs_um: 0.0,
            sensor_noise_sigma: 0.0,
            rng_seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn with_track(mut self, center_x: f64, width_um: f64, height_um: f64) -> Self {
        self.feature = Some(Feature::Track {
            center_x,
            width_um,
            height_um,
        });
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.width < MIN_FRAME_SIDE || self.height < MIN_FRAME_SIDE {
            return bad(format!(
                "scene {}x{} below {MIN_FRAME_SIDE}px",
                self.width, self.height
            ));
        }
        if !(self.pixel_pitch_um > 0.0 && self.pixel_pitch_um.is_finite()) {
            return bad(format!(
                "pixel_pitch_um must be positive, got {}",
                self.pixel_pitch_um
            ));
        }
        if !(self.laser_psf_sigma > 0.0) {
            return bad(format!(
                "laser_psf_sigma must be positive, got {}",
                self.laser_psf_sigma
            ));
        }
        if !(self.diffusion_mean_abs_um >= 0.0) {
            return bad(format!(
                "diffusion_mean_abs_um must be >= 0, got {}",
                self.diffusion_mean_abs_um
            ));
        }
        if !(self.sensor_noise_sigma >= 0.0) {
            return bad(format!(
                "sensor_noise_sigma must be >= 0, got {}",
                self.sensor_noise_sigma
            ));
        }
        if !self.platform_row.is_finite() || !self.platform_roll_um.is_finite() {
            return bad("platform row and roll must be finite".into());
        }
        if let Some(f) = &self.feature {
            if !(f.width_um() > 0.0 && f.height_um() > 0.0) {
                return bad(format!(
                    "feature width and height must be positive, got {} x {}",
                    f.width_um(),
                    f.height_um()
                ));
            }
        }
        Ok(())
    }
}

/// True surface height above the nominal platform at `column`, micrometres.
pub fn surface_height(scene: &SceneSpec, column: usize) -> f64 {
    let x = column as f64;
    let tilt = if scene.width > 1 {
        scene.platform_roll_um * x / (scene.width - 1) as f64
    } else {
        0.0
    };
    let feature = match scene.feature {
        None => 0.0,
        Some(Feature::Track {
            center_x,
            width_um,
            height_um,
        }) => {
            let u = (x - center_x) / (0.5 * width_um / scene.pixel_pitch_um);
            if u.abs() < 1.0 {
                height_um * (1.0 - u * u).sqrt()
            } else {
                0.0
            }
        }
        Some(Feature::Plateau {
            center_x,
            width_um,
            height_um,
        }) if (x - center_x).abs() <= 0.5 * width_um / scene.pixel_pitch_um => height_um,
        Some(Feature::Plateau { .. }) => 0.0,
    };
    tilt + feature
}

/// Image row of the true surface at `column`.
pub fn surface_row(scene: &SceneSpec, column: usize) -> f64 {
    scene.platform_row - surface_height(scene, column) / scene.pixel_pitch_um
}

/// Analytic ground truth written next to rendered frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scene: SceneSpec,
    pub surface_um: Vec<f64>,
    pub surface_rows: Vec<f64>,
    /// Rows actually illuminated, including the diffusion displacement.
    pub laser_rows: Vec<f64>,
}

/// Renders the laser line image of `scene`.
///
/// Per column the line is displaced by a normal diffusion offset whose mean
/// absolute value is `diffusion_mean_abs_um`, then drawn as a vertical
/// Gaussian of peak [`LASER_PEAK`]; white sensor noise is added last and the
/// result clamped to `[0, 1]`.
pub fn render_frame(scene: &SceneSpec) -> Result<Frame> {
    render_with_truth(scene).map(|(f, _)| f)
}

pub fn render_with_truth(scene: &SceneSpec) -> Result<(Frame, GroundTruth)> {
    scene.validate()?;
    let (w, h) = (scene.width, scene.height);
    let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
    let diffusion_sigma = scene.diffusion_mean_abs_um * (PI / 2.0).sqrt();
    let diffusion = Normal::new(0.0, diffusion_sigma).expect("sigma is finite and >= 0");

    let surface_um: Vec<f64> = (0..w).map(|c| surface_height(scene, c)).collect();
    let surface_rows: Vec<f64> = surface_um
        .iter()
        .map(|s| scene.platform_row - s / scene.pixel_pitch_um)
        .collect();
    let laser_rows: Vec<f64> = surface_rows
        .iter()
        .map(|&r| {
            if diffusion_sigma > 0.0 {
                r - diffusion.sample(&mut rng) / scene.pixel_pitch_um
            } else {
                r
            }
        })
        .collect();

    let mut data = vec![0.0; w * h];
    let sigma = scene.laser_psf_sigma;
    let reach = (6.0 * sigma).ceil() + 1.0;
    let inv = -0.5 / (sigma * sigma);
    for (c, &row) in laser_rows.iter().enumerate() {
        let lo = (row - reach).floor().max(0.0);
        let hi = (row + reach).ceil().min(h as f64 - 1.0);
        if hi < lo {
            continue;
        }
        for r in lo as usize..=hi as usize {
            let d = r as f64 - row;
            data[r * w + c] = LASER_PEAK * (d * d * inv).exp();
        }
    }
    if scene.sensor_noise_sigma > 0.0 {
        let noise = Normal::new(0.0, scene.sensor_noise_sigma).expect("sigma is finite");
        for v in data.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));

    let frame = Frame::new(
        w,
        h,
        data,
        format!("synth-{}", scene.rng_seed),
        scene.pixel_pitch_um,
    )?;
    let truth = GroundTruth {
        scene: scene.clone(),
        surface_um,
        surface_rows,
        laser_rows,
    };
    Ok((frame, truth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub name: String,
    pub diffusion_mean_abs_um: f64,
}

const MATERIALS: [(&str, f64); 7] = [
    ("PLA - red", 8.42),
    ("PLA - green - translucent", 7.11),
    ("PLA - dark brown - translucent", 4.43),
    ("ABS - red", 8.65),
    ("ABS - green", 11.20),
    ("ABS - gray", 6.15),
    ("ABS - white - translucent", 13.86),
];

/// Average laser-light diffusion error per polymer, micrometres.
pub fn material_table() -> Vec<MaterialModel> {
    MATERIALS
        .iter()
        .map(|&(name, d)| MaterialModel {
            name: name.to_string(),
            diffusion_mean_abs_um: d,
        })
        .collect()
}

fn material_key(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Case- and punctuation-insensitive lookup ("ABS - gray" == "abs-gray").
pub fn lookup_material(name: &str) -> Option<MaterialModel> {
    let key = material_key(name);
    material_table()
        .into_iter()
        .find(|m| material_key(&m.name) == key)
}

/// Scene used for staircase and gauge scans: tall enough for a 5 mm step
/// at the default pitch.
pub fn staircase_base() -> SceneSpec {
    SceneSpec {
        width: 640,
        height: 600,
        platform_row: 560.3,
        feature: Some(Feature::Plateau {
            center_x: 320.0,
            width_um: DEFAULT_PLATEAU_WIDTH_UM,
            height_um: 1.0,
        }),
        ..SceneSpec::default()
    }
}

/// One plateau scene per step height. The plateau position and width come
/// from `base.feature` when it is a plateau, otherwise centred and
/// [`DEFAULT_PLATEAU_WIDTH_UM`] wide.
pub fn make_staircase_scenes(step_heights_mm: &[f64], base: &SceneSpec) -> Result<Vec<SceneSpec>> {
    if step_heights_mm.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidParameter("step heights must be positive".into()));
    }
    if step_heights_mm.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("step heights must be increasing".into()));
    }
    let (center_x, width_um) = match base.feature {
        Some(Feature::Plateau {
            center_x, width_um, ..
        }) => (center_x, width_um),
        _ => (0.5 * (base.width as f64 - 1.0), DEFAULT_PLATEAU_WIDTH_UM),
    };
    Ok(step_heights_mm
        .iter()
        .map(|&h| SceneSpec {
            feature: Some(Feature::Plateau {
                center_x,
                width_um,
                height_um: h * 1000.0,
            }),
            ..base.clone()
        })
        .collect())
}

/// Parameters of the simulated pin-gauge R&R study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrrSimConfig {
    pub pin_diameter_mm: f64,
    /// Diameter tolerance band below nominal (h-fit), micrometres.
    pub pin_tolerance_um: f64,
    /// Carrier roll amplitude; each mounting draws a normal offset with
    /// `sigma = carrier_roll_um / 3`.
    pub carrier_roll_um: f64,
    /// Per-trial measurement noise sigma, micrometres.
    pub trial_noise_um: f64,
    pub parts: usize,
    pub operators: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for GrrSimConfig {
    fn default() -> Self {
        Self {
            pin_diameter_mm: 3.0,
            pin_tolerance_um: 6.0,
            carrier_roll_um: 20.0,
            trial_noise_um: 5.0,
            parts: 10,
            operators: 3,
            trials: 3,
            seed: 0,
        }
    }
}

/// Simulated repeated pin-height measurements in micrometres.
///
/// Each part gets a true diameter inside its tolerance band; every
/// measurement is a fresh mounting that adds a carrier-roll offset and
/// trial noise.
pub fn grr_dataset(cfg: &GrrSimConfig) -> Result<GrrMeasurementSet> {
    if cfg.parts == 0 || cfg.operators == 0 || cfg.trials < 2 {
        return Err(Error::InvalidParameter(format!(
            "need parts >= 1, operators >= 1, trials >= 2; got {}x{}x{}",
            cfg.parts, cfg.operators, cfg.trials
        )));
    }
    if !(cfg.carrier_roll_um >= 0.0 && cfg.trial_noise_um >= 0.0 && cfg.pin_tolerance_um >= 0.0) {
        return Err(Error::InvalidParameter(
            "roll, noise and tolerance must be >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nominal = cfg.pin_diameter_mm * 1000.0;
    let diameters: Vec<f64> = (0..cfg.parts)
        .map(|_| nominal - cfg.pin_tolerance_um * rng.random::<f64>())
        .collect();
    let roll = Normal::new(0.0, cfg.carrier_roll_um / 3.0).expect("finite sigma");
    let noise = Normal::new(0.0, cfg.trial_noise_um).expect("finite sigma");
    let mut values = Vec::with_capacity(cfg.parts * cfg.operators * cfg.trials);
    for d in &diameters {
        for _ in 0..cfg.operators {
            for _ in 0..cfg.trials {
                values.push(d + roll.sample(&mut rng) + noise.sample(&mut rng));
            }
        }
    }
    GrrMeasurementSet::new(cfg.parts, cfg.operators, cfg.trials, values, Unit::Um)
}

//! Layer-by-layer deposition with z-error feedback.
//!
//! `z_error = measured_z - target_z`; positive means over-deposited.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disturbance model of the printer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessModel {
    pub thickness_gain: f64,
    pub thickness_bias_um: f64,
    pub process_noise_sigma_um: f64,
    pub measurement_noise_sigma_um: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ProcessModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ProcessModel {
    pub fn ideal() -> Self {
        Self {
            thickness_gain: 1.0,
            thickness_bias_um: 0.0,
            process_noise_sigma_um: 0.0,
            measurement_noise_sigma_um: 0.0,
            seed: 0,
        }
    }

    /// Standard disturbance: 5 % under-extrusion, +5 µm bias, 5 µm process
    /// and measurement noise.
    pub fn standard_disturbance(seed: u64) -> Self {
        Self {
            thickness_gain: 0.95,
            thickness_bias_um: 5.0,
            process_noise_sigma_um: 5.0,
            measurement_noise_sigma_um: 5.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thickness_gain > 0.0 && self.thickness_gain.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "thickness_gain must be positive, got {}",
                self.thickness_gain
            )));
        }
        if !(self.process_noise_sigma_um >= 0.0 && self.measurement_noise_sigma_um >= 0.0) {
            return Err(Error::InvalidParameter("noise sigmas must be >= 0".into()));
        }
        if !self.thickness_bias_um.is_finite() {
            return Err(Error::InvalidParameter("thickness_bias_um must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerState {
    /// Index into the current plan.
    pub layer_index: usize,
    pub true_z_um: f64,
    pub measured_z_um: f64,
    pub target_z_um: f64,
    /// Commanded thickness of the most recent deposited layer.
    pub last_commanded_um: Option<f64>,
}

impl LayerState {
    pub fn initial() -> Self {
        Self::with_offset(0.0)
    }

    /// Start with `offset_um` of material already on the platform.
    pub fn with_offset(offset_um: f64) -> Self {
        Self {
            layer_index: 0,
            true_z_um: offset_um,
            measured_z_um: offset_um,
            target_z_um: 0.0,
            last_commanded_um: None,
        }
    }

    pub fn z_error_um(&self) -> f64 {
        self.measured_z_um - self.target_z_um
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ControlDecision {
    Deposit {
        commanded_um: f64,
    },
    AddCopyOfLastLayer,
    SkipNextLayer,
    Reslice {
        layer_thickness_um: f64,
        remaining_layers: usize,
    },
}

impl ControlDecision {
    pub fn label(&self) -> &'static str {
        match self {
            ControlDecision::Deposit { .. } => "deposit",
            ControlDecision::AddCopyOfLastLayer => "add_copy",
            ControlDecision::SkipNextLayer => "skip",
            ControlDecision::Reslice { .. } => "reslice",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    /// Open loop: always deposit the nominal thickness.
    None,
    Proportional {
        kp: f64,
    },
    AddSkip,
    Reslice,
}

impl Strategy {
    pub const DEFAULT_KP: f64 = 1.0;

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Proportional { .. } => "proportional",
            Strategy::AddSkip => "addskip",
            Strategy::Reslice => "reslice",
        }
    }
}

/// Thickness proportional to the z-error, clamped to `[0, 2·nominal]`.
pub fn control_proportional(state: &LayerState, nominal_um: f64, kp: f64) -> ControlDecision {
    let commanded = (nominal_um - kp * state.z_error_um()).clamp(0.0, 2.0 * nominal_um);
    ControlDecision::Deposit {
        commanded_um: commanded,
    }
}

/// Duplicate the last layer or skip the next one once |z-error| reaches half
/// a layer.
pub fn control_add_skip(state: &LayerState, nominal_um: f64) -> Result<ControlDecision> {
    let e = state.z_error_um();
    let half = 0.5 * nominal_um;
    if e <= -half {
        if state.layer_index == 0 || state.last_commanded_um.is_none() {
            return Err(Error::NoPreviousLayer);
        }
        Ok(ControlDecision::AddCopyOfLastLayer)
    } else if e >= half {
        Ok(ControlDecision::SkipNextLayer)
    } else {
        Ok(ControlDecision::Deposit {
            commanded_um: nominal_um,
        })
    }
}

/// Layer count for `remaining_um` whose uniform thickness is closest to
/// nominal; ties go to fewer, thicker layers.
pub fn reslice_layer_count(remaining_um: f64, nominal_um: f64) -> usize {
    let x = remaining_um / nominal_um;
    let lo = (x.floor() as usize).max(1);
    let hi = lo + 1;
    let err = |n: usize| (remaining_um / n as f64 - nominal_um).abs();
    if err(hi) < err(lo) {
        hi
    } else {
        lo
    }
}

/// Re-plan the remaining height as uniform layers near nominal.
pub fn control_reslice(
    state: &LayerState,
    target_height_um: f64,
    nominal_um: f64,
) -> Result<ControlDecision> {
    if state.measured_z_um >= target_height_um {
        return Err(Error::TargetReached {
            measured_um: state.measured_z_um,
            target_um: target_height_um,
        });
    }
    let remaining = target_height_um - state.measured_z_um;
    let n = reslice_layer_count(remaining, nominal_um);
    Ok(ControlDecision::Reslice {
        layer_thickness_um: remaining / n as f64,
        remaining_layers: n,
    })
}

/// Seeded printer plant.
#[derive(Debug, Clone)]
pub struct Plant {
    model: ProcessModel,
    rng: ChaCha8Rng,
    process: Normal<f64>,
    measurement: Normal<f64>,
}

impl Plant {
    pub fn new(model: ProcessModel) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            process: Normal::new(0.0, model.process_noise_sigma_um).expect("validated sigma"),
            measurement: Normal::new(0.0, model.measurement_noise_sigma_um).expect("validated sigma"),
        })
    }

    pub fn model(&self) -> &ProcessModel {
        &self.model
    }

    fn deposit(&mut self, commanded_um: f64) -> f64 {
        let noise = if self.model.process_noise_sigma_um > 0.0 {
            self.process.sample(&mut self.rng)
        } else {
            0.0
        };
        commanded_um * self.model.thickness_gain + self.model.thickness_bias_um + noise
    }

    fn measure(&mut self, true_z_um: f64) -> f64 {
        if self.model.measurement_noise_sigma_um > 0.0 {
            true_z_um + self.measurement.sample(&mut self.rng)
        } else {
            true_z_um
        }
    }
}

/// Outcome of executing one decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deposition {
    pub state: LayerState,
    pub commanded_um: f64,
    pub actual_um: f64,
}

/// Apply `decision` to the plant.
///
/// Deposit advances the plan by one nominal layer; AddCopy re-deposits the
/// last commanded thickness without advancing the plan; Skip advances the
/// plan without material (and without a new scan); Reslice deposits the
/// re-planned thickness and moves the target to the new layer boundary.
pub fn deposit_layer(
    state: &LayerState,
    decision: &ControlDecision,
    plant: &mut Plant,
    nominal_um: f64,
) -> Result<Deposition> {
    let mut next = *state;
    let commanded = match *decision {
        ControlDecision::SkipNextLayer => {
            next.layer_index += 1;
            next.target_z_um += nominal_um;
            return Ok(Deposition {
                state: next,
                commanded_um: 0.0,
                actual_um: 0.0,
            });
        }
        ControlDecision::Deposit { commanded_um } => {
            next.layer_index += 1;
            next.target_z_um += nominal_um;
            commanded_um
        }
        ControlDecision::AddCopyOfLastLayer => state.last_commanded_um.ok_or(Error::NoPreviousLayer)?,
        ControlDecision::Reslice {
            layer_thickness_um, ..
        } => {
            next.layer_index += 1;
            next.target_z_um = state.measured_z_um + layer_thickness_um;
            layer_thickness_um
        }
    };
    let actual = plant.deposit(commanded);
    next.true_z_um += actual;
    next.measured_z_um = plant.measure(next.true_z_um);
    next.last_commanded_um = Some(commanded);
    Ok(Deposition {
        state: next,
        commanded_um: commanded,
        actual_um: actual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub layer: usize,
    pub commanded_um: f64,
    pub actual_um: f64,
    pub true_z_um: f64,
    pub measured_z_um: f64,
    pub z_error_um: f64,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub strategy: Strategy,
    pub nominal_um: f64,
    pub target_height_um: f64,
    /// One row per executed decision, skips included.
    pub trace: Vec<TraceRow>,
    pub final_abs_error_um: f64,
    pub max_abs_error_um: f64,
    /// Rows that put material down.
    pub total_layers_deposited: usize,
    /// `max_abs_error_um <= nominal_um`.
    pub goal_met: bool,
}

impl SimulationResult {
    fn from_trace(strategy: Strategy, nominal_um: f64, target_height_um: f64, trace: Vec<TraceRow>) -> Self {
        let final_abs_error_um = trace.last().map_or(0.0, |r| r.z_error_um.abs());
        let max_abs_error_um = trace.iter().map(|r| r.z_error_um.abs()).fold(0.0, f64::max);
        let total_layers_deposited = trace.iter().filter(|r| r.action != "skip").count();
        Self {
            strategy,
            nominal_um,
            target_height_um,
            trace,
            final_abs_error_um,
            max_abs_error_um,
            total_layers_deposited,
            goal_met: max_abs_error_um <= nominal_um,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_layers: usize,
    pub nominal_um: f64,
    pub strategy: Strategy,
    pub model: ProcessModel,
    /// Material already on the platform before the first layer.
    #[serde(default)]
    pub initial_offset_um: f64,
}

impl SimConfig {
    pub fn new(n_layers: usize, nominal_um: f64, strategy: Strategy, model: ProcessModel) -> Self {
        Self {
            n_layers,
            nominal_um,
            strategy,
            model,
            initial_offset_um: 0.0,
        }
    }
}

/// Closed loop measure → decide → deposit until the planned height is
/// reached. Fails with `LayerBudgetExhausted` (carrying the partial trace)
/// after `3 · n_layers` steps.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimulationResult> {
    if cfg.n_layers == 0 {
        return Err(Error::InvalidParameter("n_layers must be >= 1".into()));
    }
    if !(cfg.nominal_um > 0.0 && cfg.nominal_um.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "nominal_um must be positive, got {}",
            cfg.nominal_um
        )));
    }
    if let Strategy::Proportional { kp } = cfg.strategy {
        if !(kp > 0.0 && kp <= 2.0) {
            return Err(Error::InvalidParameter(format!("kp must be in (0, 2], got {kp}")));
        }
    }
    let nominal = cfg.nominal_um;
    let target_height = cfg.n_layers as f64 * nominal;
    let budget = 3 * cfg.n_layers;
    let mut plant = Plant::new(cfg.model)?;
    let mut state = LayerState::with_offset(cfg.initial_offset_um);
    let mut trace = Vec::new();

    loop {
        let done = match cfg.strategy {
            Strategy::Reslice => false,
            _ => state.layer_index >= cfg.n_layers,
        };
        if done {
            break;
        }
        if trace.len() >= budget {
            let partial = SimulationResult::from_trace(cfg.strategy, nominal, target_height, trace);
            return Err(Error::LayerBudgetExhausted(Box::new(partial)));
        }
        let decision = match cfg.strategy {
            Strategy::None => ControlDecision::Deposit {
                commanded_um: nominal,
            },
            Strategy::Proportional { kp } => control_proportional(&state, nominal, kp),
            Strategy::AddSkip => control_add_skip(&state, nominal)?,
            Strategy::Reslice => match control_reslice(&state, target_height, nominal) {
                Ok(d) => d,
                Err(Error::TargetReached { .. }) => break,
                Err(e) => return Err(e),
            },
        };
        let step = deposit_layer(&state, &decision, &mut plant, nominal)?;
        state = step.state;
        trace.push(TraceRow {
            layer: state.layer_index,
            commanded_um: step.commanded_um,
            actual_um: step.actual_um,
            true_z_um: state.true_z_um,
            measured_z_um: state.measured_z_um,
            z_error_um: state.z_error_um(),
            action: decision.label().to_string(),
        });
        if let ControlDecision::Reslice {
            remaining_layers: 1, ..
        } = decision
        {
            break;
        }
    }
    Ok(SimulationResult::from_trace(
        cfg.strategy,
        nominal,
        target_height,
        trace,
    ))
}

use std::path::PathBuf;

use laserprof_core::{run_simulation, Error, ProcessModel, SimConfig, SimulationResult, Strategy, TraceRow};
use serde::{Deserialize, Serialize};

use super::positive;
use crate::args::{ControlArgs, StrategyArg};
use crate::config::{self, config_error, ControlConfig};
use crate::io;
use crate::Status;

pub const TRACE_HEADER: [&str; 7] = [
    "layer",
    "commanded_um",
    "actual_um",
    "true_z_um",
    "measured_z_um",
    "z_error_um",
    "action",
];

#[derive(Debug, Clone)]
pub struct ControlSettings {
    pub sim: SimConfig,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

/// Machine-readable run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSummary {
    pub strategy: Strategy,
    pub model: ProcessModel,
    pub n_layers: usize,
    pub nominal_um: f64,
    pub target_height_um: f64,
    pub final_abs_error_um: f64,
    pub max_abs_error_um: f64,
    pub total_layers_deposited: usize,
    pub goal_met: bool,
    pub diverged: bool,
}

impl ControlSummary {
    pub fn new(sim: &SimConfig, r: &SimulationResult, diverged: bool) -> Self {
        Self {
            strategy: sim.strategy,
            model: sim.model,
            n_layers: sim.n_layers,
            nominal_um: sim.nominal_um,
            target_height_um: r.target_height_um,
            final_abs_error_um: r.final_abs_error_um,
            max_abs_error_um: r.max_abs_error_um,
            total_layers_deposited: r.total_layers_deposited,
            goal_met: r.goal_met && !diverged,
            diverged,
        }
    }
}

pub fn resolve(args: &ControlArgs) -> anyhow::Result<ControlSettings> {
    let cfg: ControlConfig = config::load(args.config.as_deref())?;
    let config_kp = match cfg.strategy {
        Some(Strategy::Proportional { kp }) => Some(kp),
        _ => None,
    };
    let kp = args.kp.or(config_kp).unwrap_or(Strategy::DEFAULT_KP);
    let strategy = match args.strategy {
        Some(StrategyArg::None) => Strategy::None,
        Some(StrategyArg::Proportional) => Strategy::Proportional { kp },
        Some(StrategyArg::Addskip) => Strategy::AddSkip,
        Some(StrategyArg::Reslice) => Strategy::Reslice,
        None => match cfg.strategy {
            Some(Strategy::Proportional { .. }) | None => Strategy::Proportional { kp },
            Some(s) => s,
        },
    };
    if args.kp.is_some() && !matches!(strategy, Strategy::Proportional { .. }) {
        return Err(config_error("--kp only applies to the proportional strategy"));
    }
    let seed = args.seed.or(cfg.seed);
    let mut model = match &args.model {
        Some(p) => config::read_json(p, "process model")?,
        None => cfg.model.unwrap_or_else(|| ProcessModel::standard_disturbance(0)),
    };
    if let Some(s) = seed {
        model.seed = s;
    }
    let nominal = positive(
        "nominal thickness",
        args.nominal.or(cfg.nominal_um).unwrap_or(200.0),
    )?;
    let sim = SimConfig {
        n_layers: args.layers.or(cfg.layers).unwrap_or(100),
        nominal_um: nominal,
        strategy,
        model,
        initial_offset_um: args.offset.or(cfg.initial_offset_um).unwrap_or(0.0),
    };
    Ok(ControlSettings {
        sim,
        out: args.out.clone(),
        summary: args.summary.clone(),
    })
}

pub fn run(args: &ControlArgs) -> anyhow::Result<Status> {
    let s = resolve(args)?;
    let (result, failure) = match run_simulation(&s.sim) {
        Ok(r) => (r, None),
        Err(Error::LayerBudgetExhausted(partial)) => {
            let partial = (*partial).clone();
            (
                partial.clone(),
                Some(Error::LayerBudgetExhausted(Box::new(partial))),
            )
        }
        Err(e) => return Err(e.into()),
    };
    io::write_csv_with_header(io::open_output(s.out.as_deref())?, &TRACE_HEADER, &result.trace)?;
    let summary = ControlSummary::new(&s.sim, &result, failure.is_some());
    match &s.summary {
        Some(p) => io::write_json(io::open_output(Some(p))?, &summary)?,
        None => io::write_json(std::io::stderr(), &summary)?,
    }
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(Status::Ok),
    }
}

/// Parses a trace CSV written by `control`.
pub fn read_trace(path: &std::path::Path) -> anyhow::Result<Vec<TraceRow>> {
    io::read_csv(path)
}

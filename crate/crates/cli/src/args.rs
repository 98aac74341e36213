//! Command-line arguments. Every option is optional here so that config
//! files can fill the gaps; defaults are applied when settings are resolved.

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "laserprof",
    version,
    about = "Laser-line profilometry for extrusion 3D printing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure track width, height and diffusion on PGM/PNG frames.
    Extract(ExtractArgs),
    /// Render synthetic frames with ground-truth sidecars.
    Synth(SynthArgs),
    /// Run a synthetic reproduction protocol and report pass/fail.
    Bench(BenchArgs),
    /// Simulate closed-loop layer-height control.
    Control(ControlArgs),
    /// Derive a pixel-to-millimetre calibration from a gauge-block frame.
    Calibrate(CalibrateArgs),
    /// Gage R&R study on a long-format measurement table.
    Grr(GrrArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Image files or directories of images.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Minimum peak intensity for a valid column [default: 0.1].
    #[arg(long)]
    pub floor: Option<f64>,
    /// Track elevation threshold in pixels [default: 3].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Minimum run of columns above threshold [default: 3].
    #[arg(long)]
    pub run_length: Option<usize>,
    /// Pixel pitch in micrometres [default: 10].
    #[arg(long)]
    pub pitch: Option<f64>,
    /// Calibration JSON written by `calibrate`.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Measurement CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for per-frame profile CSVs.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Worker threads (0 or omitted: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON config file (flags override its values).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// One 300 x 150 um track.
    Track,
    /// The four staircase plateaus.
    Staircase,
    /// The 5 mm calibration gauge.
    Gauge,
    /// One wide bead per material with its diffusion error.
    Table2,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["scene", "preset"])))]
pub struct SynthArgs {
    /// Scene JSON.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Frames per scene [default: 1].
    #[arg(long)]
    pub frames: Option<usize>,
    /// Seed of the first frame; later frames count up from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, required = true)]
    pub out: PathBuf,
    /// JSON config file (flags override its values).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("protocol").required(true).args(["table1", "table2", "grr"])))]
pub struct BenchArgs {
    /// Staircase step heights.
    #[arg(long)]
    pub table1: bool,
    /// Diffusion error per material.
    #[arg(long)]
    pub table2: bool,
    /// R&R band of the pin-gauge study.
    #[arg(long)]
    pub grr: bool,
    /// Base seed of the Monte-Carlo replicates [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frames per material for --table2 [default: 200].
    #[arg(long)]
    pub frames: Option<usize>,
    /// Seeds for --grr [default: 100].
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Report CSV (in addition to the table on stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 or omitted: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON config file (flags override its values).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    None,
    Proportional,
    Addskip,
    Reslice,
}

#[derive(Debug, Args)]
pub struct ControlArgs {
    /// Control strategy [default: proportional].
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Proportional gain [default: 1].
    #[arg(long)]
    pub kp: Option<f64>,
    /// Process model JSON [default: standard disturbance].
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Planned layer count [default: 100].
    #[arg(long)]
    pub layers: Option<usize>,
    /// Nominal layer thickness in micrometres [default: 200].
    #[arg(long)]
    pub nominal: Option<f64>,
    /// Plant seed (overrides the model's).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Material on the platform before the first layer, micrometres.
    #[arg(long, allow_negative_numbers = true)]
    pub offset: Option<f64>,
    /// Trace CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON (stderr when omitted).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// JSON config file (flags override its values).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Frame of the gauge block on the platform.
    pub gauge: PathBuf,
    /// Gauge thickness in millimetres [default: 5].
    #[arg(long)]
    pub thickness: Option<f64>,
    /// Minimum peak intensity for a valid column [default: 0.1].
    #[arg(long)]
    pub floor: Option<f64>,
    /// Gauge elevation threshold in pixels [default: 3].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Minimum run of columns above threshold [default: 3].
    #[arg(long)]
    pub run_length: Option<usize>,
    /// Calibration JSON (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file (flags override its values).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitArg {
    Um,
    Mm,
    Px,
}

#[derive(Debug, Args)]
pub struct GrrArgs {
    /// CSV with columns part,operator,trial,value.
    pub input: PathBuf,
    /// Unit of the values [default: um].
    #[arg(long, value_enum)]
    pub unit: Option<UnitArg>,
    /// Result JSON (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file (flags override its values).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

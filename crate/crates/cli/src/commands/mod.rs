//! One module per subcommand. Each resolves flags, config file and
//! defaults into concrete settings, validates paths, then runs.

use crate::args::Command;
use crate::Status;

pub mod bench;
pub mod calibrate;
pub mod control;
pub mod extract;
pub mod grr;
pub mod synth;

pub fn dispatch(command: Command) -> anyhow::Result<Status> {
    match command {
        Command::Extract(a) => extract::run(&a),
        Command::Synth(a) => synth::run(&a),
        Command::Bench(a) => bench::run(&a),
        Command::Control(a) => control::run(&a),
        Command::Calibrate(a) => calibrate::run(&a),
        Command::Grr(a) => grr::run(&a),
    }
}

/// Runs `f` on a pool of `jobs` threads (all cores for `None` or 0).
pub(crate) fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()?;
    Ok(pool.install(f))
}

/// Positive, finite option value or a config error.
pub(crate) fn positive(name: &str, v: f64) -> anyhow::Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(crate::config::config_error(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

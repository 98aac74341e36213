//! Command-line front end: argument parsing, configuration, file IO and the
//! synthetic reproduction protocols.

use std::ffi::OsString;

use clap::Parser;

pub mod args;
pub mod bench;
pub mod commands;
pub mod config;
pub mod io;

pub use args::{Cli, Command};
pub use config::ConfigError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

/// How a command that ran to completion ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Output was written but some inputs could not be processed.
    DataErrors,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => EXIT_OK,
            Status::DataErrors => EXIT_DATA,
        }
    }
}

/// Exit code for a failed command: configuration problems are 1, a
/// diverging controller 3, everything else a data error.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<laserprof_core::Error>() {
        Some(laserprof_core::Error::InvalidParameter(_)) => EXIT_CONFIG,
        Some(laserprof_core::Error::LayerBudgetExhausted(_)) => EXIT_DIVERGED,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Diagnostics go to stderr; the return value is the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(status) => status.code(),
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
    }
}

use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(laserprof_cli::run(std::env::args_os()))
}

use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(agecycle_cli::run(std::env::args_os()))
}

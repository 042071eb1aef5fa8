use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(welander_cli::run(std::env::args_os()))
}

use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(alertclf_cli::run(std::env::args_os()))
}

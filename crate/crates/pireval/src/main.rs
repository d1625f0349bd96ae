use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(pireval::cli::run(std::env::args_os()))
}

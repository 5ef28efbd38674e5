use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(qtp::cli::main_with_args(std::env::args_os()))
}

use std::process::ExitCode;

fn main() -> ExitCode {
    lorenzcast::cli::main_with_args(std::env::args_os())
}

use std::process::ExitCode;

fn main() -> ExitCode {
    syndacate::cli::main_with_args(std::env::args_os())
}

use std::process::ExitCode;

fn main() -> ExitCode {
    nonmarkov::cli::main_with_args(std::env::args_os())
}

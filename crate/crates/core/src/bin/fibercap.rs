use std::process::ExitCode;

fn main() -> ExitCode {
    fibercap::cli::main_with(std::env::args_os())
}

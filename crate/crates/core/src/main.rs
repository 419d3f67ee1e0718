use std::process::ExitCode;

fn main() -> ExitCode {
    hsunmix::cli::main_with_args(std::env::args_os())
}

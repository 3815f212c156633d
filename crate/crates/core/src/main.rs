use std::process::ExitCode;

fn main() -> ExitCode {
    mgcn::cli::run(std::env::args_os())
}

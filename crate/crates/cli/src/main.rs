use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(switchreg_cli::run(std::env::args_os()))
}

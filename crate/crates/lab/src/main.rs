use std::process::ExitCode;

fn main() -> ExitCode {
    zeronoise::cli::main_with_args(std::env::args_os())
}

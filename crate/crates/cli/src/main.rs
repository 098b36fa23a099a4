use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .init();
    ExitCode::from(mkf_cli::run_with_args(std::env::args_os()))
}

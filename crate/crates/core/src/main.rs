use edgetrain_core::cli::{main_with_args, LOG_ENV};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    std::process::exit(main_with_args(std::env::args_os()));
}

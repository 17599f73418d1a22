use clap::Parser;

use nrlz::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match run(Cli::parse()) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.status().code()
        }
    };
    std::process::exit(code);
}

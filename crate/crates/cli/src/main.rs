use clap::Parser;

use blunder_cli::commands::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("{}", serde_json::json!({ "error": e.to_string(), "kind": e.kind() }));
        std::process::exit(1);
    }
}

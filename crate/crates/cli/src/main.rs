use std::process::ExitCode;

use clap::Parser;
use qra_cli::{init_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match run(&cli) {
        Ok(out) => {
            let text = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
            println!("{text}");
            eprintln!("manifest: {}", out.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qra: {e}");
            ExitCode::FAILURE
        }
    }
}

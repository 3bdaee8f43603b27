use std::process::ExitCode;

use clap::Parser;
use regionkit::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            println!("{}", outcome.run_dir.display());
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "kind": "invariant",
                        "message": "hard invariant violated; see report.json",
                        "run_dir": outcome.run_dir,
                        "exit_code": 1,
                    })
                );
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.report()).expect("report serializes"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

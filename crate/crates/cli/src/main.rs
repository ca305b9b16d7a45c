mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::Parser;

use crate::config::{load_config, thread_cap, Cli};
use crate::error::CliError;

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = thread_cap(std::env::var("HETDATA_THREADS").ok())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))?;
    }
    let cfg = load_config(cli)?;
    let outcome = commands::run(&cfg)?;
    commands::write_all(&cfg.output_dir, &outcome.artifacts)?;
    for a in &outcome.artifacts {
        println!("wrote {}", cfg.output_dir.join(a.name).display());
    }
    let failures = outcome.failures();
    if !outcome.checks.is_empty() {
        println!("{} of {} checks passed", outcome.checks.len() - failures.len(), outcome.checks.len());
    }
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            eprintln!(
                "FAIL {}: expected {}, observed {}, se {}{}",
                f.statistic,
                f.expected,
                f.observed,
                f.se,
                f.seed.map(|s| format!(", seed {s}")).unwrap_or_default()
            );
        }
        Err(CliError::Verification(format!("{} check(s) failed", failures.len())))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hetdata: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

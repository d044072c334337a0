//! Command-line driver: one subcommand per pipeline stage plus the full
//! audit, the review server and a throughput benchmark.

pub mod args;
pub mod commands;
pub mod config;
pub mod exit;

use std::io::Write;

pub use args::Cli;
pub use exit::{CliError, CliResult, ExitClass};

use args::Command;
use config::FileConfig;

/// Executes a parsed invocation, writing its summary to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    let file = FileConfig::load_opt(cli.config.as_deref())?;
    match &cli.command {
        Command::Ingest(a) => commands::cmd_ingest(a, out),
        Command::Extract(a) => commands::cmd_extract(a, out),
        Command::Search(a) => commands::cmd_search(a, &file, out),
        Command::Calibrate(a) => commands::cmd_calibrate(a, &file, out),
        Command::Hist(a) => commands::cmd_hist(a, &file, out),
        Command::Audit(a) => commands::cmd_audit(a, &file, out),
        Command::Serve(a) => commands::cmd_serve(a, &file),
        Command::Report(a) => commands::cmd_report(a, out),
        Command::Bench(a) => commands::cmd_bench(a, &file, out),
    }
}

/// Runs and maps the outcome to a process exit code, printing a one-line
/// diagnostic on failure.
pub fn main_with(cli: &Cli) -> i32 {
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitClass::Success.code(),
        Err(e) => {
            eprintln!("leakcheck: error: {e}");
            e.exit_code()
        }
    }
}

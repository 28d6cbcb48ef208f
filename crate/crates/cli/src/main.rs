use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use jcsim_cli::{run, validate, Command, RunOptions};

/// Driven, dissipative Jaynes-Cummings simulations from JSON scenario files.
#[derive(Debug, Parser)]
#[command(name = "jcsim", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (strict JSON).
    config: PathBuf,
    /// Output directory for CSV tables and manifest.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, env = "JCSIM_THREADS")]
    threads: Option<usize>,
    /// Run twice and fail unless every CSV is byte-identical.
    #[arg(long)]
    seed_check: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.command == Command::Validate {
        return match validate(&args.config) {
            Ok(report) => {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                if report.errors.is_empty() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                }
            }
            Err(e) => fail(e),
        };
    }
    let opts = RunOptions { out_dir: args.out, threads: args.threads, seed_check: args.seed_check };
    match run(args.command, &args.config, &opts) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", outcome.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: jcsim_cli::CliError) -> ExitCode {
    eprintln!("jcsim: {e}");
    ExitCode::from(e.exit_code() as u8)
}

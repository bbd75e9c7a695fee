use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tm_cli::{run, Command, ExperimentConfig};

/// Discrete dynamic optimal transport experiments.
///
/// Without `--input` a random instance is drawn from `--seed`. Results go to
/// `<output-dir>/report.json` next to the structured outputs. Set
/// `TM_THREADS` to cap the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "tm", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Problem file (JSON).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Threshold for the pass/fail flags in the report.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Denominator caps for `holonomic`.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    q: Vec<usize>,
    /// Step counts for a refinement sweep alongside `tonelli`.
    #[arg(long, value_delimiter = ',')]
    refine: Vec<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let threads = match std::env::var("TM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                let err = tm_cli::CliError::Usage(format!("TM_THREADS must be a positive integer, got {v:?}"));
                eprintln!("{}", err.to_json());
                return ExitCode::from(err.exit_code() as u8);
            }
        },
        Err(_) => None,
    };
    let config = ExperimentConfig {
        command: args.command,
        input: args.input,
        output_dir: args.output_dir,
        seed: args.seed,
        tol: args.tol,
        q: args.q,
        refine: args.refine,
        threads,
    };
    match run(&config) {
        Ok(outcome) => {
            println!("{}", outcome.report_path.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

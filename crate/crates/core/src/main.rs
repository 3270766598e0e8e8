use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mveda::cli::{load_spec, run_spec, ExperimentKind, Overrides};

#[derive(Parser)]
#[command(name = "mveda", version, about = "Drift and runtime experiments for multi-valued EDAs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exit probabilities of watched frequencies within a horizon
    Drift(Common),
    /// Compare a weakly preferred frequency with a neutral one at the CDF level
    Dominance(Common),
    /// Mean of neutral frequencies at checkpoints
    Martingale(Common),
    /// r-UMDA runs on r-LeadingOnes
    Runtime(Common),
    /// Evaluate the closed-form parameter formulas
    Bound(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment spec
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (overrides the config)
    #[arg(long, env = "MVEDA_WORKERS")]
    workers: Option<usize>,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Drift(c) => (ExperimentKind::Drift, c),
        Command::Dominance(c) => (ExperimentKind::Dominance, c),
        Command::Martingale(c) => (ExperimentKind::Martingale, c),
        Command::Runtime(c) => (ExperimentKind::Runtime, c),
        Command::Bound(c) => (ExperimentKind::BoundEval, c),
    };
    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", common.config.display());
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides { seed: common.seed, workers: common.workers, out: common.out };
    let spec = match load_spec(&text, kind, &overrides) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_spec(&spec) {
        Ok(summary) => {
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            println!("wrote {}", summary.manifest.display());
            for a in &summary.assertions {
                println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

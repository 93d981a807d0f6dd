use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use walklab_cli::run::{self, RunOptions, EXIT_FAILURE};

#[derive(Parser)]
#[command(name = "walklab", version, about = "Random walk and BPRE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (speed only, results do not depend on it).
    #[arg(long)]
    workers: Option<usize>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Limit-law density and CDF on a grid.
    Density(Common),
    /// Renewal tables U, V, V0.
    Renewal(Common),
    /// Ratio experiment for one of the local limit theorems.
    Theorem(Common),
    /// Branching process in random environment experiments.
    Bpre(Common),
    /// Rerun every reference config and compare CSVs byte for byte.
    VerifyReference {
        #[arg(long, default_value = "reference")]
        dir: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, common) = match cli.command {
        Command::Density(c) => ("density", c),
        Command::Renewal(c) => ("renewal", c),
        Command::Theorem(c) => ("theorem", c),
        Command::Bpre(c) => ("bpre", c),
        Command::VerifyReference { dir, workers } => {
            return match run::verify_reference(&dir, workers) {
                Ok(checks) => {
                    let mut ok = true;
                    for c in &checks {
                        println!("{} {}/{}", if c.matches { "match" } else { "MISMATCH" }, c.reference, c.file);
                        ok &= c.matches;
                    }
                    if ok {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAILURE as u8)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            };
        }
    };
    let opts = RunOptions { out: common.out, workers: common.workers, seed: common.seed };
    match run::run(sub, &common.config, &opts) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

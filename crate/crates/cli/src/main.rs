use std::path::PathBuf;
use std::process::ExitCode;

use basket_cli::commands::{self, RunArgs};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "basket", version, about = "Bayesian basket-trial simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply when omitted (see `print-config`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    /// Replicates (overrides the configuration).
    #[arg(long)]
    reps: Option<usize>,
    /// Randomize everyone 1:1.
    #[arg(long)]
    no_adaptive: bool,
    /// Observe every event time in full.
    #[arg(long)]
    no_censoring: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replicate trials of the configured scenario.
    Simulate(SimArgs),
    /// Simulate and compare treatment-effect errors with the NAIVE and SEPARATE designs.
    Compare(SimArgs),
    /// Choose u0 and u1 on a grid from simulations of scenarios 1 and 2.
    Calibrate(SimArgs),
    /// Analyze a patient roster (CSV).
    Analyze {
        /// Roster file.
        roster: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print the default configuration.
    PrintConfig,
}

fn run_args(common: Common, reps: Option<usize>, no_adaptive: bool, no_censoring: bool) -> RunArgs {
    RunArgs {
        config: common.config,
        seed: common.seed,
        reps,
        out: common.out,
        threads: common.threads,
        no_adaptive,
        no_censoring,
    }
}

fn sim(a: SimArgs) -> RunArgs {
    run_args(a.common, a.reps, a.no_adaptive, a.no_censoring)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&sim(a)),
        Command::Compare(a) => commands::compare(&sim(a)),
        Command::Calibrate(a) => commands::calibrate(&sim(a)),
        Command::Analyze { roster, common } => commands::analyze(&roster, &run_args(common, None, false, false)),
        Command::PrintConfig => match commands::print_config() {
            Ok(text) => {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(m) => {
            for o in &m.outputs {
                println!("wrote {}", o.path);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use regime_lab::acceptance::{run_all, Scale};
use regime_lab::config::ExperimentConfig;
use regime_lab::run::{cmd_limits, cmd_simulate, cmd_stationary, cmd_tailindex, with_threads, RunOptions, RunOutput};
use regime_lab::Error;

const CONFIG_ERROR: u8 = 1;
const NUMERICAL_ERROR: u8 = 2;
const SELFTEST_FAILED: u8 = 3;

/// Regime-switching OU, CIR and SIS experiments.
#[derive(Parser)]
#[command(name = "regime-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicate trajectories at the record times.
    Simulate(Common),
    /// Draws from the stationary law, optionally compared with simulation.
    Stationary(Common),
    /// Scaled log statistic against its limit law on the time grid.
    Limits(Common),
    /// Per-state empirical tail index from renewal cycles.
    Tailindex(Common),
    /// Acceptance checks at reduced sample sizes.
    Selftest {
        /// Run the full sample sizes instead.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        CONFIG_ERROR
    } else {
        NUMERICAL_ERROR
    }
}

fn run(common: &Common, cmd: fn(&ExperimentConfig, RunOptions) -> regime_lab::Result<RunOutput>) -> ExitCode {
    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", common.config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let opts = RunOptions {
        seed: common.seed,
        threads: common.threads,
    };
    let output = ExperimentConfig::parse(&text).and_then(|cfg| cmd(&cfg, opts));
    match output {
        Ok(out) => write(&out, &common.out),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn write(out: &RunOutput, dir: &Path) -> ExitCode {
    if let Err(e) = out.write_to(dir) {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return ExitCode::from(CONFIG_ERROR);
    }
    for (name, _) in &out.files {
        println!("{}", dir.join(name).display());
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.command {
        Command::Simulate(c) => run(c, cmd_simulate),
        Command::Stationary(c) => run(c, cmd_stationary),
        Command::Limits(c) => run(c, cmd_limits),
        Command::Tailindex(c) => run(c, cmd_tailindex),
        Command::Selftest { full, threads } => {
            let scale = if *full { Scale::Full } else { Scale::Reduced };
            let outcomes = match with_threads(*threads, || Ok(run_all(scale))) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit_code(&e));
                }
            };
            for o in &outcomes {
                println!("{}", o.line());
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(SELFTEST_FAILED)
            }
        }
    }
}

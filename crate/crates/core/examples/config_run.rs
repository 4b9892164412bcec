//! Drives the command runners from config text, the same way the
//! `regime-lab` binary does, and writes the outputs to a directory.
//!
//! ```bash
//! cargo run --release --example config_run -- configs/benchmark_stable.cfg out/
//! ```

use std::path::PathBuf;

use regime_lab::config::ExperimentConfig;
use regime_lab::run::{cmd_limits, cmd_simulate, cmd_stationary, RunOptions};

const DEFAULT: &str = "
[chain]
states = 2
row.0 = *, 1
row.1 = 2, *

[model]
kind = ou
a = 2, -1
b = 1, 2

[run]
horizon = 20
grid = 0:0.5:20
replicates = 500
draws = 5000
compare_horizon = 50
seed = 7
";

fn main() -> regime_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let text = match args.next() {
        Some(path) => std::fs::read_to_string(&path).map_err(|e| regime_lab::Error::InvalidArgument(format!("{path}: {e}")))?,
        None => DEFAULT.to_string(),
    };
    let out_dir = args.next().map(PathBuf::from);

    let cfg = ExperimentConfig::parse(&text)?;
    print!("canonical config:\n{cfg}");
    let resolved = cfg.resolve()?;
    println!("regime {} (E_pi {} = {}, exact {})", resolved.class.regime.name(), resolved.rate_name, resolved.class.e_pi_a, resolved.class.exact);

    let opts = RunOptions::default();
    let outputs = if resolved.class.regime.name() == "stable" {
        vec![cmd_simulate(&cfg, opts)?, cmd_stationary(&cfg, opts)?]
    } else {
        vec![cmd_limits(&cfg, opts)?]
    };
    for out in &outputs {
        println!("{}", serde_json::to_string_pretty(&out.summary["metrics"]).expect("json"));
        if let Some(dir) = &out_dir {
            out.write_to(dir).map_err(|e| regime_lab::Error::InvalidArgument(e.to_string()))?;
        }
    }
    Ok(())
}

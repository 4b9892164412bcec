//! Deterministic SIS epidemic in a random environment: exact trajectories,
//! the stable-case stationary law of 1/I and long-run interval
//! probabilities.
//!
//! ```bash
//! cargo run --release --example sis_epidemic
//! ```

use regime_lab::appmodels::{sis_limit_probability, sis_simulate, sis_stationary_mixture, SisLimitInput, SisModel};
use regime_lab::chain::{stationary_distribution, RateMatrix};
use regime_lab::limits::classify;
use regime_lab::pathfunc::StateTable;
use regime_lab::rng::stream;

fn main() -> regime_lab::Result<()> {
    // Constant environment: I_t -> n - alpha/beta.
    let flat = SisModel::new(RateMatrix::single(), StateTable::new(vec![1.0])?, StateTable::new(vec![0.002])?, 1000.0, 1.0)?;
    let mut rng = stream(4, "flat", 0);
    for r in sis_simulate(&flat, 20.0, &[1.0, 5.0, 10.0, 20.0], &mut rng)? {
        println!("constant environment: I({}) = {:.6}", r.time, r.infected);
    }

    let q = RateMatrix::two_state(1.0, 2.0)?;
    let model = SisModel::new(q, StateTable::new(vec![1.0, 1.0])?, StateTable::new(vec![0.02, 0.005])?, 100.0, 1.0)?;
    let pi = stationary_distribution(&model.q)?;
    let class = classify(&model.gamma(), &pi)?;
    println!("gamma = {:?}, E_pi gamma = {}, regime {}", model.gamma().values(), class.e_pi_a, class.regime.name());

    let mut rng = stream(4, "replicate", 0);
    let times: Vec<f64> = (0..=10).map(|k| 5.0 * k as f64).collect();
    for r in sis_simulate(&model, 50.0, &times, &mut rng)? {
        println!("  t = {:>4}: I = {:8.4} (state {})", r.time, r.infected, r.state);
    }

    let mix = sis_stationary_mixture(&model, 10_000, &mut stream(4, "mixture", 0))?;
    for (lo, hi) in [(0.02, 0.025), (0.03, 0.04), (0.05, 0.1)] {
        let p = sis_limit_probability(&model, &class, (lo, hi), SisLimitInput::Mixture { mixture: &mix, draws: 100_000 }, &mut rng)?;
        println!("P[1/I in ({lo}, {hi})] -> {:.4} ± {:.4}", p.value, p.se);
    }
    Ok(())
}

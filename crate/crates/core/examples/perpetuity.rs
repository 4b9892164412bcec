//! Stochastic recurrence `Z = A Z + B`: backward sampling, forward
//! iteration, moments and the empirical tail index.
//!
//! ```bash
//! cargo run --example perpetuity
//! ```

use regime_lab::chain::RateMatrix;
use regime_lab::pathfunc::StateTable;
use regime_lab::rng::seeded;
use regime_lab::sre::{diagnose, gaussian_b_source, goldie_kesten_index, iterate_forward, moment, sample_fixed_point, CycleSource, PairSource};
use regime_lab::stats::{ks_one_sample, normal_cdf, variance, SampleSet};

fn main() -> regime_lab::Result<()> {
    let mut rng = seeded(3);

    // A = 1/2, B ~ N(0, 1): the fixed point is N(0, 4/3).
    let src = gaussian_b_source(0.5);
    let draws: Vec<f64> = (0..50_000).map(|_| sample_fixed_point(&src, &mut rng)).collect::<Result<_, _>>()?;
    let set = SampleSet::new(draws.clone())?;
    let sd = (4.0f64 / 3.0).sqrt();
    println!(
        "backward draws: variance {:.4} (4/3), KS vs N(0, 4/3) {:.4}",
        variance(&draws),
        ks_one_sample(&set, |x| normal_cdf(x / sd))?
    );
    let fwd = iterate_forward(&src, 0.0, 64, &mut rng)?;
    println!("one forward draw after 64 steps: {fwd:.4}");
    let m2 = moment(&src, 2, None, 50_000, &mut rng)?;
    println!("E Z^2 by recursion: {:.4} ± {:.4}", m2.value, m2.se);

    // Cycle pairs of a two-state environment: A = e^{-∫2a}, B = ∫b² e^{-∫2a}.
    let q = RateMatrix::two_state(1.0, 2.0)?;
    let a = StateTable::new(vec![2.0, -1.0])?;
    let b = StateTable::new(vec![1.0, 2.0])?;
    let cycles = CycleSource::new(q, 0, a.map(|x| 2.0 * x), b.map(|x| x * x), None)?;
    let diag = diagnose(&cycles, 20_000, &mut rng)?;
    println!("cycle source: E log A = {:.4} ± {:.4}, contractive {}", diag.mean_log_a, diag.mean_log_a_se, diag.contractive);

    // log A = -∫a per cycle gives the tail index of the OU process itself.
    let logs: Vec<f64> = (0..200_000).map(|_| 0.5 * cycles.draw(&mut rng).log_abs_a).collect();
    let nu = goldie_kesten_index(&logs)?;
    println!("empirical tail index {:.4} (exact 1.5)", nu.nu_hat);
    Ok(())
}

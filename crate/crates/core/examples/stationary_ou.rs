//! Stationary law of a switching OU process as a scale mixture of
//! Gaussians, checked against long simulations.
//!
//! ```bash
//! cargo run --release --example stationary_ou
//! ```

use rayon::prelude::*;
use regime_lab::chain::RateMatrix;
use regime_lab::ou::{simulate, stationary_sampler, tail_bounds, OuModel};
use regime_lab::pathfunc::StateTable;
use regime_lab::rng::stream;
use regime_lab::stats::{histogram, ks_two_sample, SampleSet};

fn main() -> regime_lab::Result<()> {
    let q = RateMatrix::two_state(1.0, 2.0)?;
    let model = OuModel::new(q, StateTable::new(vec![2.0, -1.0])?, StateTable::new(vec![1.0, 2.0])?, None, 0.0)?;
    let mix = stationary_sampler(&model, 10_000, &mut stream(1, "mixture", 0))?;

    let n = 20_000;
    let mut rng = stream(1, "draw", 0);
    let draws: Vec<f64> = (0..n).map(|_| mix.sample(&mut rng)).collect::<Result<_, _>>()?;
    let terminal: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| Ok(simulate(&model, 50.0, &[50.0], &mut stream(1, "replicate", k as u64))?[0].value))
        .collect::<regime_lab::Result<_>>()?;
    let (ks, scaled) = ks_two_sample(&SampleSet::new(draws.clone())?, &SampleSet::new(terminal)?)?;
    println!("mixture vs T=50 terminals: KS {ks:.4} (scaled {scaled:.3})");

    for t in [2.0, 5.0, 20.0] {
        let b = tail_bounds(&mix, t, 20_000, &mut rng)?;
        println!("P[Y > {t}] in [{:.5}, {:.5}]", b.lower, b.upper);
    }

    let clipped: Vec<f64> = draws.into_iter().filter(|y| y.abs() < 6.0).collect();
    let hist = histogram(&SampleSet::new(clipped)?, 24)?;
    hist.write_csv(std::io::stdout().lock()).expect("stdout");
    Ok(())
}

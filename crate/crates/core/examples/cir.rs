//! CIR with switching coefficients built from `n` independent OU factors,
//! checked against a full-truncation Euler scheme.
//!
//! ```bash
//! cargo run --release --example cir
//! ```

use rayon::prelude::*;
use regime_lab::appmodels::{cir_euler_reference, cir_simulate, cir_stationary_sampler, CirModel};
use regime_lab::chain::RateMatrix;
use regime_lab::ou::OuModel;
use regime_lab::pathfunc::StateTable;
use regime_lab::rng::stream;
use regime_lab::stats::{ks_two_sample, mean_se, SampleSet};

fn main() -> regime_lab::Result<()> {
    let q = RateMatrix::two_state(1.0, 2.0)?;
    let base = OuModel::new(q, StateTable::new(vec![2.0, -1.0])?, StateTable::new(vec![1.0, 2.0])?, None, 0.0)?;
    let model = CirModel::new(base, 2, 1.0)?;
    println!("kappa {:?}, theta {:?}, xi {:?}", model.kappa().values(), model.theta().values(), model.xi().values());

    let n: usize = 5000;
    let exact: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| Ok(cir_simulate(&model, 10.0, &[10.0], &mut stream(2, "replicate", k as u64))?[0].value))
        .collect::<regime_lab::Result<_>>()?;
    let euler: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| cir_euler_reference(&model, 10.0, 1e-3, &mut stream(2, "euler", k as u64)))
        .collect::<regime_lab::Result<_>>()?;
    let (m1, s1) = mean_se(&exact);
    let (m2, s2) = mean_se(&euler);
    println!("R_10 mean: exact {m1:.4} ± {s1:.4}, Euler {m2:.4} ± {s2:.4}");
    let (ks, _) = ks_two_sample(&SampleSet::new(exact)?, &SampleSet::new(euler)?)?;
    println!("KS exact vs Euler: {ks:.4}");

    let stat = cir_stationary_sampler(&model, 10_000, &mut stream(2, "mixture", 0))?;
    let mut rng = stream(2, "draw", 0);
    let draws: Vec<f64> = (0..n).map(|_| stat.sample(&mut rng)).collect::<regime_lab::Result<_>>()?;
    let mut sorted = draws.clone();
    sorted.sort_by(f64::total_cmp);
    println!("stationary R: median {:.4}, 99% quantile {:.4}", sorted[n / 2], sorted[n * 99 / 100]);
    Ok(())
}

//! Transient and null-recurrent regimes: the scaled log statistic against
//! its normal / half-normal mixture limit.
//!
//! ```bash
//! cargo run --release --example regime_limits
//! ```

use regime_lab::chain::RateMatrix;
use regime_lab::limits::{classify_exact, regime_experiment, ExperimentSpec, SigmaConvention};
use regime_lab::ou::OuModel;
use regime_lab::pathfunc::StateTable;
use num_rational::BigRational;

fn rational(p: i64) -> BigRational {
    BigRational::from_integer(p.into())
}

fn main() -> regime_lab::Result<()> {
    let q = RateMatrix::two_state(1.0, 2.0)?;
    let b = StateTable::new(vec![1.0, 1.0])?;
    for (label, a, exact) in [("transient", [-2, 1], false), ("null recurrent", [1, -2], true)] {
        let model = OuModel::new(q.clone(), StateTable::new(a.iter().map(|&x| x as f64).collect())?, b.clone(), None, 0.0)?;
        // E_pi a = 0 is decided exactly from integer rates and table entries.
        let class = exact
            .then(|| classify_exact(&[vec![rational(0), rational(1)], vec![rational(2), rational(0)]], &a.map(rational)))
            .transpose()?;
        let spec = ExperimentSpec {
            t_grid: vec![50.0, 200.0, 800.0],
            replicates: 4000,
            limit_draws: 40_000,
            n_cycles: 50_000,
            seed: 3,
            convention: SigmaConvention::Centered,
            class,
        };
        let exp = regime_experiment(&model, &spec)?;
        println!("{label}: E_pi a = {}, limit {:?}, scales {:?}", exp.class.e_pi_a, exp.law.kind, exp.law.scales);
        for pt in &exp.per_t {
            println!("  t = {:>5}: KS {:.4}", pt.t, pt.ks);
        }
    }
    Ok(())
}

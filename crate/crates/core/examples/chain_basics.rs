//! Rate matrices, stationary distributions, Gillespie paths and renewal
//! cycles.
//!
//! ```bash
//! cargo run --example chain_basics
//! ```

use regime_lab::chain::{decompose_cycles, sample_cycles, simulate_path, stationary_distribution, RateMatrix};
use regime_lab::rng::seeded;

fn main() -> regime_lab::Result<()> {
    let q = RateMatrix::new(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]])?;
    let pi = stationary_distribution(&q)?;
    println!("cyclic chain: pi = {:?}", pi.pi);

    let q = RateMatrix::two_state(1.0, 2.0)?;
    let pi = stationary_distribution(&q)?;
    println!("two-state chain: pi = {:?}", pi.pi);

    let mut rng = seeded(1);
    let horizon = 10_000.0;
    let path = simulate_path(&q, 0, horizon, &mut rng)?;
    let occ = path.occupation_times(2);
    println!(
        "{} jumps up to t = {horizon}; occupation fractions {:.4} {:.4}",
        path.events.len(),
        occ[0] / horizon,
        occ[1] / horizon
    );

    // Cycles cut from one long path and fresh cycles agree in mean length:
    // E|I^j| = 1 / (pi_j q_j).
    let cut = decompose_cycles(&path, 0)?;
    let fresh = sample_cycles(&q, 0, 20_000, &mut rng)?;
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "anchor 0 cycle length: from path {:.4}, fresh {:.4}, exact {:.4}",
        mean(cut.lengths()),
        mean(fresh.lengths()),
        1.0 / (pi.pi[0] * q.exit_rate(0))
    );
    Ok(())
}

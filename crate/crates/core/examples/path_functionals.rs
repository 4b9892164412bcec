//! Closed-form path functionals `F_t = ∫ d(X_s) exp(-∫_s^t c(X_u) du) ds`.
//!
//! ```bash
//! cargo run --example path_functionals
//! ```

use regime_lab::chain::{ChainPath, Segment};
use regime_lab::pathfunc::{evaluate_f, evaluate_f_at, g_function, ScaledValue, StateTable};

fn main() -> regime_lab::Result<()> {
    println!("G(c=2, d=3, x=1) = {}", g_function(2.0, 3.0, 1.0));
    println!("G(c=0, d=5, x=2) = {}", g_function(0.0, 5.0, 2.0));

    let c = StateTable::new(vec![1.0, -0.5])?;
    let d = StateTable::new(vec![1.0, 2.0])?;
    let path = ChainPath::from_segments(&[
        Segment { state: 0, duration: 1.0 },
        Segment { state: 1, duration: 0.5 },
        Segment { state: 0, duration: 2.0 },
    ])?;
    println!("F at horizon {} = {}", path.horizon, evaluate_f(&path, &c, &d)?);
    let times = [0.5, 1.0, 1.25, 3.5];
    for (t, f) in times.iter().zip(evaluate_f_at(&path, &c, &d, &times)?) {
        println!("  F({t}) = {f:.10}");
    }

    // Growth far beyond f64 stays representable on the log scale.
    let mut v = ScaledValue::new(1.0);
    for _ in 0..100 {
        v.scale(10.0);
        v.add(1.0);
    }
    println!("ln|v| after 100 steps of x e^10 + 1: {}", v.ln_abs());
    Ok(())
}

//! Stochastic recurrence equations `Z = A Z + B` (in law, `Z` independent
//! of `(A, B)`): contraction diagnostics, perpetuity sampling by truncated
//! backward sums, forward iteration, moment recursion and the empirical
//! Goldie-Kesten tail index.

use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::chain::{run_cycle, RateMatrix};
use crate::error::{invalid, Error, Result};
use crate::pathfunc::{CycleAccumulator, StateTable};
use crate::stats::mean_se;

/// Backward sums stop once the running product falls below this fraction
/// of `|Z| + 1`.
pub const TRUNCATION: f64 = 1e-14;
/// Hard cap on the number of backward terms.
pub const MAX_TERMS: usize = 1_000_000;

/// One draw of `(A, B)` or `(A, B, C)`. `log_abs_a` is kept separately so
/// that cycle-derived coefficients far below `f64::MIN_POSITIVE` keep
/// their exact logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Draw {
    pub a: f64,
    pub log_abs_a: f64,
    pub b: f64,
    pub c: f64,
}

impl Draw {
    pub fn new(a: f64, b: f64) -> Self {
        Self::triple(a, b, 0.0)
    }

    pub fn triple(a: f64, b: f64, c: f64) -> Self {
        Self {
            a,
            log_abs_a: a.abs().ln(),
            b,
            c,
        }
    }

    /// `A = e^{log_a} > 0`.
    pub fn from_log(log_a: f64, b: f64, c: f64) -> Self {
        Self {
            a: log_a.exp(),
            log_abs_a: log_a,
            b,
            c,
        }
    }
}

/// An i.i.d. source of coefficient draws.
pub trait PairSource: Send + Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> Draw;
}

impl<T: PairSource + ?Sized> PairSource for &T {
    fn draw(&self, rng: &mut dyn RngCore) -> Draw {
        (**self).draw(rng)
    }
}

impl<T: PairSource + ?Sized> PairSource for Box<T> {
    fn draw(&self, rng: &mut dyn RngCore) -> Draw {
        (**self).draw(rng)
    }
}

impl<T: PairSource + ?Sized> PairSource for Arc<T> {
    fn draw(&self, rng: &mut dyn RngCore) -> Draw {
        (**self).draw(rng)
    }
}

/// Source defined by a sampling closure.
pub struct FnSource<F>(pub F);

impl<F> PairSource for FnSource<F>
where
    F: Fn(&mut dyn RngCore) -> Draw + Send + Sync,
{
    fn draw(&self, rng: &mut dyn RngCore) -> Draw {
        (self.0)(rng)
    }
}

/// Always returns the same draw.
#[derive(Debug, Clone, Copy)]
pub struct ConstantSource(pub Draw);

impl PairSource for ConstantSource {
    fn draw(&self, _rng: &mut dyn RngCore) -> Draw {
        self.0
    }
}

/// A recorded sample resampled uniformly with replacement.
#[derive(Debug, Clone)]
pub struct PoolSource {
    draws: Vec<Draw>,
}

impl PoolSource {
    pub fn new(draws: Vec<Draw>) -> Result<Self> {
        if draws.is_empty() {
            return Err(invalid("empty draw pool"));
        }
        Ok(Self { draws })
    }

    /// Records `n` draws from another source.
    pub fn record<S: PairSource + ?Sized>(source: &S, n: usize, rng: &mut dyn RngCore) -> Result<Self> {
        Self::new((0..n).map(|_| source.draw(rng)).collect())
    }

    pub fn draws(&self) -> &[Draw] {
        &self.draws
    }
}

impl PairSource for PoolSource {
    fn draw(&self, rng: &mut dyn RngCore) -> Draw {
        self.draws[rng.random_range(0..self.draws.len())]
    }
}

/// Fresh renewal cycles of a chain anchored at one state, mapped to
/// `(A, B, C) = (e^{-∫c}, ∫d e^{-∫_s c}, ∫d2 e^{-(1/2)∫_s c})`.
#[derive(Debug, Clone)]
pub struct CycleSource {
    q: RateMatrix,
    anchor: usize,
    c: StateTable,
    d: StateTable,
    d2: Option<StateTable>,
}

impl CycleSource {
    pub fn new(
        q: RateMatrix,
        anchor: usize,
        c: StateTable,
        d: StateTable,
        d2: Option<StateTable>,
    ) -> Result<Self> {
        let n = q.n_states();
        if n < 2 {
            return Err(invalid("cycle sources need at least two states"));
        }
        if anchor >= n {
            return Err(invalid(format!("anchor {anchor} out of range")));
        }
        c.check_len(n, "c")?;
        d.check_len(n, "d")?;
        if let Some(t) = &d2 {
            t.check_len(n, "d2")?;
        }
        Ok(Self { q, anchor, c, d, d2 })
    }

    /// Runs one cycle and returns its coefficients along with the cycle
    /// length.
    pub fn draw_with_length(&self, rng: &mut dyn RngCore) -> Result<(Draw, f64)> {
        let mut acc = CycleAccumulator::new(&self.c, &self.d, self.d2.as_ref());
        let mut failure = None;
        let len = run_cycle(&self.q, self.anchor, rng, |seg| {
            if failure.is_none() {
                failure = acc.push(seg).err();
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let cf = acc.finish();
        Ok((Draw::from_log(cf.log_a, cf.b, cf.c.unwrap_or(0.0)), len))
    }
}

impl PairSource for CycleSource {
    fn draw(&self, rng: &mut dyn RngCore) -> Draw {
        // Construction rules out the only failure of run_cycle; numerical
        // overflow inside one cycle surfaces as a non-finite B.
        match self.draw_with_length(rng) {
            Ok((d, _)) => d,
            Err(_) => Draw::from_log(0.0, f64::NAN, f64::NAN),
        }
    }
}

/// Monte Carlo check of `E log|A| < 0`, `E log⁺|B| < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SreDiagnostics {
    pub mean_log_a: f64,
    pub mean_log_a_se: f64,
    pub mean_logplus_b: f64,
    pub mean_logplus_b_se: f64,
    pub n_used: usize,
    pub contractive: bool,
}

pub fn diagnose<S: PairSource + ?Sized, R: RngCore>(
    source: &S,
    n: usize,
    rng: &mut R,
) -> Result<SreDiagnostics> {
    if n < 100 {
        return Err(invalid("diagnostics need at least 100 draws"));
    }
    let draws: Vec<Draw> = (0..n).map(|_| source.draw(rng)).collect();
    if draws.iter().any(|d| !d.b.is_finite() || d.log_abs_a.is_nan()) {
        return Err(Error::Overflow("source produced non-finite coefficients".into()));
    }
    let logs_b: Vec<f64> = draws.iter().map(|d| d.b.abs().max(1.0).ln()).collect();
    let (mean_logplus_b, mean_logplus_b_se) = mean_se(&logs_b);
    let (mean_log_a, mean_log_a_se) = if draws.iter().any(|d| d.log_abs_a == f64::NEG_INFINITY) {
        (f64::NEG_INFINITY, 0.0)
    } else {
        let logs_a: Vec<f64> = draws.iter().map(|d| d.log_abs_a).collect();
        mean_se(&logs_a)
    };
    let contractive = mean_log_a + 3.0 * mean_log_a_se < 0.0;
    if !contractive && draws.iter().all(|d| *d == draws[0]) {
        return Err(Error::DegenerateSource);
    }
    Ok(SreDiagnostics {
        mean_log_a,
        mean_log_a_se,
        mean_logplus_b,
        mean_logplus_b_se,
        n_used: n,
        contractive,
    })
}

/// One draw of the perpetuity `Z = B_1 + A_1 (B_2 + A_2 (...))`.
pub fn sample_fixed_point<S: PairSource + ?Sized>(source: &S, rng: &mut dyn RngCore) -> Result<f64> {
    let mut z = 0.0f64;
    let mut log_prod = 0.0f64;
    let mut sign = 1.0;
    let log_tol = TRUNCATION.ln();
    for _ in 0..MAX_TERMS {
        let d = source.draw(rng);
        if !d.b.is_finite() {
            return Err(Error::Overflow("non-finite B in backward sum".into()));
        }
        if d.b != 0.0 {
            z += sign * log_prod.exp() * d.b;
        }
        log_prod += d.log_abs_a;
        sign *= d.a.signum();
        if log_prod < log_tol + (z.abs() + 1.0).ln() {
            return Ok(z);
        }
    }
    Err(Error::NonContractive { terms: MAX_TERMS })
}

/// `n` steps of `Z <- A Z + B` from `z0`.
pub fn iterate_forward<S: PairSource + ?Sized>(
    source: &S,
    z0: f64,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let mut z = z0;
    for _ in 0..n {
        let d = source.draw(rng);
        z = d.a * z + d.b;
        if !z.is_finite() {
            return Err(Error::Overflow("forward iteration diverged".into()));
        }
    }
    Ok(z)
}

/// Joint draw of `(M*, V*)` solving `M* = √A M* + C`, `V* = A V* + B`
/// with one shared `(A, B, C)` per backward term. Requires `A >= 0`.
pub fn sample_bivariate_fixed_point<S: PairSource + ?Sized>(
    source: &S,
    rng: &mut dyn RngCore,
) -> Result<(f64, f64)> {
    let (mut m, mut v) = (0.0f64, 0.0f64);
    let mut log_prod = 0.0f64;
    let log_tol = TRUNCATION.ln();
    for _ in 0..MAX_TERMS {
        let d = source.draw(rng);
        if d.a < 0.0 {
            return Err(invalid("bivariate recursion needs A >= 0"));
        }
        if !d.b.is_finite() || !d.c.is_finite() {
            return Err(Error::Overflow("non-finite coefficient in backward sum".into()));
        }
        if d.b != 0.0 {
            v += log_prod.exp() * d.b;
        }
        if d.c != 0.0 {
            m += (0.5 * log_prod).exp() * d.c;
        }
        log_prod += d.log_abs_a;
        // Both rows must have converged; the √A row is the slower one
        // whenever A < 1.
        let v_done = log_prod < log_tol + (v.abs() + 1.0).ln();
        let m_done = 0.5 * log_prod < log_tol + (m.abs() + 1.0).ln();
        if v_done && m_done {
            return Ok((m, v));
        }
    }
    Err(Error::NonContractive { terms: MAX_TERMS })
}

/// A moment estimate with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub se: f64,
}

fn binomial(m: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(m - i) / f64::from(i + 1))
}

/// `E Z^m` from a fixed pool of draws given `E Z^k` for `k < m`.
///
/// The standard error linearises `S / (1 - E A^m)` in the pooled means and
/// treats the supplied lower moments as exact.
pub fn moment_from_draws(draws: &[Draw], m: u32, lower: &[f64]) -> Result<MomentEstimate> {
    if m == 0 {
        return Err(invalid("moment order must be at least 1"));
    }
    if lower.len() < m as usize {
        return Err(invalid(format!("need E Z^0..E Z^{} ({} given)", m - 1, lower.len())));
    }
    if draws.len() < 2 {
        return Err(invalid("need at least two draws"));
    }
    let n = draws.len() as f64;
    let am: Vec<f64> = draws.iter().map(|d| d.a.powi(m as i32)).collect();
    let (ea_m, ea_m_se) = mean_se(&am);
    if !ea_m.is_finite() || ea_m >= 1.0 - 3.0 * ea_m_se {
        return Err(Error::MomentDiverges {
            order: m,
            ea_m,
            se: ea_m_se,
        });
    }
    let s: Vec<f64> = draws
        .iter()
        .map(|d| {
            (0..m)
                .map(|k| binomial(m, k) * d.a.powi(k as i32) * d.b.powi((m - k) as i32) * lower[k as usize])
                .sum()
        })
        .collect();
    let value = s.iter().sum::<f64>() / n / (1.0 - ea_m);
    let influence: Vec<f64> = s.iter().zip(&am).map(|(si, ai)| si + value * ai).collect();
    let (_, infl_se) = mean_se(&influence);
    if !value.is_finite() {
        return Err(Error::Overflow("moment estimate is not finite".into()));
    }
    Ok(MomentEstimate {
        value,
        se: infl_se / (1.0 - ea_m),
    })
}

/// `E Z^0, ..., E Z^m` computed recursively over one shared pool.
pub fn moments_recursive(draws: &[Draw], m: u32) -> Result<Vec<MomentEstimate>> {
    let mut out = vec![MomentEstimate { value: 1.0, se: 0.0 }];
    let mut lower = vec![1.0];
    for k in 1..=m {
        let est = moment_from_draws(draws, k, &lower)?;
        lower.push(est.value);
        out.push(est);
    }
    Ok(out)
}

/// `E Z^m` by Monte Carlo over `n` draws, with lower moments either
/// supplied or computed recursively from the same draws.
pub fn moment<S: PairSource + ?Sized, R: RngCore>(
    source: &S,
    m: u32,
    ez_lower: Option<&[f64]>,
    n: usize,
    rng: &mut R,
) -> Result<MomentEstimate> {
    let draws: Vec<Draw> = (0..n).map(|_| source.draw(rng)).collect();
    match ez_lower {
        Some(lower) => moment_from_draws(&draws, m, lower),
        None => Ok(moments_recursive(&draws, m)?[m as usize]),
    }
}

/// Empirical tail index; `nu_hat` is `f64::INFINITY` when the moment
/// equation has no positive root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailIndexEstimate {
    pub nu_hat: f64,
    pub per_state: Option<Vec<f64>>,
    pub n_cycles: usize,
}

impl TailIndexEstimate {
    pub fn is_finite(&self) -> bool {
        self.nu_hat.is_finite()
    }
}

const BISECTION_TOL: f64 = 1e-10;
const DOUBLING_CAP: f64 = 1_152_921_504_606_846_976.0; // 2^60

/// `ln((1/n) Σ e^{c l_i})`, evaluated with a shifted log-sum-exp.
fn log_mean_exp(c: f64, logs: &[f64]) -> f64 {
    let max = logs.iter().map(|&l| c * l).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = logs.iter().map(|&l| (c * l - max).exp()).sum();
    max + s.ln() - (logs.len() as f64).ln()
}

/// Smallest `c > 0` with `(1/n) Σ e^{c log A_i} = 1`.
///
/// The non-arithmetic condition on `log A` cannot be checked from a
/// sample; the estimate is computed regardless.
pub fn goldie_kesten_index(log_a: &[f64]) -> Result<TailIndexEstimate> {
    if log_a.len() < 2 {
        return Err(invalid("tail index needs at least two samples"));
    }
    if log_a.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(invalid("log A samples must be below +inf and not NaN"));
    }
    let mean = log_a.iter().sum::<f64>() / log_a.len() as f64;
    if !(mean < 0.0) {
        return Err(Error::PremiseViolated { mean_log_a: mean });
    }
    let n_cycles = log_a.len();
    let below = |c: f64| log_mean_exp(c, log_a) < 0.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while below(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > DOUBLING_CAP {
            return Ok(TailIndexEstimate {
                nu_hat: f64::INFINITY,
                per_state: None,
                n_cycles,
            });
        }
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TailIndexEstimate {
        nu_hat: 0.5 * (lo + hi),
        per_state: None,
        n_cycles,
    })
}

/// Minimum over per-state indices; infinite when all are.
pub fn nu_star(per_state: &[TailIndexEstimate]) -> Result<f64> {
    if per_state.is_empty() {
        return Err(invalid("no states"));
    }
    Ok(per_state.iter().map(|e| e.nu_hat).fold(f64::INFINITY, f64::min))
}

/// Draws `B ~ N(0, 1)` with a constant `A`.
pub fn gaussian_b_source(a: f64) -> FnSource<impl Fn(&mut dyn RngCore) -> Draw + Send + Sync> {
    FnSource(move |rng: &mut dyn RngCore| {
        let b: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        Draw::new(a, b)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, stream};
    use crate::stats::{ks_one_sample, ks_two_sample, normal_cdf, SampleSet};

    fn benchmark_cycles() -> CycleSource {
        let q = RateMatrix::two_state(1.0, 2.0).unwrap();
        // (c, d) = (2a, b^2) for a = (2, -1), b = (1, 2)
        CycleSource::new(
            q,
            0,
            StateTable::new(vec![4.0, -2.0]).unwrap(),
            StateTable::new(vec![1.0, 4.0]).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn diagnose_examples() {
        let mut rng = seeded(1);
        let half = ConstantSource(Draw::new(0.5, 1.0));
        let d = diagnose(&half, 100, &mut rng).unwrap();
        assert!((d.mean_log_a + 2f64.ln()).abs() < 1e-15);
        assert!(d.contractive);
        assert_eq!(d.n_used, 100);

        let one = FnSource(|rng: &mut dyn RngCore| Draw::new(1.0, rng.random::<f64>()));
        assert!(!diagnose(&one, 1000, &mut rng).unwrap().contractive);
        assert!(matches!(
            diagnose(&ConstantSource(Draw::new(1.0, 1.0)), 100, &mut rng),
            Err(Error::DegenerateSource)
        ));
        assert!(diagnose(&half, 99, &mut rng).is_err());
    }

    #[test]
    fn diagnose_cycle_source_mean_log_a() {
        // E log A = -2 E|I| E_pi a = -2 * 1.5 * 1
        let d = diagnose(&benchmark_cycles(), 100_000, &mut seeded(2)).unwrap();
        assert!((d.mean_log_a + 3.0).abs() < 3.0 * d.mean_log_a_se, "{d:?}");
        assert!(d.contractive);
    }

    #[test]
    fn fixed_point_examples() {
        let mut rng = seeded(3);
        assert_eq!(sample_fixed_point(&ConstantSource(Draw::new(0.0, 7.0)), &mut rng).unwrap(), 7.0);
        let z = sample_fixed_point(&ConstantSource(Draw::new(0.5, 1.0)), &mut rng).unwrap();
        assert!((z - 2.0).abs() < 1e-12);
        assert!(matches!(
            sample_fixed_point(&ConstantSource(Draw::new(1.0, 1.0)), &mut rng),
            Err(Error::NonContractive { .. })
        ));
        let src = gaussian_b_source(0.5);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_fixed_point(&src, &mut rng).unwrap()).collect();
        let sd = (4.0f64 / 3.0).sqrt();
        let d = ks_one_sample(&SampleSet::new(draws).unwrap(), |x| normal_cdf(x / sd)).unwrap();
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn forward_examples() {
        let mut rng = seeded(4);
        let src = ConstantSource(Draw::new(0.5, 1.0));
        assert_eq!(iterate_forward(&src, 3.25, 0, &mut rng).unwrap(), 3.25);
        assert_eq!(iterate_forward(&src, 0.0, 50, &mut rng).unwrap(), 2.0 - 2f64.powi(-49));
        assert!(iterate_forward(&ConstantSource(Draw::new(10.0, 1.0)), 1.0, 400, &mut rng).is_err());
    }

    #[test]
    fn backward_and_forward_agree_on_cycle_source() {
        let src = benchmark_cycles();
        let pool = PoolSource::record(&src, 50_000, &mut seeded(5)).unwrap();
        for (k, s) in [&src as &dyn PairSource, &pool as &dyn PairSource].into_iter().enumerate() {
            let back: Vec<f64> = (0..10_000)
                .map(|i| sample_fixed_point(s, &mut stream(6, "back", (k * 100_000 + i) as u64)).unwrap())
                .collect();
            let fwd: Vec<f64> = (0..10_000)
                .map(|i| iterate_forward(s, 0.0, 200, &mut stream(6, "fwd", (k * 100_000 + i) as u64)).unwrap())
                .collect();
            let (d, _) = ks_two_sample(&SampleSet::new(back).unwrap(), &SampleSet::new(fwd).unwrap()).unwrap();
            // 1% critical value for n = m = 1e4
            assert!(d < 0.023, "source {k}: {d}");
        }
    }

    #[test]
    fn fixed_point_is_invariant_under_one_step() {
        let src = benchmark_cycles();
        let mut rng = seeded(7);
        let pushed: Vec<f64> = (0..10_000)
            .map(|_| {
                let z = sample_fixed_point(&src, &mut rng).unwrap();
                let d = src.draw(&mut rng);
                d.a * z + d.b
            })
            .collect();
        let fresh: Vec<f64> = (0..10_000).map(|_| sample_fixed_point(&src, &mut rng).unwrap()).collect();
        let (d, _) = ks_two_sample(&SampleSet::new(pushed).unwrap(), &SampleSet::new(fresh).unwrap()).unwrap();
        assert!(d < 0.02, "{d}");
    }

    #[test]
    fn moment_examples() {
        let mut rng = seeded(8);
        let src = ConstantSource(Draw::new(0.5, 1.0));
        assert_eq!(moment(&src, 1, None, 10, &mut rng).unwrap().value, 2.0);
        assert_eq!(moment(&src, 2, Some(&[1.0, 2.0]), 10, &mut rng).unwrap().value, 4.0);
        assert_eq!(moment(&src, 2, None, 10, &mut rng).unwrap().value, 4.0);

        let m2 = moment(&gaussian_b_source(0.5), 2, None, 100_000, &mut rng).unwrap();
        assert!((m2.value - 4.0 / 3.0).abs() < 3.0 * m2.se, "{m2:?}");

        assert!(matches!(
            moment(&ConstantSource(Draw::new(1.0, 1.0)), 1, None, 10, &mut rng),
            Err(Error::MomentDiverges { order: 1, .. })
        ));
    }

    #[test]
    fn moment_agrees_with_fixed_point_draws() {
        let src = FnSource(|rng: &mut dyn RngCore| {
            let u: f64 = rng.random();
            Draw::new(0.2 + 0.5 * u, rng.random::<f64>() + 0.5)
        });
        let mut rng = seeded(9);
        let m2 = moment(&src, 2, None, 200_000, &mut rng).unwrap();
        let z: Vec<f64> = (0..50_000).map(|_| sample_fixed_point(&src, &mut rng).unwrap()).collect();
        let (emp, emp_se) = crate::stats::moments_with_se(&SampleSet::new(z).unwrap(), 2).unwrap();
        let se = (m2.se * m2.se + emp_se * emp_se).sqrt();
        assert!((m2.value - emp).abs() < 3.0 * se, "{m2:?} vs {emp} +- {emp_se}");
    }

    // Independent oracle: bisection on e^{-2c} + e^{c} = 2 in plain form.
    fn two_point_root() -> f64 {
        let f = |c: f64| (-2.0 * c).exp() + c.exp() - 2.0;
        let (mut lo, mut hi) = (0.1, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        lo
    }

    #[test]
    fn tail_index_examples() {
        let root = two_point_root();
        assert!((root - 0.481_211_825_059_603_4).abs() < 1e-14);
        let est = goldie_kesten_index(&[-2.0, 1.0]).unwrap();
        assert!((est.nu_hat - root).abs() < 1e-9);
        let mean_at_root: f64 = ((-2.0 * est.nu_hat).exp() + est.nu_hat.exp()) / 2.0;
        assert!((mean_at_root - 1.0).abs() < 1e-9);

        let neg = goldie_kesten_index(&[-1.0, -0.5, -3.0]).unwrap();
        assert!(!neg.is_finite());
        assert!(matches!(
            goldie_kesten_index(&[-0.7, 0.7]),
            Err(Error::PremiseViolated { .. })
        ));
        assert!(goldie_kesten_index(&[-1.0]).is_err());
    }

    #[test]
    fn tail_index_consistency_improves_with_n() {
        // log A = -1 + N(0, 1): E A^c = e^{-c + c^2/2} = 1 at c = 2.
        let est_err = |n: usize, rep: u64| {
            let mut rng = stream(10, "gk", rep * 1_000_000 + n as u64);
            let logs: Vec<f64> = (0..n)
                .map(|_| -1.0 + rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
                .collect();
            (goldie_kesten_index(&logs).unwrap().nu_hat - 2.0).abs()
        };
        let median = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            0.5 * (v[9] + v[10])
        };
        let small = median((0..20).map(|r| est_err(1_000, r)).collect());
        let large = median((0..20).map(|r| est_err(100_000, r)).collect());
        assert!(large < small, "{large} vs {small}");
    }

    #[test]
    fn nu_star_examples() {
        let e = |v: f64| TailIndexEstimate { nu_hat: v, per_state: None, n_cycles: 1 };
        assert_eq!(nu_star(&[e(1.5), e(2.0)]).unwrap(), 1.5);
        assert_eq!(nu_star(&[e(f64::INFINITY), e(f64::INFINITY)]).unwrap(), f64::INFINITY);
        assert_eq!(nu_star(&[e(0.4814), e(f64::INFINITY)]).unwrap(), 0.4814);
        assert!(nu_star(&[]).is_err());
    }

    #[test]
    fn bivariate_examples() {
        let mut rng = seeded(11);
        let (m, v) = sample_bivariate_fixed_point(&ConstantSource(Draw::triple(0.25, 0.0, 1.0)), &mut rng).unwrap();
        assert!((m - 2.0).abs() < 1e-12 && v == 0.0);
        let (m, v) = sample_bivariate_fixed_point(&ConstantSource(Draw::triple(0.25, 3.0, 1.0)), &mut rng).unwrap();
        assert!((m - 2.0).abs() < 1e-12 && (v - 4.0).abs() < 1e-12);

        // C = 0: M* = 0 and V* has the univariate law
        let src = benchmark_cycles();
        let biv: Vec<f64> = (0..10_000)
            .map(|_| {
                let (m, v) = sample_bivariate_fixed_point(&src, &mut rng).unwrap();
                assert_eq!(m, 0.0);
                v
            })
            .collect();
        let uni: Vec<f64> = (0..10_000).map(|_| sample_fixed_point(&src, &mut rng).unwrap()).collect();
        let (d, _) = ks_two_sample(&SampleSet::new(biv).unwrap(), &SampleSet::new(uni).unwrap()).unwrap();
        assert!(d < 0.02, "{d}");
    }
}

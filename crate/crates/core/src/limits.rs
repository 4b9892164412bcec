//! Regime classification and the √t-scaled limit laws of `log |Y_t|`
//! outside the stable regime.

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{run_cycle, simulate_path, stationary_distribution, ChainPath, RateMatrix, StationaryDist};
use crate::error::{invalid, Error, Result};
use crate::ou::{self, walk_path, OuModel, NULL_TOLERANCE};
use crate::pathfunc::{g_function, ScaledValue, StateTable};
use crate::rng::{stream, SimRng};
use crate::stats::{ks_two_sample, normal_cdf, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Stable,
    NullRecurrent,
    Transient,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Stable => "stable",
            Regime::NullRecurrent => "null_recurrent",
            Regime::Transient => "transient",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeClass {
    pub e_pi_a: f64,
    pub regime: Regime,
    /// Whether the sign was decided in exact arithmetic.
    pub exact: bool,
}

/// Sign of `E_pi a`, with `|E_pi a| < 1e-12` declared null.
pub fn classify(a: &StateTable, pi: &StationaryDist) -> Result<RegimeClass> {
    a.check_len(pi.pi.len(), "a")?;
    let e_pi_a = pi.expect(a.values());
    let regime = if e_pi_a.abs() < NULL_TOLERANCE {
        Regime::NullRecurrent
    } else if e_pi_a > 0.0 {
        Regime::Stable
    } else {
        Regime::Transient
    };
    Ok(RegimeClass { e_pi_a, regime, exact: false })
}

/// Stationary distribution of a chain with rational off-diagonal rates,
/// solved exactly.
pub fn exact_stationary(rates: &[Vec<BigRational>]) -> Result<Vec<BigRational>> {
    let n = rates.len();
    if n == 0 || rates.iter().any(|r| r.len() != n) {
        return Err(invalid("rate table must be square and non-empty"));
    }
    // Rows of the transposed generator, last one replaced by Σ pi = 1.
    let mut m: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            let mut row: Vec<BigRational> = (0..n)
                .map(|j| {
                    if i == j {
                        -rates[j].iter().enumerate().filter(|(k, _)| *k != j).fold(BigRational::zero(), |acc, (_, v)| acc + v)
                    } else {
                        rates[j][i].clone()
                    }
                })
                .collect();
            row.push(BigRational::zero());
            row
        })
        .collect();
    m[n - 1] = vec![BigRational::from_integer(1.into()); n + 1];
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !m[r][col].is_zero())
            .ok_or(Error::SingularSystem { residual: f64::NAN })?;
        m.swap(col, pivot);
        let p = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v = &*v / &p;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for k in col..=n {
                    let sub = &f * &m[col][k];
                    m[r][k] -= sub;
                }
            }
        }
    }
    let pi: Vec<BigRational> = m.into_iter().map(|row| row[n].clone()).collect();
    if pi.iter().any(|p| p.is_negative()) {
        return Err(Error::SingularSystem { residual: f64::NAN });
    }
    Ok(pi)
}

/// Classification in exact arithmetic, for rational rates and drift.
pub fn classify_exact(rates: &[Vec<BigRational>], a: &[BigRational]) -> Result<RegimeClass> {
    if a.len() != rates.len() {
        return Err(invalid("table a does not match the number of states"));
    }
    let pi = exact_stationary(rates)?;
    let e: BigRational = pi.iter().zip(a).map(|(p, v)| p * v).sum();
    let regime = if e.is_zero() {
        Regime::NullRecurrent
    } else if e.is_positive() {
        Regime::Stable
    } else {
        Regime::Transient
    };
    Ok(RegimeClass {
        e_pi_a: e.to_f64().unwrap_or(f64::NAN),
        regime,
        exact: true,
    })
}

/// Which cycle-reward variance feeds the limit scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigmaConvention {
    /// `Var(∫_cycle a)`.
    Literal,
    /// `Var(∫_cycle a - E_pi a |I|)`, the renewal-reward CLT variance.
    #[default]
    Centered,
}

/// Cycle statistics for one anchor state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateClt {
    pub anchor: usize,
    pub sigma: f64,
    pub sigma_se: f64,
    pub mean_cycle: f64,
    pub mean_cycle_se: f64,
    pub scale: f64,
    pub scale_se: f64,
    pub centered_sigma: f64,
    pub centered_sigma_se: f64,
    pub centered_scale: f64,
    pub centered_scale_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleCltParams {
    pub e_pi_a: f64,
    pub n_cycles: usize,
    pub states: Vec<StateClt>,
}

impl CycleCltParams {
    pub fn scales(&self, convention: SigmaConvention) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| match convention {
                SigmaConvention::Literal => s.scale,
                SigmaConvention::Centered => s.centered_scale,
            })
            .collect()
    }

    /// Every `sigma` scaled by `k` (the CIR factor).
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.states {
            s.sigma *= k;
            s.sigma_se *= k;
            s.scale *= k;
            s.scale_se *= k;
            s.centered_sigma *= k;
            s.centered_sigma_se *= k;
            s.centered_scale *= k;
            s.centered_scale_se *= k;
        }
        out
    }
}

/// Running power sums of per-cycle `(reward, length)` pairs.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: f64,
    r: f64,
    rr: f64,
    l: f64,
    ll: f64,
    rl: f64,
}

impl Sums {
    fn add(&mut self, r: f64, l: f64, sign: f64) {
        self.n += sign;
        self.r += sign * r;
        self.rr += sign * r * r;
        self.l += sign * l;
        self.ll += sign * l * l;
        self.rl += sign * r * l;
    }

    fn without(mut self, r: f64, l: f64) -> Self {
        self.add(r, l, -1.0);
        self
    }

    /// Bessel-corrected variance of `r - mu l`.
    fn var(&self, mu: f64) -> f64 {
        let n = self.n;
        let var_r = (self.rr - self.r * self.r / n) / (n - 1.0);
        let var_l = (self.ll - self.l * self.l / n) / (n - 1.0);
        let cov = (self.rl - self.r * self.l / n) / (n - 1.0);
        (var_r - 2.0 * mu * cov + mu * mu * var_l).max(0.0)
    }

    fn mean_l(&self) -> f64 {
        self.l / self.n
    }
}

/// Delete-one jackknife standard error of a statistic of the sums.
fn jackknife<F: Fn(&Sums) -> f64>(all: &Sums, pairs: &[(f64, f64)], stat: F) -> f64 {
    let n = pairs.len() as f64;
    let loo: Vec<f64> = pairs.iter().map(|&(r, l)| stat(&all.without(r, l))).collect();
    let mean = loo.iter().sum::<f64>() / n;
    ((n - 1.0) / n * loo.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()).sqrt()
}

/// Per-anchor cycle CLT constants from `n_cycles` fresh cycles each.
///
/// Anchor `j` uses the stream `(seed, "clt", j)`. A one-state chain has
/// no cycles; its reward is deterministic and every scale is 0 with an
/// infinite mean cycle length.
pub fn cycle_clt_params(q: &RateMatrix, a: &StateTable, n_cycles: usize, seed: u64) -> Result<CycleCltParams> {
    cycle_clt_params_with_mean(q, a, n_cycles, seed, None)
}

/// [`cycle_clt_params`] with the centring mean `E_pi a` supplied (e.g.
/// from exact arithmetic) instead of computed in floating point.
pub fn cycle_clt_params_with_mean(
    q: &RateMatrix,
    a: &StateTable,
    n_cycles: usize,
    seed: u64,
    e_pi_a: Option<f64>,
) -> Result<CycleCltParams> {
    let n = q.n_states();
    a.check_len(n, "a")?;
    if n_cycles < 100 {
        return Err(invalid("cycle CLT parameters need at least 100 cycles"));
    }
    let e_pi_a = match e_pi_a {
        Some(v) => v,
        None => stationary_distribution(q)?.expect(a.values()),
    };
    if n == 1 {
        return Ok(CycleCltParams {
            e_pi_a,
            n_cycles: 0,
            states: vec![StateClt {
                anchor: 0,
                sigma: 0.0,
                sigma_se: 0.0,
                mean_cycle: f64::INFINITY,
                mean_cycle_se: 0.0,
                scale: 0.0,
                scale_se: 0.0,
                centered_sigma: 0.0,
                centered_sigma_se: 0.0,
                centered_scale: 0.0,
                centered_scale_se: 0.0,
            }],
        });
    }
    let states = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, "clt", j as u64);
            let mut pairs = Vec::with_capacity(n_cycles);
            for _ in 0..n_cycles {
                let mut reward = 0.0;
                let len = run_cycle(q, j, &mut rng, |s| reward += a[s.state] * s.duration)?;
                pairs.push((reward, len));
            }
            Ok(state_clt(j, &pairs, e_pi_a))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CycleCltParams { e_pi_a, n_cycles, states })
}

fn state_clt(anchor: usize, pairs: &[(f64, f64)], e_pi_a: f64) -> StateClt {
    let mut all = Sums::default();
    for &(r, l) in pairs {
        all.add(r, l, 1.0);
    }
    let sigma = |s: &Sums| s.var(0.0).sqrt();
    let centered = |s: &Sums| s.var(e_pi_a).sqrt();
    let scale = |s: &Sums| (s.var(0.0) / s.mean_l()).sqrt();
    let centered_scale = |s: &Sums| (s.var(e_pi_a) / s.mean_l()).sqrt();
    let mean_l = |s: &Sums| s.mean_l();
    StateClt {
        anchor,
        sigma: sigma(&all),
        sigma_se: jackknife(&all, pairs, sigma),
        mean_cycle: mean_l(&all),
        mean_cycle_se: jackknife(&all, pairs, mean_l),
        scale: scale(&all),
        scale_se: jackknife(&all, pairs, scale),
        centered_sigma: centered(&all),
        centered_sigma_se: jackknife(&all, pairs, centered),
        centered_scale: centered_scale(&all),
        centered_scale_se: jackknife(&all, pairs, centered_scale),
    }
}

/// `log|v| / sqrt(t) + sqrt(t) e_pi_a` for each `(t, v)`.
pub fn scaled_log_statistic(values: &[(f64, f64)], e_pi_a: f64) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&(t, v)| scaled_from_log(t, v.abs().ln(), e_pi_a))
        .collect()
}

/// The same statistic from an already computed `log|v|`.
pub fn scaled_from_log(t: f64, log_abs: f64, e_pi_a: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("statistic needs t > 0, got {t}")));
    }
    if log_abs == f64::NEG_INFINITY {
        return Err(Error::ZeroValue { t });
    }
    let s = t.sqrt();
    Ok(log_abs / s + s * e_pi_a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    MixtureNormal,
    MixtureHalfnormal,
    MixtureNormalMaxn,
    MixtureHalfnormalMaxn,
    Degenerate,
}

/// `scale_U * Z` with `U ~ pi` and `Z` one of `N`, `|N|`, `max_i N_i`,
/// `max_i |N_i|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitLaw {
    pub kind: LimitKind,
    pub pi: Vec<f64>,
    pub scales: Vec<f64>,
    pub n_max: Option<usize>,
}

impl LimitLaw {
    /// Collapses to [`LimitKind::Degenerate`] when every scale is 0.
    pub fn new(kind: LimitKind, pi: Vec<f64>, scales: Vec<f64>, n_max: Option<usize>) -> Result<Self> {
        if pi.len() != scales.len() || pi.is_empty() {
            return Err(invalid("limit law needs one scale per state"));
        }
        if scales.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(invalid("limit scales must be finite and >= 0"));
        }
        if (pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("limit weights must sum to 1"));
        }
        let maxn = matches!(kind, LimitKind::MixtureNormalMaxn | LimitKind::MixtureHalfnormalMaxn);
        if maxn && !matches!(n_max, Some(k) if k >= 1) {
            return Err(invalid("max-of-n limit needs n_max >= 1"));
        }
        let kind = if scales.iter().all(|&s| s == 0.0) { LimitKind::Degenerate } else { kind };
        Ok(Self {
            kind,
            pi,
            n_max: if maxn { n_max } else { None },
            scales,
        })
    }

    fn pick(&self, rng: &mut dyn RngCore) -> usize {
        let u: f64 = rand::Rng::random(rng);
        let mut acc = 0.0;
        for (j, p) in self.pi.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        self.pi.len() - 1
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let mut normal = || -> f64 { StandardNormal.sample(rng) };
        let z = match self.kind {
            LimitKind::Degenerate => return 0.0,
            LimitKind::MixtureNormal => normal(),
            LimitKind::MixtureHalfnormal => normal().abs(),
            LimitKind::MixtureNormalMaxn => (0..self.n_max.unwrap_or(1)).map(|_| normal()).fold(f64::NEG_INFINITY, f64::max),
            LimitKind::MixtureHalfnormalMaxn => (0..self.n_max.unwrap_or(1)).map(|_| normal().abs()).fold(0.0, f64::max),
        };
        self.scales[self.pick(rng)] * z
    }

    pub fn sample_n(&self, n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.n_max.unwrap_or(1) as i32;
        self.pi
            .iter()
            .zip(&self.scales)
            .map(|(&p, &s)| {
                let f = if self.kind == LimitKind::Degenerate || s == 0.0 {
                    f64::from(u8::from(x >= 0.0))
                } else {
                    let phi = normal_cdf(x / s);
                    match self.kind {
                        LimitKind::MixtureNormal => phi,
                        LimitKind::MixtureNormalMaxn => phi.powi(k),
                        LimitKind::MixtureHalfnormal if x >= 0.0 => 2.0 * phi - 1.0,
                        LimitKind::MixtureHalfnormalMaxn if x >= 0.0 => (2.0 * phi - 1.0).powi(k),
                        _ => 0.0,
                    }
                };
                p * f
            })
            .sum()
    }
}

/// Long-time limit for a regime: normal when transient, half-normal
/// when null-recurrent.
pub fn limit_sampler(params: &CycleCltParams, pi: &StationaryDist, regime: Regime, convention: SigmaConvention) -> Result<LimitLaw> {
    let kind = match regime {
        Regime::Transient => LimitKind::MixtureNormal,
        Regime::NullRecurrent => LimitKind::MixtureHalfnormal,
        Regime::Stable => {
            return Err(Error::WrongRegime {
                expected: "transient or null_recurrent",
                actual: "stable",
            })
        }
    };
    LimitLaw::new(kind, pi.pi.clone(), params.scales(convention), None)
}

/// A process whose `log |value|` can be simulated on a grid and whose
/// growth rate is `-factor * ∫ rate(X)`.
pub trait LogTarget: Sync {
    fn chain(&self) -> &RateMatrix;
    /// The per-state rate that decides the regime.
    fn rate(&self) -> &StateTable;
    /// Multiplier of the rate in the growth exponent (2 for squared
    /// processes).
    fn factor(&self) -> f64 {
        1.0
    }
    fn initial_state(&self) -> Option<usize>;
    /// `ln |value|` at the record times along a given environment path.
    fn log_abs_on_path(&self, path: &ChainPath, record_at: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>>;
    /// Limit law for the scaled statistic given per-state scales of the
    /// rate's cycle CLT.
    fn limit_law(&self, params: &CycleCltParams, pi: &StationaryDist, regime: Regime, convention: SigmaConvention) -> Result<LimitLaw> {
        limit_sampler(&params.scaled(self.factor()), pi, regime, convention)
    }
}

impl LogTarget for OuModel {
    fn chain(&self) -> &RateMatrix {
        &self.q
    }
    fn rate(&self) -> &StateTable {
        &self.a
    }
    fn initial_state(&self) -> Option<usize> {
        self.x0
    }
    fn log_abs_on_path(&self, path: &ChainPath, record_at: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        ou::simulate_log_abs(self, path, record_at, rng)
    }
}

/// `F_t = f0 e^{-∫_0^t c} + ∫_0^t d(X_s) e^{-∫_s^t c} ds`.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalModel {
    pub q: RateMatrix,
    pub c: StateTable,
    pub d: StateTable,
    pub f0: f64,
    pub x0: Option<usize>,
}

impl FunctionalModel {
    pub fn new(q: RateMatrix, c: StateTable, d: StateTable, f0: f64) -> Result<Self> {
        let n = q.n_states();
        c.check_len(n, "c")?;
        d.check_len(n, "d")?;
        if !f0.is_finite() {
            return Err(invalid("initial value must be finite"));
        }
        Ok(Self { q, c, d, f0, x0: None })
    }
}

impl LogTarget for FunctionalModel {
    fn chain(&self) -> &RateMatrix {
        &self.q
    }
    fn rate(&self) -> &StateTable {
        &self.c
    }
    fn initial_state(&self) -> Option<usize> {
        self.x0
    }
    fn log_abs_on_path(&self, path: &ChainPath, record_at: &[f64], _rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let mut f = ScaledValue::new(self.f0);
        let mut out = Vec::with_capacity(record_at.len());
        walk_path(path, record_at, |state, dt, rec| {
            if dt > 0.0 {
                f.scale(-self.c[state] * dt);
                f.add(g_function(self.c[state], self.d[state], dt));
            }
            if rec.is_some() {
                out.push(f.ln_abs());
            }
            Ok(())
        })?;
        Ok(out)
    }
}

/// Settings of a regime experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub t_grid: Vec<f64>,
    pub replicates: usize,
    pub limit_draws: usize,
    pub n_cycles: usize,
    pub seed: u64,
    pub convention: SigmaConvention,
    /// Classification decided elsewhere (exact rational input).
    pub class: Option<RegimeClass>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerT {
    pub t: f64,
    pub statistics: Vec<f64>,
    /// Replicate index of each statistic.
    pub replicates: Vec<usize>,
    pub ks: f64,
    pub ks_scaled: f64,
    /// Replicates whose value was exactly zero (statistic undefined).
    pub dropped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeExperiment {
    pub class: RegimeClass,
    pub params: CycleCltParams,
    pub law: LimitLaw,
    pub per_t: Vec<PerT>,
    /// KS at the last grid time is below KS at the first.
    pub ks_decreasing: bool,
}

/// Simulates independent replicates of `log |value|` on the grid.
/// Replicate `k` uses the stream `(seed, "replicate", k)` for both the
/// environment and the noise.
pub fn simulate_log_replicates<T: LogTarget + ?Sized>(
    target: &T,
    t_grid: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let horizon = t_grid.iter().copied().fold(f64::NAN, f64::max);
    let pi = stationary_distribution(target.chain())?;
    (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng: SimRng = stream(seed, "replicate", k as u64);
            let x0 = target.initial_state().unwrap_or_else(|| pi.sample(&mut rng));
            let path = simulate_path(target.chain(), x0, horizon, &mut rng)?;
            target.log_abs_on_path(&path, t_grid, &mut rng)
        })
        .collect()
}

/// Runs the experiment: cycle constants, limit law, replicates, and the
/// two-sample KS distance between the statistic and limit draws per `t`.
pub fn regime_experiment<T: LogTarget + ?Sized>(target: &T, spec: &ExperimentSpec) -> Result<RegimeExperiment> {
    if spec.t_grid.is_empty() || spec.t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(invalid("time grid must be non-empty with positive times"));
    }
    if spec.t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    if spec.replicates < 2 || spec.limit_draws < 2 {
        return Err(invalid("need at least two replicates and two limit draws"));
    }
    let q = target.chain();
    let pi = stationary_distribution(q)?;
    let class = match spec.class {
        Some(c) => c,
        None => classify(target.rate(), &pi)?,
    };
    if class.regime == Regime::Stable {
        return Err(Error::WrongRegime {
            expected: "transient or null_recurrent",
            actual: "stable",
        });
    }
    let mean = class.exact.then_some(class.e_pi_a);
    let params = cycle_clt_params_with_mean(q, target.rate(), spec.n_cycles, spec.seed, mean)?;
    let law = target.limit_law(&params, &pi, class.regime, spec.convention)?;
    let mut limit_rng = stream(spec.seed, "limit", 0);
    let limit = SampleSet::new(law.sample_n(spec.limit_draws, &mut limit_rng))?;

    let logs = simulate_log_replicates(target, &spec.t_grid, spec.replicates, spec.seed)?;
    let rate = target.factor() * class.e_pi_a;
    let mut per_t = Vec::with_capacity(spec.t_grid.len());
    for (i, &t) in spec.t_grid.iter().enumerate() {
        let mut stats = Vec::with_capacity(spec.replicates);
        let mut kept = Vec::with_capacity(spec.replicates);
        let mut dropped = 0;
        for (k, rep) in logs.iter().enumerate() {
            match scaled_from_log(t, rep[i], rate) {
                Ok(s) => {
                    stats.push(s);
                    kept.push(k);
                }
                Err(Error::ZeroValue { .. }) => dropped += 1,
                Err(e) => return Err(e),
            }
        }
        let set = SampleSet::new(stats.clone())?;
        let (ks, ks_scaled) = ks_two_sample(&set, &limit)?;
        per_t.push(PerT {
            t,
            statistics: stats,
            replicates: kept,
            ks,
            ks_scaled,
            dropped,
        });
    }
    let ks_decreasing = per_t.len() < 2 || per_t[per_t.len() - 1].ks < per_t[0].ks;
    Ok(RegimeExperiment {
        class,
        params,
        law,
        per_t,
        ks_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::stats::mean_se;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    fn two_state() -> RateMatrix {
        RateMatrix::two_state(1.0, 2.0).unwrap()
    }

    fn table(v: &[f64]) -> StateTable {
        StateTable::new(v.to_vec()).unwrap()
    }

    #[test]
    fn classify_examples() {
        let pi = stationary_distribution(&two_state()).unwrap();
        let c = classify(&table(&[2.0, -1.0]), &pi).unwrap();
        assert!((c.e_pi_a - 1.0).abs() < 1e-15);
        assert_eq!(c.regime, Regime::Stable);
        assert_eq!(classify(&table(&[1.0, -2.0]), &pi).unwrap().regime, Regime::NullRecurrent);
        let c = classify(&table(&[-2.0, 1.0]), &pi).unwrap();
        assert_eq!(c.regime, Regime::Transient);
        assert!((c.e_pi_a + 1.0).abs() < 1e-15);
    }

    #[test]
    fn classify_sign_equivariance() {
        let pi = stationary_distribution(&two_state()).unwrap();
        for a in [[2.0, -1.0], [-2.0, 1.0], [1.0, -2.0], [0.3, 0.1]] {
            let base = classify(&table(&a), &pi).unwrap().regime;
            for k in [0.5, 3.0] {
                assert_eq!(classify(&table(&a).map(|v| k * v), &pi).unwrap().regime, base);
            }
            let flipped = classify(&table(&a).map(|v| -2.0 * v), &pi).unwrap().regime;
            let expected = match base {
                Regime::Stable => Regime::Transient,
                Regime::Transient => Regime::Stable,
                Regime::NullRecurrent => Regime::NullRecurrent,
            };
            assert_eq!(flipped, expected);
        }
    }

    #[test]
    fn exact_classification() {
        let z = r(0, 1);
        let rates = vec![vec![z.clone(), r(1, 1)], vec![r(2, 1), z.clone()]];
        assert_eq!(exact_stationary(&rates).unwrap(), vec![r(2, 3), r(1, 3)]);
        let c = classify_exact(&rates, &[r(1, 1), r(-2, 1)]).unwrap();
        assert_eq!((c.regime, c.e_pi_a, c.exact), (Regime::NullRecurrent, 0.0, true));
        // a tiny but non-zero mean stays non-null in exact arithmetic
        let c = classify_exact(&rates, &[r(1, 1), r(-1_999_999_999_999, 1_000_000_000_000)]).unwrap();
        assert_eq!(c.regime, Regime::Stable);
        let cyc = vec![
            vec![z.clone(), r(1, 1), z.clone()],
            vec![z.clone(), z.clone(), r(1, 1)],
            vec![r(1, 1), z.clone(), z.clone()],
        ];
        assert_eq!(exact_stationary(&cyc).unwrap(), vec![r(1, 3); 3]);
    }

    #[test]
    fn clt_params_two_state_oracle() {
        // reward E1 - 2 E2 with E1 ~ Exp(1), E2 ~ Exp(2): Var = 2, E|I| = 3/2
        let p = cycle_clt_params(&two_state(), &table(&[1.0, -2.0]), 100_000, 1).unwrap();
        for s in &p.states {
            assert!((s.sigma.powi(2) - 2.0).abs() < 3.0 * 2.0 * s.sigma * s.sigma_se, "{s:?}");
            assert!((s.mean_cycle - 1.5).abs() < 3.0 * s.mean_cycle_se, "{s:?}");
            assert!((s.scale.powi(2) - 4.0 / 3.0).abs() < 3.0 * 2.0 * s.scale * s.scale_se, "{s:?}");
        }
        let zero = cycle_clt_params(&two_state(), &table(&[0.0, 0.0]), 100, 1).unwrap();
        assert!(zero.states.iter().all(|s| s.sigma == 0.0 && s.centered_sigma == 0.0));
    }

    #[test]
    fn centred_and_literal_differ_when_transient() {
        // a = (-2, 1): Var(R) = 4 + 1/4, Var(R + |I|) = 1 + 1
        let p = cycle_clt_params(&two_state(), &table(&[-2.0, 1.0]), 100_000, 2).unwrap();
        for s in &p.states {
            assert!((s.sigma.powi(2) - 4.25).abs() < 3.0 * 2.0 * s.sigma * s.sigma_se, "{s:?}");
            assert!((s.centered_sigma.powi(2) - 2.0).abs() < 3.0 * 2.0 * s.centered_sigma * s.centered_sigma_se, "{s:?}");
        }
    }

    #[test]
    fn null_scale_is_anchor_free_on_three_states() {
        let q = RateMatrix::new(&[vec![0.0, 1.0, 0.5], vec![2.0, 0.0, 1.0], vec![0.5, 1.5, 0.0]]).unwrap();
        let pi = stationary_distribution(&q).unwrap();
        // shift a so that E_pi a = 0
        let raw = [1.0, -0.5, 2.0];
        let mean = pi.expect(&raw);
        let a = table(&raw).map(|v| v - mean);
        let p = cycle_clt_params(&q, &a, 100_000, 3).unwrap();
        for i in 0..3 {
            for j in 0..i {
                let (x, y) = (p.states[i], p.states[j]);
                let se = (x.scale_se.powi(2) + y.scale_se.powi(2)).sqrt();
                assert!((x.scale - y.scale).abs() < 3.0 * se, "{x:?} {y:?}");
            }
        }
    }

    #[test]
    fn statistic_examples() {
        assert_eq!(scaled_log_statistic(&[(400.0, 1.0)], 0.0).unwrap(), vec![0.0]);
        let s = scaled_log_statistic(&[(100.0, (-90f64).exp())], 1.0).unwrap()[0];
        assert!((s - 1.0).abs() < 1e-13);
        let s = scaled_log_statistic(&[(100.0, 90f64.exp())], -1.0).unwrap()[0];
        assert!((s + 1.0).abs() < 1e-13);
        assert!(matches!(scaled_log_statistic(&[(1.0, 0.0)], 0.0), Err(Error::ZeroValue { .. })));
        assert_eq!(
            scaled_log_statistic(&[(7.0, -3.5)], 0.2).unwrap(),
            scaled_log_statistic(&[(7.0, 3.5)], 0.2).unwrap()
        );
    }

    #[test]
    fn deterministic_environment_statistic_is_zero() {
        let m = OuModel::new(RateMatrix::single(), table(&[0.7]), table(&[0.0]), None, 1.0).unwrap();
        let logs = simulate_log_replicates(&m, &[1.0, 10.0, 100.0], 3, 1).unwrap();
        for rep in logs {
            for (t, l) in [1.0, 10.0, 100.0].iter().zip(rep) {
                assert!(scaled_from_log(*t, l, 0.7).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn limit_law_examples() {
        let mut rng = seeded(4);
        let deg = LimitLaw::new(LimitKind::MixtureNormal, vec![0.5, 0.5], vec![0.0, 0.0], None).unwrap();
        assert_eq!(deg.kind, LimitKind::Degenerate);
        assert_eq!(deg.sample(&mut rng), 0.0);
        assert_eq!(deg.cdf(-1e-9), 0.0);

        let sigma = (4.0f64 / 3.0).sqrt();
        let half = LimitLaw::new(LimitKind::MixtureHalfnormal, vec![1.0], vec![sigma], None).unwrap();
        let draws = half.sample_n(100_000, &mut rng);
        let (m, se) = mean_se(&draws);
        assert!((m - sigma * (2.0 / std::f64::consts::PI).sqrt()).abs() < 3.0 * se);

        let normal = LimitLaw::new(LimitKind::MixtureNormal, vec![1.0], vec![sigma], None).unwrap();
        let abs: Vec<f64> = normal.sample_n(100_000, &mut rng).into_iter().map(f64::abs).collect();
        let (d, _) = ks_two_sample(&SampleSet::new(abs).unwrap(), &SampleSet::new(draws).unwrap()).unwrap();
        assert!(d < 0.01, "{d}");

        let one = LimitLaw::new(LimitKind::MixtureNormalMaxn, vec![1.0], vec![2.0], Some(1)).unwrap();
        assert_eq!(one.cdf(0.7), normal_cdf(0.35));
        let maxn = LimitLaw::new(LimitKind::MixtureHalfnormalMaxn, vec![0.25, 0.75], vec![1.0, 2.0], Some(3)).unwrap();
        let s = SampleSet::new(maxn.sample_n(100_000, &mut rng)).unwrap();
        let d = crate::stats::ks_one_sample(&s, |x| maxn.cdf(x)).unwrap();
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn experiment_rejects_stable() {
        let m = OuModel::new(two_state(), table(&[2.0, -1.0]), table(&[1.0, 2.0]), None, 0.0).unwrap();
        let spec = ExperimentSpec {
            t_grid: vec![10.0],
            replicates: 10,
            limit_draws: 10,
            n_cycles: 100,
            seed: 1,
            convention: SigmaConvention::Centered,
            class: None,
        };
        assert!(matches!(regime_experiment(&m, &spec), Err(Error::WrongRegime { .. })));
    }

    #[test]
    fn functional_log_matches_direct_evaluation() {
        let f = FunctionalModel::new(two_state(), table(&[0.5, -0.25]), table(&[1.0, 3.0]), 0.0).unwrap();
        let mut rng = seeded(5);
        let path = simulate_path(&f.q, 0, 20.0, &mut rng).unwrap();
        let at = [3.0, 11.0, 20.0];
        let logs = f.log_abs_on_path(&path, &at, &mut rng).unwrap();
        let direct = crate::pathfunc::evaluate_f_at(&path, &f.c, &f.d, &at).unwrap();
        for (l, v) in logs.iter().zip(direct) {
            assert!((l - v.abs().ln()).abs() < 1e-12);
        }
    }
}

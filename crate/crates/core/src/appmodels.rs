//! Two applications built on the switching OU machinery: a CIR process
//! realised as a sum of squared OU factors, and the deterministic SIS
//! epidemic in a Markovian environment, integrated exactly through
//! `H = 1/I`.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::chain::{simulate_path, stationary_distribution, ChainPath, RateMatrix, StationaryDist};
use crate::error::{invalid, Error, Result};
use crate::limits::{CycleCltParams, FunctionalModel, LimitKind, LimitLaw, LogTarget, Regime, RegimeClass, SigmaConvention};
use crate::ou::{exact_step, stationary_sampler, walk_path, OuModel, PerpetuityMixture, Record, StationaryMixture};
use crate::pathfunc::{g_function, ScaledValue, StateTable};

/// `dR = κ(X)(θ(X) - R) dt + ξ(X) sqrt(R) dW` with `κ = 2a`,
/// `θ = n b² / (2a)`, `ξ = 2b`, realised as `R = Σ_{i<n} U_i²` for
/// independent OU factors `dU = -a U dt + b dW` sharing one environment.
#[derive(Debug, Clone, Serialize)]
pub struct CirModel {
    pub base: OuModel,
    pub n_factors: usize,
    pub r0: f64,
}

impl CirModel {
    /// `base.y0` and `base.c` are ignored; the factors start at
    /// `(sqrt(r0), 0, ..., 0)`.
    pub fn new(base: OuModel, n_factors: usize, r0: f64) -> Result<Self> {
        if n_factors < 2 {
            return Err(invalid("the CIR construction needs at least two factors"));
        }
        if base.a.values().contains(&0.0) {
            return Err(invalid("theta = n b^2 / (2a) is undefined where a = 0"));
        }
        if !(r0 >= 0.0) || !r0.is_finite() {
            return Err(invalid("r0 must be finite and >= 0"));
        }
        if !base.c.is_zero() {
            return Err(invalid("CIR factors have no drift offset"));
        }
        Ok(Self { base, n_factors, r0 })
    }

    pub fn kappa(&self) -> StateTable {
        self.base.a.map(|a| 2.0 * a)
    }

    pub fn theta(&self) -> StateTable {
        let n = self.n_factors as f64;
        StateTable::new(
            self.base
                .a
                .values()
                .iter()
                .zip(self.base.b.values())
                .map(|(a, b)| n * b * b / (2.0 * a))
                .collect(),
        )
        .expect("finite for a != 0")
    }

    pub fn xi(&self) -> StateTable {
        self.base.b.map(|b| 2.0 * b)
    }

    fn initial_factors(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.n_factors];
        u[0] = self.r0.sqrt();
        u
    }
}

/// `R` at the record times along a given environment path.
pub fn cir_simulate_on_path(model: &CirModel, path: &ChainPath, record_at: &[f64], rng: &mut dyn RngCore) -> Result<Vec<Record>> {
    let mut u = model.initial_factors();
    let mut out = Vec::with_capacity(record_at.len());
    walk_path(path, record_at, |state, dt, rec| {
        for ui in u.iter_mut() {
            *ui = exact_step(*ui, state, dt, &model.base, rng);
        }
        if let Some(time) = rec {
            let value: f64 = u.iter().map(|v| v * v).sum();
            if !value.is_finite() {
                return Err(Error::Overflow(format!("R left the representable range at t = {time}")));
            }
            out.push(Record { time, value, state });
        }
        Ok(())
    })?;
    Ok(out)
}

/// Simulates one environment path and the factors on it.
pub fn cir_simulate(model: &CirModel, horizon: f64, record_at: &[f64], rng: &mut dyn RngCore) -> Result<Vec<Record>> {
    let x0 = model.base.initial_state(None, rng)?;
    let path = simulate_path(&model.base.q, x0, horizon, rng)?;
    cir_simulate_on_path(model, &path, record_at, rng)
}

/// Terminal `R_horizon` from a full-truncation Euler scheme on the CIR
/// equation, with steps of at most `dt` split at environment jumps.
/// Cross-check only.
pub fn cir_euler_reference(model: &CirModel, horizon: f64, dt: f64, rng: &mut dyn RngCore) -> Result<f64> {
    if !(dt > 0.0 && dt <= 1e-2) {
        return Err(invalid("Euler reference needs 0 < dt <= 1e-2"));
    }
    let (kappa, theta, xi) = (model.kappa(), model.theta(), model.xi());
    let x0 = model.base.initial_state(None, rng)?;
    let path = simulate_path(&model.base.q, x0, horizon, rng)?;
    let mut r = model.r0;
    for seg in path.segments() {
        let j = seg.state;
        let steps = (seg.duration / dt).ceil().max(1.0) as usize;
        let h = seg.duration / steps as f64;
        for _ in 0..steps {
            let rp = r.max(0.0);
            let n: f64 = StandardNormal.sample(rng);
            r += kappa[j] * (theta[j] - rp) * h + xi[j] * (rp * h).sqrt() * n;
        }
    }
    Ok(r.max(0.0))
}

/// Stationary law of `R`: `V_U · χ²_n` with `V_U` the OU mixture variance.
#[derive(Debug, Clone)]
pub struct CirStationary {
    mix: StationaryMixture,
    n_factors: usize,
}

impl CirStationary {
    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<f64> {
        let v = self.mix.draw_component(rng)?.v;
        let chi2: f64 = (0..self.n_factors)
            .map(|_| {
                let n: f64 = StandardNormal.sample(rng);
                n * n
            })
            .sum();
        Ok(v * chi2)
    }
}

/// Requires `E_pi κ > 0`.
pub fn cir_stationary_sampler(model: &CirModel, cycles_per_state: usize, rng: &mut dyn RngCore) -> Result<CirStationary> {
    Ok(CirStationary {
        mix: stationary_sampler(&model.base, cycles_per_state, rng)?,
        n_factors: model.n_factors,
    })
}

/// Which shape the CIR limit takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CirLimitForm {
    /// `2 s_U N` (or `2 s_U |N|`): all factors share the environment, so
    /// `log R` is driven by one cycle random walk.
    #[default]
    Shared,
    /// `2 s_U max_i N_i` (or `max_i |N_i|`) over the `n` factors.
    MaxOfN,
}

/// Limit of `log R_t / sqrt(t) + 2 sqrt(t) E_pi a` given the cycle
/// constants of `a`.
pub fn cir_limit_law(
    n_factors: usize,
    params: &CycleCltParams,
    pi: &StationaryDist,
    regime: Regime,
    convention: SigmaConvention,
    form: CirLimitForm,
) -> Result<LimitLaw> {
    let scales = params.scaled(2.0).scales(convention);
    let (kind, n_max) = match (regime, form) {
        (Regime::Stable, _) => {
            return Err(Error::WrongRegime {
                expected: "transient or null_recurrent",
                actual: "stable",
            })
        }
        (Regime::Transient, CirLimitForm::Shared) => (LimitKind::MixtureNormal, None),
        (Regime::NullRecurrent, CirLimitForm::Shared) => (LimitKind::MixtureHalfnormal, None),
        (Regime::Transient, CirLimitForm::MaxOfN) => (LimitKind::MixtureNormalMaxn, Some(n_factors)),
        (Regime::NullRecurrent, CirLimitForm::MaxOfN) => (LimitKind::MixtureHalfnormalMaxn, Some(n_factors)),
    };
    LimitLaw::new(kind, pi.pi.clone(), scales, n_max)
}

/// A CIR model paired with the limit form used in regime experiments.
#[derive(Debug, Clone)]
pub struct CirTarget {
    pub model: CirModel,
    pub form: CirLimitForm,
}

impl LogTarget for CirTarget {
    fn chain(&self) -> &RateMatrix {
        &self.model.base.q
    }
    fn rate(&self) -> &StateTable {
        &self.model.base.a
    }
    fn factor(&self) -> f64 {
        2.0
    }
    fn initial_state(&self) -> Option<usize> {
        self.model.base.x0
    }
    fn log_abs_on_path(&self, path: &ChainPath, record_at: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let base = &self.model.base;
        let mut u: Vec<ScaledValue> = self.model.initial_factors().into_iter().map(ScaledValue::new).collect();
        let mut out = Vec::with_capacity(record_at.len());
        walk_path(path, record_at, |state, dt, rec| {
            if dt > 0.0 {
                let (a, b) = (base.a[state], base.b[state]);
                let sd = g_function(2.0 * a, b * b, dt).max(0.0).sqrt();
                for ui in u.iter_mut() {
                    ui.scale(-a * dt);
                    let n: f64 = StandardNormal.sample(rng);
                    ui.add(sd * n);
                }
            }
            if rec.is_some() {
                // ln Σ U_i² by log-sum-exp
                let logs: Vec<f64> = u.iter().map(|v| 2.0 * v.ln_abs()).collect();
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                out.push(if max == f64::NEG_INFINITY {
                    max
                } else {
                    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
                });
            }
            Ok(())
        })?;
        Ok(out)
    }
    fn limit_law(&self, params: &CycleCltParams, pi: &StationaryDist, regime: Regime, convention: SigmaConvention) -> Result<LimitLaw> {
        cir_limit_law(self.model.n_factors, params, pi, regime, convention, self.form)
    }
}

/// `dI/dt = β(X)(n - I) I - α(X) I`.
#[derive(Debug, Clone, Serialize)]
pub struct SisModel {
    pub q: RateMatrix,
    pub alpha: StateTable,
    pub beta: StateTable,
    pub n_pop: f64,
    pub i0: f64,
    pub x0: Option<usize>,
}

impl SisModel {
    pub fn new(q: RateMatrix, alpha: StateTable, beta: StateTable, n_pop: f64, i0: f64) -> Result<Self> {
        let n = q.n_states();
        alpha.check_len(n, "alpha")?;
        beta.check_len(n, "beta")?;
        if alpha.values().iter().chain(beta.values()).any(|&v| v < 0.0) {
            return Err(invalid("alpha and beta must be >= 0"));
        }
        if !(n_pop > 0.0) || !n_pop.is_finite() {
            return Err(invalid("population size must be positive"));
        }
        if !(i0 > 0.0 && i0 <= n_pop) {
            return Err(invalid("I0 must lie in (0, n_pop]"));
        }
        Ok(Self {
            q,
            alpha,
            beta,
            n_pop,
            i0,
            x0: None,
        })
    }

    /// `γ = β n - α`.
    pub fn gamma(&self) -> StateTable {
        StateTable::new(
            self.beta
                .values()
                .iter()
                .zip(self.alpha.values())
                .map(|(b, a)| b * self.n_pop - a)
                .collect(),
        )
        .expect("finite inputs")
    }

    /// `H = 1/I` as the functional with `(c, d) = (γ, β)` started at `1/I0`.
    pub fn reciprocal(&self) -> FunctionalModel {
        FunctionalModel {
            q: self.q.clone(),
            c: self.gamma(),
            d: self.beta.clone(),
            f0: 1.0 / self.i0,
            x0: self.x0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SisRecord {
    pub time: f64,
    /// `I_t`; 0 when it underflowed.
    pub infected: f64,
    /// `ln(1/I_t)`, always finite.
    pub log_h: f64,
    pub state: usize,
    pub underflow: bool,
}

/// Exact `I_t` at the record times along a given environment path.
pub fn sis_simulate_on_path(model: &SisModel, path: &ChainPath, record_at: &[f64]) -> Result<Vec<SisRecord>> {
    let gamma = model.gamma();
    let mut h = ScaledValue::new(1.0 / model.i0);
    let mut out = Vec::with_capacity(record_at.len());
    walk_path(path, record_at, |state, dt, rec| {
        if dt > 0.0 {
            h.scale(-gamma[state] * dt);
            h.add(g_function(gamma[state], model.beta[state], dt));
        }
        if let Some(time) = rec {
            let log_h = h.ln_abs();
            let infected = (-log_h).exp();
            // I = 0 or subnormal: no longer a usable population size
            let underflow = infected < f64::MIN_POSITIVE;
            out.push(SisRecord {
                time,
                infected: if underflow { 0.0 } else { infected.min(model.n_pop) },
                log_h,
                state,
                underflow,
            });
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn sis_simulate(model: &SisModel, horizon: f64, record_at: &[f64], rng: &mut dyn RngCore) -> Result<Vec<SisRecord>> {
    let x0 = match model.x0 {
        Some(x) => x,
        None => stationary_distribution(&model.q)?.sample(rng),
    };
    let path = simulate_path(&model.q, x0, horizon, rng)?;
    sis_simulate_on_path(model, &path, record_at)
}

/// Stationary mixture of `1/I_∞`; requires `E_pi γ > 0`.
pub fn sis_stationary_mixture(model: &SisModel, cycles_per_state: usize, rng: &mut dyn RngCore) -> Result<PerpetuityMixture> {
    PerpetuityMixture::build(&model.q, &model.gamma(), &model.beta, None, cycles_per_state, rng)
}

/// What the limit probability is computed from.
#[derive(Debug, Clone, Copy)]
pub enum SisLimitInput<'a> {
    /// Stable case: Monte Carlo over `draws` mixture components.
    Mixture { mixture: &'a PerpetuityMixture, draws: usize },
    /// Null or transient case: cycle constants of `γ`.
    Cycles { params: &'a CycleCltParams, convention: SigmaConvention },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probability {
    pub value: f64,
    pub se: f64,
}

/// Long-time probability of an interval event for the SIS model.
///
/// * stable: `P[1/I_t ∈ (lo, hi)] -> Σ_j π_j P[V_j ∈ (lo, hi)]`;
/// * null: `P[ln(1/I_t)/sqrt(t) ∈ (lo, hi)] -> Σ_j π_j P[s_j |N| ∈ (lo, hi)]`, `lo >= 0`;
/// * transient: `P[ln(1/I_t)/sqrt(t) + sqrt(t) E_pi γ ∈ (lo, hi)] -> Σ_j π_j P[s_j N ∈ (lo, hi)]`,
///
/// where `s_j` is the cycle scale of `γ` anchored at `j`.
pub fn sis_limit_probability(
    model: &SisModel,
    class: &RegimeClass,
    interval: (f64, f64),
    input: SisLimitInput<'_>,
    rng: &mut dyn RngCore,
) -> Result<Probability> {
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(invalid("interval needs lo < hi"));
    }
    match (class.regime, input) {
        (Regime::Stable, SisLimitInput::Mixture { mixture, draws }) => {
            if draws < 2 {
                return Err(invalid("need at least two mixture draws"));
            }
            let mut hits = 0usize;
            for _ in 0..draws {
                let v = mixture.draw_component(rng)?.v;
                if lo < v && v < hi {
                    hits += 1;
                }
            }
            let p = hits as f64 / draws as f64;
            Ok(Probability {
                value: p,
                se: (p * (1.0 - p) / draws as f64).sqrt(),
            })
        }
        (Regime::NullRecurrent | Regime::Transient, SisLimitInput::Cycles { params, convention }) => {
            if class.regime == Regime::NullRecurrent && lo < 0.0 {
                return Err(invalid("the null-recurrent limit is stated for lo >= 0 only"));
            }
            let kind = if class.regime == Regime::NullRecurrent {
                LimitKind::MixtureHalfnormal
            } else {
                LimitKind::MixtureNormal
            };
            let pi = stationary_distribution(&model.q)?;
            let law = LimitLaw::new(kind, pi.pi, params.scales(convention), None)?;
            let value = if hi == f64::INFINITY { 1.0 } else { law.cdf(hi) } - law.cdf(lo);
            Ok(Probability { value, se: 0.0 })
        }
        (regime, _) => Err(Error::WrongRegime {
            expected: match input {
                SisLimitInput::Mixture { .. } => "stable",
                SisLimitInput::Cycles { .. } => "transient or null_recurrent",
            },
            actual: regime.name(),
        }),
    }
}

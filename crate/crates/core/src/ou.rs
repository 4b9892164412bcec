//! Ornstein-Uhlenbeck process in a Markovian environment,
//!
//! ```text
//! dY = (c(X) - a(X) Y) dt + b(X) dW,
//! ```
//!
//! with exact per-segment simulation and the stationary scale-mixture
//! sampler for the stable regime.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::chain::{exp_draw, simulate_path, stationary_distribution, ChainPath, RateMatrix, StationaryDist};
use crate::error::{invalid, Error, Result};
use crate::pathfunc::{g_function, propagate, FunctionalState, ScaledValue, StateTable};
use crate::sre::{moments_recursive, sample_bivariate_fixed_point, sample_fixed_point, CycleSource, Draw, MomentEstimate, PairSource, PoolSource};
use crate::stats::{mean_se, normal_pdf};

/// Default number of recorded cycles per anchor state in stationary pools.
pub const DEFAULT_CYCLES_PER_STATE: usize = 10_000;

/// `|E_pi a|` below this counts as zero when coefficients are floats.
pub const NULL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct OuModel {
    pub q: RateMatrix,
    pub a: StateTable,
    pub b: StateTable,
    /// Drift offset; all zero for the centred model.
    pub c: StateTable,
    pub y0: f64,
    /// Initial environment state; `None` draws it from `pi`.
    pub x0: Option<usize>,
}

impl OuModel {
    pub fn new(q: RateMatrix, a: StateTable, b: StateTable, c: Option<StateTable>, y0: f64) -> Result<Self> {
        let n = q.n_states();
        a.check_len(n, "a")?;
        b.check_len(n, "b")?;
        let c = c.unwrap_or_else(|| StateTable::zeros(n));
        c.check_len(n, "c")?;
        if !y0.is_finite() {
            return Err(invalid("y0 must be finite"));
        }
        Ok(Self { q, a, b, c, y0, x0: None })
    }

    pub fn with_initial_state(mut self, x0: usize) -> Result<Self> {
        if x0 >= self.q.n_states() {
            return Err(invalid(format!("initial state {x0} out of range")));
        }
        self.x0 = Some(x0);
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.q.n_states()
    }

    /// `2a`, the decay rate of the conditional variance.
    pub(crate) fn two_a(&self) -> StateTable {
        self.a.map(|v| 2.0 * v)
    }

    pub(crate) fn b_squared(&self) -> StateTable {
        self.b.map(|v| v * v)
    }

    pub(crate) fn initial_state(&self, pi: Option<&StationaryDist>, rng: &mut dyn RngCore) -> Result<usize> {
        match (self.x0, pi) {
            (Some(x), _) => Ok(x),
            (None, Some(pi)) => Ok(pi.sample(rng)),
            (None, None) => Ok(stationary_distribution(&self.q)?.sample(rng)),
        }
    }
}

/// Conditional mean and variance of `Y_{t+dt}` given `Y_t = y` while the
/// environment stays in `state`.
pub fn transition_moments(y: f64, state: usize, dt: f64, model: &OuModel) -> (f64, f64) {
    let (a, b, c) = (model.a[state], model.b[state], model.c[state]);
    let mean = y * (-a * dt).exp() + g_function(a, c, dt);
    let var = g_function(2.0 * a, b * b, dt);
    (mean, var)
}

/// Exact draw of `Y_{t+dt}` given `Y_t = y` on a constant-state segment.
pub fn exact_step(y: f64, state: usize, dt: f64, model: &OuModel, rng: &mut dyn RngCore) -> f64 {
    if dt == 0.0 {
        return y;
    }
    let (mean, var) = transition_moments(y, state, dt, model);
    let n: f64 = StandardNormal.sample(rng);
    mean + var.max(0.0).sqrt() * n
}

/// Mean and variance of `Y_T` given the whole environment path and `Y_0`.
pub fn conditional_moments(model: &OuModel, path: &ChainPath, y0: f64) -> Result<(f64, f64)> {
    let (two_a, b2) = (model.two_a(), model.b_squared());
    let mut mean = FunctionalState::default();
    let mut var = FunctionalState::default();
    for s in path.segments() {
        mean = propagate(mean, s.state, s.duration, &model.a, &model.c)?;
        var = propagate(var, s.state, s.duration, &two_a, &b2)?;
    }
    Ok((y0 * mean.log_phi.exp() + mean.f, var.f))
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Record {
    pub time: f64,
    pub value: f64,
    pub state: usize,
}

fn check_record_times(record_at: &[f64], horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    if record_at.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(invalid("record times must be sorted"));
    }
    if record_at.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(invalid("record times must lie in [0, horizon]"));
    }
    Ok(())
}

/// Walks a chain path, calling `step(state, dt, record)` for each piece
/// between consecutive stopping points (segment ends and record times);
/// `record` carries the record time when the piece ends at one.
pub(crate) fn walk_path<F>(path: &ChainPath, record_at: &[f64], mut step: F) -> Result<()>
where
    F: FnMut(usize, f64, Option<f64>) -> Result<()>,
{
    let mut pending = record_at.iter().copied().peekable();
    let mut now = 0.0;
    let mut seg_end = 0.0;
    let mut segments = path.segments().peekable();
    while let Some(seg) = segments.next() {
        seg_end += seg.duration;
        let last = segments.peek().is_none();
        while let Some(&t) = pending.peek() {
            if t >= seg_end && !last {
                break;
            }
            step(seg.state, t - now, Some(t))?;
            now = t;
            pending.next();
        }
        if !last {
            step(seg.state, seg_end - now, None)?;
            now = seg_end;
        }
    }
    Ok(())
}

/// Simulates the environment and then `Y` exactly at the record times.
pub fn simulate(model: &OuModel, horizon: f64, record_at: &[f64], rng: &mut dyn RngCore) -> Result<Vec<Record>> {
    check_record_times(record_at, horizon)?;
    let x0 = model.initial_state(None, rng)?;
    let path = simulate_path(&model.q, x0, horizon, rng)?;
    simulate_on_path(model, &path, record_at, rng)
}

/// `Y` at the record times along a given environment path.
pub fn simulate_on_path(model: &OuModel, path: &ChainPath, record_at: &[f64], rng: &mut dyn RngCore) -> Result<Vec<Record>> {
    check_record_times(record_at, path.horizon)?;
    let mut y = model.y0;
    let mut out = Vec::with_capacity(record_at.len());
    walk_path(
        path,
        record_at,
        |state, dt, rec| {
            y = exact_step(y, state, dt, model, rng);
            if !y.is_finite() {
                return Err(Error::Overflow(format!("Y left the representable range in state {state}")));
            }
            if let Some(time) = rec {
                out.push(Record { time, value: y, state });
            }
            Ok(())
        },
    )?;
    Ok(out)
}

/// `ln |Y_t|` at the record times, carried in scaled form so that
/// exponentially growing or decaying paths stay representable.
pub fn simulate_log_abs(model: &OuModel, path: &ChainPath, record_at: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    check_record_times(record_at, path.horizon)?;
    let mut y = ScaledValue::new(model.y0);
    let mut out = Vec::with_capacity(record_at.len());
    walk_path(
        path,
        record_at,
        |state, dt, rec| {
            if dt > 0.0 {
                let (a, b, c) = (model.a[state], model.b[state], model.c[state]);
                y.scale(-a * dt);
                y.add(g_function(a, c, dt));
                let n: f64 = StandardNormal.sample(rng);
                y.add(g_function(2.0 * a, b * b, dt).max(0.0).sqrt() * n);
            }
            if rec.is_some() {
                out.push(y.ln_abs());
            }
            Ok(())
        },
    )?;
    Ok(out)
}

/// Stationary law of `F_t = ∫ d(X_s) e^{-∫_s^t c} ds` (optionally jointly
/// with `∫ d2(X_s) e^{-(1/2)∫_s^t c} ds`) as a mixture over the current
/// environment state.
///
/// Per state `j` a component is
/// `V_j = G(c, d, T) + e^{-c(j) T} V*_j` with `T ~ Exp(-λ_jj)` and `V*_j`
/// the perpetuity built from renewal cycles anchored at `j`. Cycles are
/// recorded once into a pool and resampled.
#[derive(Debug, Clone)]
pub struct PerpetuityMixture {
    pi: StationaryDist,
    exit: Vec<f64>,
    c: StateTable,
    d: StateTable,
    d2: Option<StateTable>,
    pools: Vec<PoolSource>,
    mean_log_a: Vec<f64>,
}

/// One component draw: the environment state and the (mean, variance)
/// style pair `(m, v)`; `m` is zero without a second row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Component {
    pub state: usize,
    pub m: f64,
    pub v: f64,
}

impl PerpetuityMixture {
    /// Requires `E_pi c > 0`.
    pub fn build(
        q: &RateMatrix,
        c: &StateTable,
        d: &StateTable,
        d2: Option<&StateTable>,
        cycles_per_state: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let n = q.n_states();
        c.check_len(n, "c")?;
        d.check_len(n, "d")?;
        if let Some(t) = d2 {
            t.check_len(n, "d2")?;
        }
        if cycles_per_state == 0 {
            return Err(invalid("cycles per state must be at least 1"));
        }
        let pi = stationary_distribution(q)?;
        let e_pi_c = pi.expect(c.values());
        if !(e_pi_c > NULL_TOLERANCE) {
            return Err(Error::NotStable { e_pi_a: e_pi_c });
        }
        let mut pools = Vec::new();
        let mut mean_log_a = Vec::new();
        if n > 1 {
            for j in 0..n {
                let src = CycleSource::new(q.clone(), j, c.clone(), d.clone(), d2.cloned())?;
                let pool = PoolSource::record(&src, cycles_per_state, rng)?;
                if pool.draws().iter().any(|dr| !dr.b.is_finite() || !dr.c.is_finite()) {
                    return Err(Error::Overflow(format!("cycle functional overflowed at anchor {j}")));
                }
                let logs: Vec<f64> = pool.draws().iter().map(|dr| dr.log_abs_a).collect();
                mean_log_a.push(mean_se(&logs).0);
                pools.push(pool);
            }
        } else {
            mean_log_a.push(f64::NEG_INFINITY);
        }
        Ok(Self {
            exit: (0..n).map(|j| q.exit_rate(j)).collect(),
            pi,
            c: c.clone(),
            d: d.clone(),
            d2: d2.cloned(),
            pools,
            mean_log_a,
        })
    }

    pub fn pi(&self) -> &StationaryDist {
        &self.pi
    }

    pub fn has_second_row(&self) -> bool {
        self.d2.is_some()
    }

    /// Pool mean of `log A` per anchor.
    pub fn mean_log_a(&self) -> &[f64] {
        &self.mean_log_a
    }

    pub fn pools(&self) -> &[PoolSource] {
        &self.pools
    }

    /// Draws a component for a given state.
    pub fn draw_in_state(&self, j: usize, rng: &mut dyn RngCore) -> Result<Component> {
        let (cj, dj) = (self.c[j], self.d[j]);
        let d2j = self.d2.as_ref().map_or(0.0, |t| t[j]);
        if self.pools.is_empty() {
            // One state: the functional converges to its constant limit.
            return Ok(Component {
                state: j,
                m: 2.0 * d2j / cj,
                v: dj / cj,
            });
        }
        let pool = &self.pools[j];
        let (m_star, v_star) = if self.d2.is_some() {
            sample_bivariate_fixed_point(pool, rng)?
        } else {
            (0.0, sample_fixed_point(pool, rng)?)
        };
        let t = exp_draw(self.exit[j], rng);
        let v = g_function(cj, dj, t) + (-cj * t).exp() * v_star;
        let m = if self.d2.is_some() {
            g_function(0.5 * cj, d2j, t) + (-0.5 * cj * t).exp() * m_star
        } else {
            0.0
        };
        if !v.is_finite() || !m.is_finite() {
            return Err(Error::Overflow("stationary component is not finite".into()));
        }
        Ok(Component { state: j, m, v })
    }

    /// Draws `U ~ pi` and then the component for `U`.
    pub fn draw_component(&self, rng: &mut dyn RngCore) -> Result<Component> {
        let j = self.pi.sample(rng);
        self.draw_in_state(j, rng)
    }
}

/// Stationary law of `Y`: `M_U + sqrt(V_U) N`.
#[derive(Debug, Clone)]
pub struct StationaryMixture {
    inner: PerpetuityMixture,
}

impl StationaryMixture {
    pub fn pi(&self) -> &StationaryDist {
        self.inner.pi()
    }

    pub fn components(&self) -> &PerpetuityMixture {
        &self.inner
    }

    pub fn draw_component(&self, rng: &mut dyn RngCore) -> Result<Component> {
        self.inner.draw_component(rng)
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<f64> {
        let comp = self.inner.draw_component(rng)?;
        let n: f64 = StandardNormal.sample(rng);
        Ok(comp.m + comp.v.max(0.0).sqrt() * n)
    }
}

/// Builds the stationary sampler; requires `E_pi a > 0`.
pub fn stationary_sampler(model: &OuModel, cycles_per_state: usize, rng: &mut dyn RngCore) -> Result<StationaryMixture> {
    let pi = stationary_distribution(&model.q)?;
    let e_pi_a = pi.expect(model.a.values());
    if !(e_pi_a > NULL_TOLERANCE) {
        return Err(Error::NotStable { e_pi_a });
    }
    let d2 = (!model.c.is_zero()).then_some(&model.c);
    let inner = PerpetuityMixture::build(&model.q, &model.two_a(), &model.b_squared(), d2, cycles_per_state, rng)?;
    Ok(StationaryMixture { inner })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn double_factorial_odd(m: u32) -> f64 {
    // (m - 1)!! for even m
    (1..m).step_by(2).map(f64::from).product()
}

/// `E[e^{-k c T}]` for `T ~ Exp(lambda)`, or `None` when infinite.
fn exp_moment(lambda: f64, kc: f64) -> Option<f64> {
    (lambda + kc > 0.0).then(|| lambda / (lambda + kc))
}

/// `E[A'^i B'^r]` for `A' = e^{-c T}`, `B' = G(c, d, T)`, `T ~ Exp(lambda)`.
fn composed_cross_moment(lambda: f64, c: f64, d: f64, i: u32, r: u32) -> Option<f64> {
    if c == 0.0 {
        // B' = d T, A' = 1
        let fact: f64 = (1..=r).map(f64::from).product();
        return Some(d.powi(r as i32) * fact / lambda.powi(r as i32));
    }
    // (d/c)^r e^{-icT} (1 - e^{-cT})^r expanded binomially
    let mut total = 0.0;
    for l in 0..=r {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * binomial(r, l) * exp_moment(lambda, f64::from(i + l) * c)?;
    }
    Some((d / c).powi(r as i32) * total)
}

/// `E Y^m` of the stationary law.
///
/// Odd orders vanish by symmetry when `c ≡ 0`; even orders combine the
/// Gaussian moment `(m-1)!!` with `E V_j^{m/2}`, where `E V*_j^k` comes
/// from the moment recursion over `n` fresh cycles per state and the
/// exponential holding time enters in closed form.
pub fn stationary_moment(model: &OuModel, m: u32, n: usize, rng: &mut dyn RngCore) -> Result<MomentEstimate> {
    if m == 0 {
        return Ok(MomentEstimate { value: 1.0, se: 0.0 });
    }
    if !model.c.is_zero() {
        return Err(invalid("stationary moments are implemented for c ≡ 0 only"));
    }
    if m % 2 == 1 {
        return Ok(MomentEstimate { value: 0.0, se: 0.0 });
    }
    let pi = stationary_distribution(&model.q)?;
    let e_pi_a = pi.expect(model.a.values());
    if !(e_pi_a > NULL_TOLERANCE) {
        return Err(Error::NotStable { e_pi_a });
    }
    let k = m / 2;
    let gauss = double_factorial_odd(m);
    let (two_a, b2) = (model.two_a(), model.b_squared());
    let n_states = model.n_states();
    let mut value = 0.0;
    let mut var = 0.0;
    for j in 0..n_states {
        if pi.pi[j] == 0.0 {
            continue;
        }
        let (cj, dj) = (two_a[j], b2[j]);
        // E V*^i, i = 0..k
        let star: Vec<MomentEstimate> = if n_states == 1 {
            // no cycles: V = d/c exactly
            let v = dj / cj;
            (0..=k).map(|i| MomentEstimate { value: v.powi(i as i32), se: 0.0 }).collect()
        } else {
            let src = CycleSource::new(model.q.clone(), j, two_a.clone(), b2.clone(), None)?;
            let draws: Vec<Draw> = (0..n).map(|_| src.draw(rng)).collect();
            moments_recursive(&draws, k)?
        };
        let (ev, ev_var) = if n_states == 1 {
            (star[k as usize].value, 0.0)
        } else {
            let lambda = model.q.exit_rate(j);
            let mut ev = 0.0;
            let mut ev_var = 0.0;
            for (i, s) in star.iter().enumerate() {
                let i = i as u32;
                let cross = composed_cross_moment(lambda, cj, dj, i, k - i).ok_or(Error::MomentDiverges {
                    order: m,
                    ea_m: f64::INFINITY,
                    se: 0.0,
                })?;
                let coef = binomial(k, i) * cross;
                ev += coef * s.value;
                ev_var += (coef * s.se).powi(2);
            }
            (ev, ev_var)
        };
        value += pi.pi[j] * gauss * ev;
        var += (pi.pi[j] * gauss).powi(2) * ev_var;
    }
    if !value.is_finite() {
        return Err(Error::Overflow("stationary moment is not finite".into()));
    }
    Ok(MomentEstimate { value, se: var.sqrt() })
}

/// Monte Carlo Mills-ratio bounds on `P[Y > t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBounds {
    pub lower: f64,
    pub lower_se: f64,
    pub upper: f64,
    pub upper_se: f64,
}

/// Averages the Gaussian Mills-ratio bounds
/// `x φ(x) / (1 + x²) <= P[N > x] <= φ(x) / x` at `x = t / sqrt(V)` over
/// `n` mixture components. A component with `V = 0` contributes 0 to both.
pub fn tail_bounds(mix: &StationaryMixture, t: f64, n: usize, rng: &mut dyn RngCore) -> Result<TailBounds> {
    if !(t > 0.0) {
        return Err(invalid("tail bounds need t > 0"));
    }
    if mix.inner.has_second_row() {
        return Err(invalid("tail bounds assume a centred mixture (c ≡ 0)"));
    }
    if n < 2 {
        return Err(invalid("tail bounds need at least two draws"));
    }
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for _ in 0..n {
        let v = mix.draw_component(rng)?.v;
        if v <= 0.0 {
            lo.push(0.0);
            hi.push(0.0);
            continue;
        }
        let x = t / v.sqrt();
        let phi = normal_pdf(x);
        lo.push(x * phi / (1.0 + x * x));
        hi.push(phi / x);
    }
    let (lower, lower_se) = mean_se(&lo);
    let (upper, upper_se) = mean_se(&hi);
    Ok(TailBounds {
        lower,
        lower_se,
        upper,
        upper_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Segment;
    use crate::rng::{seeded, stream};
    use crate::stats::{ks_one_sample, ks_two_sample, normal_cdf, normal_sf, SampleSet};

    fn constant_env(a: f64, b: f64) -> OuModel {
        OuModel::new(
            RateMatrix::single(),
            StateTable::new(vec![a]).unwrap(),
            StateTable::new(vec![b]).unwrap(),
            None,
            0.0,
        )
        .unwrap()
    }

    fn benchmark(a: [f64; 2], b: [f64; 2]) -> OuModel {
        OuModel::new(
            RateMatrix::two_state(1.0, 2.0).unwrap(),
            StateTable::new(a.to_vec()).unwrap(),
            StateTable::new(b.to_vec()).unwrap(),
            None,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn exact_step_examples() {
        let mut rng = seeded(1);
        let m = constant_env(1.0, 2f64.sqrt());
        assert_eq!(exact_step(3.0, 0, 0.0, &m, &mut rng), 3.0);
        let bm = constant_env(0.0, 3.0);
        assert_eq!(transition_moments(1.5, 0, 2.0, &bm), (1.5, 18.0));

        let draws: Vec<f64> = (0..100_000).map(|_| exact_step(0.0, 0, 20.0, &m, &mut rng)).collect();
        let sd = (1.0 - (-40f64).exp()).sqrt();
        let d = ks_one_sample(&SampleSet::new(draws).unwrap(), |x| normal_cdf(x / sd)).unwrap();
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn conditional_moments_on_two_segments() {
        // a = (1, 3), b = (2, 1), c = (0.5, -1); path 0.7 in state 0 then 1.3 in state 1
        let m = OuModel::new(
            RateMatrix::two_state(1.0, 1.0).unwrap(),
            StateTable::new(vec![1.0, 3.0]).unwrap(),
            StateTable::new(vec![2.0, 1.0]).unwrap(),
            Some(StateTable::new(vec![0.5, -1.0]).unwrap()),
            0.25,
        )
        .unwrap();
        let path = ChainPath::from_segments(&[
            Segment { state: 0, duration: 0.7 },
            Segment { state: 1, duration: 1.3 },
        ])
        .unwrap();
        let (mean, var) = conditional_moments(&m, &path, 0.25).unwrap();
        // hand composition of the two one-segment Gaussian transitions
        let m1 = 0.25 * (-0.7f64).exp() + 0.5 * (1.0 - (-0.7f64).exp());
        let v1 = 4.0 * (1.0 - (-1.4f64).exp()) / 2.0;
        let m2 = m1 * (-3.9f64).exp() + (-1.0 / 3.0) * (1.0 - (-3.9f64).exp());
        let v2 = v1 * (-7.8f64).exp() + (1.0 - (-7.8f64).exp()) / 6.0;
        assert!((mean - m2).abs() < 1e-12);
        assert!((var - v2).abs() < 1e-12);
    }

    #[test]
    fn deterministic_when_b_is_zero() {
        let mut m = benchmark([0.7, -0.3], [0.0, 0.0]);
        m.y0 = 2.0;
        let mut rng = seeded(2);
        let path = simulate_path(&m.q, 0, 10.0, &mut rng).unwrap();
        let rec = simulate_on_path(&m, &path, &[10.0], &mut rng).unwrap();
        let flow = crate::pathfunc::evaluate_f(&path, &m.a, &StateTable::zeros(2)).unwrap();
        assert_eq!(flow, 0.0);
        let log_flow: f64 = path.segments().map(|s| -m.a[s.state] * s.duration).sum();
        assert!((rec[0].value - 2.0 * log_flow.exp()).abs() < 1e-12 * rec[0].value.abs().max(1.0));
        let logs = simulate_log_abs(&m, &path, &[10.0], &mut rng).unwrap();
        assert!((logs[0] - (2f64.ln() + log_flow)).abs() < 1e-12);
    }

    #[test]
    fn simulate_matches_classical_ou() {
        let m = constant_env(1.0, 2f64.sqrt());
        let draws: Vec<f64> = (0..100_000u64)
            .map(|k| simulate(&m, 20.0, &[20.0], &mut stream(3, "rep", k)).unwrap()[0].value)
            .collect();
        let sd = (1.0 - (-40f64).exp()).sqrt();
        let d = ks_one_sample(&SampleSet::new(draws).unwrap(), |x| normal_cdf(x / sd)).unwrap();
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn simulate_is_deterministic_and_records_in_order() {
        let m = benchmark([2.0, -1.0], [1.0, 2.0]);
        let at = [0.0, 0.5, 0.5, 3.0, 7.25];
        let r1 = simulate(&m, 7.25, &at, &mut seeded(4)).unwrap();
        let r2 = simulate(&m, 7.25, &at, &mut seeded(4)).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.iter().map(|r| r.time).collect::<Vec<_>>(), at);
        assert_eq!(r1[0].value, 0.0);
        assert_eq!(r1[1].value, r1[2].value);
        assert!(simulate(&m, 1.0, &[2.0], &mut seeded(4)).is_err());
    }

    #[test]
    fn markov_consistency() {
        let m = benchmark([2.0, -1.0], [1.0, 2.0]).with_initial_state(0).unwrap();
        let direct: Vec<f64> = (0..10_000u64)
            .map(|k| simulate(&m, 2.0, &[2.0], &mut stream(5, "direct", k)).unwrap()[0].value)
            .collect();
        let restarted: Vec<f64> = (0..10_000u64)
            .map(|k| {
                let rng = &mut stream(5, "restart", k);
                let first = simulate(&m, 1.0, &[1.0], rng).unwrap()[0];
                let mut next = m.clone();
                next.y0 = first.value;
                next.x0 = Some(first.state);
                simulate(&next, 1.0, &[1.0], rng).unwrap()[0].value
            })
            .collect();
        let (d, _) = ks_two_sample(&SampleSet::new(direct).unwrap(), &SampleSet::new(restarted).unwrap()).unwrap();
        assert!(d < 0.02, "{d}");
    }

    #[test]
    fn stationary_sampler_constant_environment() {
        let m = constant_env(1.0, 2f64.sqrt());
        let mix = stationary_sampler(&m, 10, &mut seeded(6)).unwrap();
        let mut rng = seeded(7);
        let draws: Vec<f64> = (0..100_000).map(|_| mix.sample(&mut rng).unwrap()).collect();
        let d = ks_one_sample(&SampleSet::new(draws).unwrap(), normal_cdf).unwrap();
        assert!(d < 0.01, "{d}");

        let shifted = OuModel::new(
            RateMatrix::single(),
            StateTable::new(vec![2.0]).unwrap(),
            StateTable::new(vec![2.0]).unwrap(),
            Some(StateTable::new(vec![3.0]).unwrap()),
            0.0,
        )
        .unwrap();
        let comp = stationary_sampler(&shifted, 10, &mut rng).unwrap().draw_component(&mut rng).unwrap();
        assert_eq!((comp.m, comp.v), (1.5, 1.0));
    }

    #[test]
    fn stationary_sampler_degenerate_and_unstable() {
        let m = benchmark([2.0, -1.0], [0.0, 0.0]);
        let mix = stationary_sampler(&m, 100, &mut seeded(8)).unwrap();
        let mut rng = seeded(9);
        assert!((0..100).all(|_| mix.sample(&mut rng).unwrap() == 0.0));
        let unstable = benchmark([1.0, -2.0], [1.0, 1.0]);
        assert!(matches!(stationary_sampler(&unstable, 100, &mut rng), Err(Error::NotStable { .. })));
    }

    #[test]
    fn stationary_sampler_matches_long_simulation_with_offset() {
        let m = OuModel::new(
            RateMatrix::two_state(1.0, 2.0).unwrap(),
            StateTable::new(vec![2.0, 0.5]).unwrap(),
            StateTable::new(vec![1.0, 0.5]).unwrap(),
            Some(StateTable::new(vec![1.0, -2.0]).unwrap()),
            0.0,
        )
        .unwrap();
        let mix = stationary_sampler(&m, 10_000, &mut seeded(10)).unwrap();
        let mut rng = seeded(11);
        let draws: Vec<f64> = (0..10_000).map(|_| mix.sample(&mut rng).unwrap()).collect();
        let sims: Vec<f64> = (0..10_000u64)
            .map(|k| simulate(&m, 30.0, &[30.0], &mut stream(12, "rep", k)).unwrap()[0].value)
            .collect();
        let (d, _) = ks_two_sample(&SampleSet::new(draws).unwrap(), &SampleSet::new(sims).unwrap()).unwrap();
        assert!(d < 0.025, "{d}");
    }

    #[test]
    fn stationary_draws_are_symmetric() {
        let m = benchmark([2.0, -1.0], [1.0, 2.0]);
        let mix = stationary_sampler(&m, 10_000, &mut seeded(13)).unwrap();
        let mut rng = seeded(14);
        let x: Vec<f64> = (0..10_000).map(|_| mix.sample(&mut rng).unwrap()).collect();
        let y: Vec<f64> = (0..10_000).map(|_| -mix.sample(&mut rng).unwrap()).collect();
        let (d, _) = ks_two_sample(&SampleSet::new(x).unwrap(), &SampleSet::new(y).unwrap()).unwrap();
        assert!(d < 0.02, "{d}");
    }

    #[test]
    fn moment_examples() {
        let mut rng = seeded(15);
        let m = constant_env(1.0, 2f64.sqrt());
        assert!((stationary_moment(&m, 2, 10, &mut rng).unwrap().value - 1.0).abs() < 1e-15);
        assert!((stationary_moment(&m, 4, 10, &mut rng).unwrap().value - 3.0).abs() < 1e-14);
        assert_eq!(stationary_moment(&m, 3, 10, &mut rng).unwrap().value, 0.0);
        let zero = benchmark([2.0, 1.0], [0.0, 0.0]);
        assert_eq!(stationary_moment(&zero, 2, 1000, &mut rng).unwrap().value, 0.0);
    }

    #[test]
    fn moment_matches_sampler_variance() {
        // light-tailed two-state model: both a > 0
        let m = benchmark([2.0, 0.5], [1.0, 2.0]);
        let est = stationary_moment(&m, 2, 100_000, &mut seeded(16)).unwrap();
        let mix = stationary_sampler(&m, 10_000, &mut seeded(17)).unwrap();
        let mut rng = seeded(18);
        let sq: Vec<f64> = (0..100_000).map(|_| mix.sample(&mut rng).unwrap().powi(2)).collect();
        let (v, se) = mean_se(&sq);
        assert!((est.value - v).abs() < 3.0 * (se * se + est.se * est.se).sqrt(), "{est:?} vs {v} ± {se}");
    }

    #[test]
    fn heavy_tailed_benchmark_has_no_second_moment() {
        // E e^{2T} with T ~ Exp(2) is infinite in state 1
        let m = benchmark([2.0, -1.0], [1.0, 2.0]);
        assert!(matches!(
            stationary_moment(&m, 2, 10_000, &mut seeded(19)),
            Err(Error::MomentDiverges { .. })
        ));
    }

    #[test]
    fn composed_moments_closed_form() {
        // E G(c, d, T) = d / (lambda + c)
        assert!((composed_cross_moment(2.0, 3.0, 5.0, 0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(composed_cross_moment(2.0, 0.0, 5.0, 0, 2).unwrap(), 12.5);
        assert!(composed_cross_moment(2.0, -1.0, 1.0, 2, 0).is_none());
    }

    #[test]
    fn tail_bounds_bracket() {
        let mut rng = seeded(20);
        let m = constant_env(1.0, 2f64.sqrt());
        let mix = stationary_sampler(&m, 10, &mut rng).unwrap();
        let tb = tail_bounds(&mix, 2.0, 100, &mut rng).unwrap();
        assert!(tb.lower <= normal_sf(2.0) && normal_sf(2.0) <= tb.upper, "{tb:?}");
        let far = tail_bounds(&mix, 40.0, 100, &mut rng).unwrap();
        assert!(far.upper < 1e-300);

        let bm = benchmark([2.0, -1.0], [1.0, 2.0]);
        let mix = stationary_sampler(&bm, 10_000, &mut seeded(21)).unwrap();
        for t in [1.0, 2.5] {
            let tb = tail_bounds(&mix, t, 100_000, &mut rng).unwrap();
            let hits: Vec<f64> = (0..100_000)
                .map(|_| f64::from(u8::from(mix.sample(&mut rng).unwrap() > t)))
                .collect();
            let (p, se) = mean_se(&hits);
            assert!(tb.lower - 3.0 * (se + tb.lower_se) <= p, "{t}: {tb:?} {p}");
            assert!(p <= tb.upper + 3.0 * (se + tb.upper_se), "{t}: {tb:?} {p}");
        }
    }
}

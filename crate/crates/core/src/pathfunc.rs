//! Closed-form path functionals of a piecewise-constant environment.
//!
//! Everything here reduces to the one-segment exponential integral
//!
//! ```text
//! G(c, d, x) = ∫_0^x d e^{-c (x - s)} ds
//! ```
//!
//! and the recursion `F <- e^{-c Δ} F + G(c, d, Δ)` across segments.
//! Flows `e^{-∫c}` are carried as logarithms; they only get exponentiated
//! one segment at a time.

use serde::Serialize;

use crate::chain::{ChainPath, Segment};
use crate::error::{invalid, Error, Result};

/// One real coefficient per environment state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateTable(Vec<f64>);

impl StateTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite table entry {v}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, v: f64) -> Self {
        Self(vec![v; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Entry-wise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn check_len(&self, n: usize, name: &str) -> Result<()> {
        if self.len() != n {
            return Err(invalid(format!(
                "table {name} has {} entries, chain has {n} states",
                self.len()
            )));
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for StateTable {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

const SERIES_THRESHOLD: f64 = 1e-8;

/// `∫_0^x d e^{-c (x - s)} ds`, continuous in `c` across zero.
pub fn g_function(c: f64, d: f64, x: f64) -> f64 {
    let cx = c * x;
    if cx.abs() < SERIES_THRESHOLD {
        d * x * (1.0 - 0.5 * cx + cx * cx / 6.0)
    } else {
        -d / c * (-cx).exp_m1()
    }
}

/// Running value of `F_t = ∫_0^t d(X_s) e^{-∫_s^t c} ds` together with
/// `log Φ = -∫_0^t c`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FunctionalState {
    pub f: f64,
    pub log_phi: f64,
}

impl FunctionalState {
    /// Advances the state through `dt` time units spent in `state`.
    pub fn propagate(
        self,
        state: usize,
        dt: f64,
        c: &StateTable,
        d: &StateTable,
    ) -> Result<Self> {
        propagate(self, state, dt, c, d)
    }
}

pub fn propagate(
    fs: FunctionalState,
    state: usize,
    dt: f64,
    c: &StateTable,
    d: &StateTable,
) -> Result<FunctionalState> {
    if !(dt >= 0.0) {
        return Err(invalid(format!("negative time step {dt}")));
    }
    if dt == 0.0 {
        return Ok(fs);
    }
    let (cj, dj) = (c[state], d[state]);
    let f = (-cj * dt).exp() * fs.f + g_function(cj, dj, dt);
    let log_phi = fs.log_phi - cj * dt;
    if !f.is_finite() || !log_phi.is_finite() {
        return Err(Error::Overflow(format!(
            "functional left the representable range in state {state} (c = {cj}, dt = {dt})"
        )));
    }
    Ok(FunctionalState { f, log_phi })
}

/// `F_horizon` along a whole path.
pub fn evaluate_f(path: &ChainPath, c: &StateTable, d: &StateTable) -> Result<f64> {
    path.segments()
        .try_fold(FunctionalState::default(), |fs, s| {
            propagate(fs, s.state, s.duration, c, d)
        })
        .map(|fs| fs.f)
}

/// `F_t` at each of the (sorted) times in `at`, each within `[0, horizon]`.
pub fn evaluate_f_at(
    path: &ChainPath,
    c: &StateTable,
    d: &StateTable,
    at: &[f64],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(at.len());
    let mut fs = FunctionalState::default();
    let mut now = 0.0;
    let mut pending = at.iter().copied().peekable();
    let mut seg_start = 0.0;
    for seg in path.segments() {
        let seg_end = seg_start + seg.duration;
        while let Some(&t) = pending.peek() {
            if t > seg_end && seg_end < path.horizon {
                break;
            }
            if t < now || t > path.horizon {
                return Err(invalid("record times must be sorted and within the horizon"));
            }
            fs = propagate(fs, seg.state, t - now, c, d)?;
            now = t;
            out.push(fs.f);
            pending.next();
        }
        fs = propagate(fs, seg.state, seg_end - now, c, d)?;
        now = seg_end;
        seg_start = seg_end;
    }
    Ok(out)
}

/// Per-cycle coefficients of the perpetuity built from one renewal cycle:
/// `log_a = -∫ c`, `b = ∫ d e^{-∫_s^end c} ds` and, optionally,
/// `c = ∫ d2 e^{-(1/2)∫_s^end c} ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleFunctional {
    pub log_a: f64,
    pub b: f64,
    pub c: Option<f64>,
}

/// Streaming version of [`cycle_functional`].
#[derive(Debug, Clone)]
pub struct CycleAccumulator<'a> {
    c: &'a StateTable,
    d: &'a StateTable,
    d2: Option<(&'a StateTable, StateTable)>,
    main: FunctionalState,
    half: FunctionalState,
}

impl<'a> CycleAccumulator<'a> {
    pub fn new(c: &'a StateTable, d: &'a StateTable, d2: Option<&'a StateTable>) -> Self {
        Self {
            c,
            d,
            d2: d2.map(|t| (t, c.map(|v| 0.5 * v))),
            main: FunctionalState::default(),
            half: FunctionalState::default(),
        }
    }

    pub fn push(&mut self, seg: Segment) -> Result<()> {
        self.main = propagate(self.main, seg.state, seg.duration, self.c, self.d)?;
        if let Some((d2, c_half)) = &self.d2 {
            self.half = propagate(self.half, seg.state, seg.duration, c_half, d2)?;
        }
        Ok(())
    }

    pub fn finish(self) -> CycleFunctional {
        CycleFunctional {
            log_a: self.main.log_phi,
            b: self.main.f,
            c: self.d2.map(|_| self.half.f),
        }
    }
}

pub fn cycle_functional(
    cycle: &[Segment],
    c: &StateTable,
    d: &StateTable,
    d2: Option<&StateTable>,
) -> Result<CycleFunctional> {
    if cycle.is_empty() {
        return Err(invalid("empty cycle"));
    }
    let mut acc = CycleAccumulator::new(c, d, d2);
    for &seg in cycle {
        acc.push(seg)?;
    }
    Ok(acc.finish())
}

/// A real number stored as `mantissa * e^{log_scale}` so that values of
/// size `e^{±1000}` stay representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledValue {
    mantissa: f64,
    log_scale: f64,
}

impl ScaledValue {
    pub fn new(v: f64) -> Self {
        let mut s = Self {
            mantissa: v,
            log_scale: 0.0,
        };
        s.renormalize();
        s
    }

    fn renormalize(&mut self) {
        let m = self.mantissa.abs();
        if m != 0.0 && !(1e-100..=1e100).contains(&m) {
            self.log_scale += m.ln();
            self.mantissa = self.mantissa.signum();
        }
    }

    /// Multiplies by `e^{log_factor}`.
    pub fn scale(&mut self, log_factor: f64) {
        self.log_scale += log_factor;
    }

    /// Adds an ordinary real number.
    pub fn add(&mut self, x: f64) {
        if x == 0.0 {
            return;
        }
        if self.mantissa == 0.0 {
            *self = Self::new(x);
            return;
        }
        let rel = (x.abs().ln() - self.log_scale).clamp(-745.0, 709.0);
        self.mantissa += x.signum() * rel.exp();
        self.renormalize();
    }

    /// `ln |value|`; `-inf` for an exact zero.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.log_scale
    }

    pub fn value(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }
}

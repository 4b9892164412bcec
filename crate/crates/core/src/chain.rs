//! Finite-state continuous-time Markov chains: generator validation,
//! stationary distribution, exact event-driven path simulation and the
//! renewal-cycle decomposition anchored at a chosen state.
//!
//! A renewal cycle anchored at `j` starts with the sojourn in `j` that
//! begins when the chain enters `j` and ends immediately before the next
//! entry into `j`. Cycles are i.i.d., which is what makes the per-cycle
//! functionals of [`crate::pathfunc`] usable as perpetuity coefficients.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Validated CTMC generator. The diagonal is always computed from the
/// off-diagonal rates, never supplied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateMatrix {
    n: usize,
    rates: Vec<f64>,
    // Cumulative jump probabilities of the embedded chain, row-major.
    #[serde(skip)]
    jump_cdf: Vec<f64>,
}

impl RateMatrix {
    /// Validates an `n x n` table of rates. Diagonal entries of `raw` are
    /// ignored and replaced by minus the row sum.
    pub fn new(raw: &[Vec<f64>]) -> Result<Self> {
        let n = raw.len();
        if n == 0 {
            return Err(Error::NotSquare {
                rows: 0,
                bad_row: 0,
                bad_len: 0,
            });
        }
        if let Some((i, row)) = raw.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                bad_row: i,
                bad_len: row.len(),
            });
        }
        let mut rates = vec![0.0; n * n];
        for (i, row) in raw.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i == j {
                    continue;
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                if v < 0.0 {
                    return Err(Error::NegativeRate {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                rates[i * n + j] = v;
            }
        }
        for i in 0..n {
            let out: f64 = (0..n).filter(|&j| j != i).map(|j| rates[i * n + j]).sum();
            rates[i * n + i] = -out;
        }
        let q = Self {
            n,
            jump_cdf: Self::build_jump_cdf(n, &rates),
            rates,
        };
        q.check_irreducible()?;
        Ok(q)
    }

    /// Two-state chain with `0 -> 1` at rate `l01` and `1 -> 0` at rate `l10`.
    pub fn two_state(l01: f64, l10: f64) -> Result<Self> {
        Self::new(&[vec![0.0, l01], vec![l10, 0.0]])
    }

    /// The trivial one-state chain (constant environment).
    pub fn single() -> Self {
        Self::new(&[vec![0.0]]).expect("one-state chain is always valid")
    }

    fn build_jump_cdf(n: usize, rates: &[f64]) -> Vec<f64> {
        let mut cdf = vec![0.0; n * n];
        for i in 0..n {
            let exit = -rates[i * n + i];
            let mut acc = 0.0;
            for j in 0..n {
                if j != i && exit > 0.0 {
                    acc += rates[i * n + j] / exit;
                }
                cdf[i * n + j] = acc;
            }
        }
        cdf
    }

    fn check_irreducible(&self) -> Result<()> {
        if self.n == 1 {
            return Ok(());
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; self.n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..self.n {
                    let r = if forward { self.rate(i, j) } else { self.rate(j, i) };
                    if j != i && r > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen
        };
        // Strongly connected iff every state is reachable from 0 and 0 is
        // reachable from every state.
        if let Some(to) = reach(true).iter().position(|s| !s) {
            return Err(Error::Reducible { from: 0, to });
        }
        if let Some(from) = reach(false).iter().position(|s| !s) {
            return Err(Error::Reducible { from, to: 0 });
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    /// Generator entry `(i, j)`; the diagonal is `-exit_rate(i)`.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[i * self.n + j]
    }

    /// Total rate of leaving state `i`, i.e. `-lambda_ii`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.rates[i * self.n + i]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.rates.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    fn next_state<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = &self.jump_cdf[from * self.n..(from + 1) * self.n];
        // Last state with positive jump probability absorbs rounding in the cdf.
        let last = (0..self.n)
            .rev()
            .find(|&j| j != from && self.rate(from, j) > 0.0)
            .expect("irreducible chain with n >= 2 has an exit");
        (0..self.n)
            .find(|&j| j != from && self.rate(from, j) > 0.0 && u < row[j])
            .unwrap_or(last)
    }

    /// Draws one sojourn in `state` followed by the next state, or `None`
    /// when the state has no exit (one-state chain).
    pub fn step<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> Option<(f64, usize)> {
        let exit = self.exit_rate(state);
        if exit <= 0.0 {
            return None;
        }
        let hold = exp_draw(exit, rng);
        Some((hold, self.next_state(state, rng)))
    }
}

/// Exponential variate with the given rate.
pub(crate) fn exp_draw<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    // 1 - u lies in (0, 1].
    -(1.0 - u).ln() / rate
}

/// Stationary distribution of an irreducible chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDist {
    pub pi: Vec<f64>,
}

impl StationaryDist {
    /// `E_pi f` for a per-state table.
    pub fn expect(&self, values: &[f64]) -> f64 {
        self.pi.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// Draws a state with probabilities `pi`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, p) in self.pi.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        self.pi.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Solves `pi Q = 0`, `sum pi = 1` by Gaussian elimination with partial
/// pivoting, replacing the last balance equation with the normalisation.
pub fn stationary_distribution(q: &RateMatrix) -> Result<StationaryDist> {
    let n = q.n_states();
    if n == 1 {
        return Ok(StationaryDist { pi: vec![1.0] });
    }
    // Row k of the system is column k of Q, i.e. sum_i pi_i q_ik = 0.
    let mut m = vec![vec![0.0; n + 1]; n];
    for (k, row) in m.iter_mut().enumerate().take(n - 1) {
        for (i, cell) in row.iter_mut().enumerate().take(n) {
            *cell = q.rate(i, k);
        }
    }
    for cell in m[n - 1].iter_mut() {
        *cell = 1.0;
    }
    let scale = (0..n).map(|i| q.exit_rate(i)).fold(0.0, f64::max);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("non-empty range");
        if m[piv][col].abs() <= 1e-14 * scale.max(1.0) {
            return Err(Error::SingularSystem { residual: f64::NAN });
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    let mut pi: Vec<f64> = (0..n).map(|i| m[i][n] / m[i][i]).collect();
    for p in pi.iter_mut() {
        if *p < 0.0 && *p > -1e-14 {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let residual = (0..n)
        .map(|k| (0..n).map(|i| pi[i] * q.rate(i, k)).sum::<f64>().abs())
        .fold(0.0, f64::max);
    if pi.iter().any(|p| !p.is_finite() || *p < 0.0) || residual > 1e-10 * scale.max(1.0) {
        return Err(Error::SingularSystem { residual });
    }
    Ok(StationaryDist { pi })
}

/// One constant-state piece of a chain trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub state: usize,
    pub duration: f64,
}

/// A realised trajectory on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainPath {
    pub initial_state: usize,
    /// Jump times (strictly increasing, below the horizon) and the state
    /// entered at each jump.
    pub events: Vec<(f64, usize)>,
    pub horizon: f64,
}

impl ChainPath {
    /// Builds a path from an explicit list of segments.
    pub fn from_segments(segments: &[Segment]) -> Result<Self> {
        let first = segments.first().ok_or_else(|| invalid("empty segment list"))?;
        let mut t = 0.0;
        let mut events = Vec::with_capacity(segments.len() - 1);
        for (k, s) in segments.iter().enumerate() {
            if !(s.duration > 0.0) {
                return Err(invalid("segment durations must be positive"));
            }
            if k > 0 {
                if s.state == segments[k - 1].state {
                    return Err(invalid("consecutive segments must change state"));
                }
                events.push((t, s.state));
            }
            t += s.duration;
        }
        Ok(Self {
            initial_state: first.state,
            events,
            horizon: t,
        })
    }

    /// Constant-state segments covering `[0, horizon]`.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let starts = std::iter::once((0.0, self.initial_state)).chain(self.events.iter().copied());
        let ends = self
            .events
            .iter()
            .map(|e| e.0)
            .chain(std::iter::once(self.horizon));
        starts.zip(ends).map(|((t0, state), t1)| Segment {
            state,
            duration: t1 - t0,
        })
    }

    /// State occupied at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.events.partition_point(|e| e.0 <= t);
        if k == 0 {
            self.initial_state
        } else {
            self.events[k - 1].1
        }
    }

    /// Total time spent in each state.
    pub fn occupation_times(&self, n_states: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n_states];
        for s in self.segments() {
            occ[s.state] += s.duration;
        }
        occ
    }
}

/// Gillespie simulation of the chain on `[0, horizon]`.
pub fn simulate_path<R: Rng + ?Sized>(
    q: &RateMatrix,
    initial: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<ChainPath> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    if initial >= q.n_states() {
        return Err(invalid(format!("initial state {initial} out of range")));
    }
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut state = initial;
    while let Some((hold, next)) = q.step(state, rng) {
        t += hold;
        if t >= horizon {
            break;
        }
        events.push((t, next));
        state = next;
    }
    Ok(ChainPath {
        initial_state: initial,
        events,
        horizon,
    })
}

/// Complete renewal cycles anchored at one state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalCycles {
    pub anchor: usize,
    pub cycles: Vec<Vec<Segment>>,
}

impl RenewalCycles {
    pub fn lengths(&self) -> Vec<f64> {
        self.cycles
            .iter()
            .map(|c| c.iter().map(|s| s.duration).sum())
            .collect()
    }
}

/// Splits a path into complete cycles between successive entries into
/// `anchor`. The leading piece before the first entry and the trailing
/// incomplete cycle are discarded.
pub fn decompose_cycles(path: &ChainPath, anchor: usize) -> Result<RenewalCycles> {
    let mut cycles = Vec::new();
    let mut current: Option<Vec<Segment>> = None;
    for seg in path.segments() {
        if seg.state == anchor {
            if let Some(done) = current.take() {
                cycles.push(done);
            }
            current = Some(Vec::new());
        }
        if let Some(c) = current.as_mut() {
            c.push(seg);
        }
    }
    if cycles.is_empty() {
        return Err(Error::NoCompleteCycle { anchor });
    }
    Ok(RenewalCycles { anchor, cycles })
}

/// Runs one renewal cycle from a fresh entry into `anchor`, feeding each
/// segment to `visit`. Returns the cycle length.
pub fn run_cycle<R, F>(q: &RateMatrix, anchor: usize, rng: &mut R, mut visit: F) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(Segment),
{
    let mut state = anchor;
    let mut len = 0.0;
    loop {
        let (hold, next) = q
            .step(state, rng)
            .ok_or_else(|| invalid("a one-state chain has no renewal cycles"))?;
        visit(Segment {
            state,
            duration: hold,
        });
        len += hold;
        if next == anchor {
            return Ok(len);
        }
        state = next;
    }
}

/// Draws `count` i.i.d. cycles by starting the chain at the anchor.
pub fn sample_cycles<R: Rng + ?Sized>(
    q: &RateMatrix,
    anchor: usize,
    count: usize,
    rng: &mut R,
) -> Result<RenewalCycles> {
    if count == 0 {
        return Err(invalid("cycle count must be at least 1"));
    }
    if anchor >= q.n_states() {
        return Err(invalid(format!("anchor {anchor} out of range")));
    }
    let mut cycles = Vec::with_capacity(count);
    for _ in 0..count {
        let mut segs = Vec::new();
        run_cycle(q, anchor, rng, |s| segs.push(s))?;
        cycles.push(segs);
    }
    Ok(RenewalCycles { anchor, cycles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::stats::{ks_one_sample, ks_two_sample, moments_with_se, SampleSet};

    #[test]
    fn diagonal_is_computed() {
        let q = RateMatrix::new(&[vec![9.0, 1.0], vec![2.0, 9.0]]).unwrap();
        assert_eq!(q.rate(0, 0), -1.0);
        assert_eq!(q.rate(1, 1), -2.0);
        for row in q.rows() {
            assert_eq!(row.iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            RateMatrix::two_state(0.0, 2.0),
            Err(Error::Reducible { .. })
        ));
        assert!(matches!(
            RateMatrix::two_state(-1.0, 2.0),
            Err(Error::NegativeRate { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            RateMatrix::two_state(f64::INFINITY, 2.0),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(RateMatrix::new(&[]), Err(Error::NotSquare { .. })));
        assert!(matches!(
            RateMatrix::new(&[vec![0.0, 1.0], vec![1.0]]),
            Err(Error::NotSquare { .. })
        ));
        // 0 -> 1 -> 2 but nothing returns to 0.
        let r = RateMatrix::new(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ]);
        assert!(matches!(r, Err(Error::Reducible { .. })));
    }

    #[test]
    fn stationary_examples() {
        let q = RateMatrix::two_state(1.0, 2.0).unwrap();
        let pi = stationary_distribution(&q).unwrap();
        // pi0 * 1 = pi1 * 2
        assert!((pi.pi[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((pi.pi[1] - 1.0 / 3.0).abs() < 1e-14);

        assert_eq!(stationary_distribution(&RateMatrix::single()).unwrap().pi, vec![1.0]);

        let cyc = RateMatrix::new(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let pi = stationary_distribution(&cyc).unwrap();
        for p in &pi.pi {
            assert!((p - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_balance_residual() {
        let q = RateMatrix::new(&[
            vec![0.0, 0.3, 2.0, 0.0],
            vec![1.5, 0.0, 0.1, 0.7],
            vec![0.0, 4.0, 0.0, 0.2],
            vec![0.9, 0.0, 0.05, 0.0],
        ])
        .unwrap();
        let pi = stationary_distribution(&q).unwrap();
        assert!((pi.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..4 {
            let r: f64 = (0..4).map(|i| pi.pi[i] * q.rate(i, k)).sum();
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn single_state_path_has_no_events() {
        let q = RateMatrix::single();
        let p = simulate_path(&q, 0, 123.0, &mut seeded(1)).unwrap();
        assert!(p.events.is_empty());
        assert_eq!(p.occupation_times(1), vec![123.0]);
    }

    #[test]
    fn path_invariants_and_determinism() {
        let q = RateMatrix::two_state(1.0, 2.0).unwrap();
        let p = simulate_path(&q, 0, 50.0, &mut seeded(5)).unwrap();
        let again = simulate_path(&q, 0, 50.0, &mut seeded(5)).unwrap();
        assert_eq!(p, again);
        let mut prev_t = 0.0;
        let mut prev_s = p.initial_state;
        for &(t, s) in &p.events {
            assert!(t > prev_t && t < p.horizon);
            assert_ne!(s, prev_s);
            prev_t = t;
            prev_s = s;
        }
        let total: f64 = p.occupation_times(2).iter().sum();
        assert!((total - 50.0).abs() < 1e-9);
        assert!(simulate_path(&q, 0, 0.0, &mut seeded(5)).is_err());
    }

    #[test]
    fn occupation_fraction_matches_pi() {
        let chains = [
            RateMatrix::two_state(1.0, 2.0).unwrap(),
            RateMatrix::new(&[
                vec![0.0, 1.0, 0.5],
                vec![2.0, 0.0, 1.0],
                vec![0.3, 0.3, 0.0],
            ])
            .unwrap(),
            RateMatrix::new(&[
                vec![0.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 2.0, 0.0],
                vec![0.0, 0.0, 0.0, 3.0],
                vec![4.0, 0.0, 0.0, 0.0],
            ])
            .unwrap(),
        ];
        for (k, q) in chains.iter().enumerate() {
            let pi = stationary_distribution(q).unwrap();
            let p = simulate_path(q, 0, 1e4, &mut seeded(10 + k as u64)).unwrap();
            let occ = p.occupation_times(q.n_states());
            for j in 0..q.n_states() {
                assert!((occ[j] / 1e4 - pi.pi[j]).abs() <= 0.02, "chain {k} state {j}");
            }
        }
    }

    #[test]
    fn decompose_small_path() {
        let p = ChainPath::from_segments(&[
            Segment { state: 0, duration: 1.0 },
            Segment { state: 1, duration: 0.5 },
            Segment { state: 0, duration: 2.0 },
            Segment { state: 1, duration: 0.25 },
        ])
        .unwrap();
        let c = decompose_cycles(&p, 0).unwrap();
        assert_eq!(c.cycles.len(), 1);
        assert_eq!(c.lengths(), vec![1.5]);
        assert_eq!(c.cycles[0][0].state, 0);

        let never = ChainPath::from_segments(&[
            Segment { state: 1, duration: 1.0 },
            Segment { state: 0, duration: 1.0 },
        ])
        .unwrap();
        assert!(matches!(
            decompose_cycles(&never, 0),
            Err(Error::NoCompleteCycle { anchor: 0 })
        ));
    }

    #[test]
    fn decomposed_cycle_mean_length() {
        let q = RateMatrix::two_state(1.0, 2.0).unwrap();
        let p = simulate_path(&q, 0, 1e4, &mut seeded(21)).unwrap();
        let c = decompose_cycles(&p, 0).unwrap();
        assert!(c.cycles.iter().all(|cy| cy[0].state == 0));
        let (m, se) = moments_with_se(&SampleSet::new(c.lengths()).unwrap(), 1).unwrap();
        assert!((m - 1.5).abs() < 3.0 * se, "{m} +- {se}");
    }

    #[test]
    fn sampled_cycle_mean_length_both_anchors() {
        let q = RateMatrix::two_state(1.0, 2.0).unwrap();
        assert!(sample_cycles(&q, 0, 0, &mut seeded(1)).is_err());
        for anchor in 0..2 {
            let c = sample_cycles(&q, anchor, 100_000, &mut seeded(30 + anchor as u64)).unwrap();
            let (m, se) = moments_with_se(&SampleSet::new(c.lengths()).unwrap(), 1).unwrap();
            assert!((m - 1.5).abs() < 3.0 * se, "anchor {anchor}: {m} +- {se}");
        }
    }

    #[test]
    fn sojourns_are_exponential() {
        let q = RateMatrix::new(&[
            vec![0.0, 1.0, 0.5],
            vec![2.0, 0.0, 1.0],
            vec![0.3, 0.3, 0.0],
        ])
        .unwrap();
        let c = sample_cycles(&q, 1, 100_000, &mut seeded(40)).unwrap();
        let first: Vec<f64> = c.cycles.iter().map(|cy| cy[0].duration).collect();
        let rate = q.exit_rate(1);
        let d = ks_one_sample(&SampleSet::new(first).unwrap(), |x| 1.0 - (-rate * x).exp()).unwrap();
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn decomposed_and_sampled_cycles_agree() {
        let q = RateMatrix::new(&[
            vec![0.0, 1.0, 0.5],
            vec![2.0, 0.0, 1.0],
            vec![0.3, 0.3, 0.0],
        ])
        .unwrap();
        let p = simulate_path(&q, 2, 6.5e4, &mut seeded(50)).unwrap();
        let mut a = decompose_cycles(&p, 2).unwrap().lengths();
        a.truncate(10_000);
        assert!(a.len() >= 10_000, "{}", a.len());
        let b = sample_cycles(&q, 2, 10_000, &mut seeded(51)).unwrap().lengths();
        let (d, _) = ks_two_sample(&SampleSet::new(a).unwrap(), &SampleSet::new(b).unwrap()).unwrap();
        assert!(d < 0.02, "{d}");
    }
}

//! Config-driven runners behind the command-line subcommands.
//!
//! Every runner renders its outputs in memory first ([`RunOutput`]), so
//! the same bytes can be compared in tests and written to disk by the
//! binary. Replicate `k` always draws from `stream(seed, "replicate", k)`
//! and rows are assembled in replicate order, which makes the CSV files
//! independent of the worker count.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::appmodels::{cir_simulate, cir_stationary_sampler, sis_simulate, CirStationary, CirTarget};
use crate::chain::{run_cycle, simulate_path, stationary_distribution, RateMatrix};
use crate::config::{ExperimentConfig, Model, ResolvedModel};
use crate::error::{Error, Result};
use crate::limits::{regime_experiment, ExperimentSpec, FunctionalModel, LogTarget, Regime, SigmaConvention};
use crate::ou::{simulate, stationary_moment, stationary_sampler, walk_path, PerpetuityMixture, Record, StationaryMixture};
use crate::pathfunc::{propagate, FunctionalState, StateTable};
use crate::rng::stream;
use crate::sre::{goldie_kesten_index, nu_star};
use crate::stats::{histogram, ks_two_sample, mean_se, variance, SampleSet};

/// Draws per random stream when sampling stationary laws in parallel.
const DRAW_CHUNK: usize = 4096;
const HISTOGRAM_BINS: usize = 60;

/// Command-line overrides applied on top of the config.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

/// Rendered output files, in write order. The last one is the JSON
/// summary `{manifest, metrics}`.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
}

impl RunOutput {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

fn cfg_err(message: impl Into<String>) -> Error {
    Error::Config {
        line: 0,
        message: message.into(),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(cfg_err("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(f),
    }
}

struct Prepared {
    cfg: ExperimentConfig,
    resolved: ResolvedModel,
    started: Instant,
    command: &'static str,
    threads: Option<usize>,
}

impl Prepared {
    fn new(command: &'static str, cfg: &ExperimentConfig, opts: RunOptions) -> Result<Self> {
        let mut cfg = cfg.clone();
        if let Some(seed) = opts.seed {
            cfg.run.seed = seed;
        }
        let resolved = cfg.resolve()?;
        Ok(Self {
            cfg,
            resolved,
            started: Instant::now(),
            command,
            threads: opts.threads,
        })
    }

    fn seed(&self) -> u64 {
        self.cfg.run.seed
    }

    fn output_name(&self, key: &str) -> String {
        self.cfg.run.outputs[key].clone()
    }

    fn manifest(&self, extra: Value) -> Result<Value> {
        let q = chain_of(&self.resolved.model);
        let pi = stationary_distribution(q)?;
        let class = &self.resolved.class;
        let mut m = json!({
            "command": self.command,
            "config": self.cfg.to_string(),
            "seed": self.seed(),
            "versions": { "regime-lab": env!("CARGO_PKG_VERSION") },
            "streams": "replicate k: (seed, \"replicate\", k)",
            "derived": {
                "pi": pi.pi,
                "rate": self.resolved.rate_name,
                "e_pi_rate": class.e_pi_a,
                "regime": class.regime.name(),
                "exact_classification": class.exact,
            },
            "threads": self.threads,
            "wall_time_s": self.started.elapsed().as_secs_f64(),
        });
        if let (Value::Object(m), Value::Object(extra)) = (&mut m, extra) {
            m.extend(extra);
        }
        Ok(m)
    }

    fn finish(self, mut files: Vec<(String, Vec<u8>)>, metrics: Value, extra: Value) -> Result<RunOutput> {
        let summary = json!({ "manifest": self.manifest(extra)?, "metrics": metrics });
        let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        text.push('\n');
        files.push((self.output_name("summary"), text.into_bytes()));
        Ok(RunOutput { files, summary })
    }
}

fn chain_of(model: &Model) -> &RateMatrix {
    match model {
        Model::Ou(m) => &m.q,
        Model::Cir(m) => &m.base.q,
        Model::Sis(m) => &m.q,
        Model::Functional(m) => &m.q,
    }
}

fn functional_simulate(model: &FunctionalModel, horizon: f64, record_at: &[f64], rng: &mut dyn RngCore) -> Result<Vec<Record>> {
    let FunctionalModel { q, c, d, f0, x0 } = model;
    let x0 = match *x0 {
        Some(x) => x,
        None => stationary_distribution(q)?.sample(rng),
    };
    let path = simulate_path(q, x0, horizon, rng)?;
    let mut fs = FunctionalState { f: *f0, log_phi: 0.0 };
    let mut out = Vec::with_capacity(record_at.len());
    walk_path(&path, record_at, |state, dt, rec| {
        fs = propagate(fs, state, dt, c, d)?;
        if let Some(time) = rec {
            out.push(Record { time, value: fs.f, state });
        }
        Ok(())
    })?;
    Ok(out)
}

/// One replicate of the configured model at the record times. SIS rows
/// carry `I_t`.
fn simulate_one(model: &Model, horizon: f64, record_at: &[f64], rng: &mut dyn RngCore) -> Result<Vec<Record>> {
    match model {
        Model::Ou(m) => simulate(m, horizon, record_at, rng),
        Model::Cir(m) => cir_simulate(m, horizon, record_at, rng),
        Model::Sis(m) => Ok(sis_simulate(m, horizon, record_at, rng)?
            .into_iter()
            .map(|r| Record {
                time: r.time,
                value: r.infected,
                state: r.state,
            })
            .collect()),
        Model::Functional(m) => functional_simulate(m, horizon, record_at, rng),
    }
}

fn simulate_replicates(model: &Model, horizon: f64, record_at: &[f64], replicates: usize, seed: u64) -> Result<Vec<Vec<Record>>> {
    (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, "replicate", k as u64);
            simulate_one(model, horizon, record_at, &mut rng)
        })
        .collect()
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn summary_stats(xs: &[f64]) -> Value {
    if xs.is_empty() {
        return json!({ "n": 0 });
    }
    let (mean, mean_se) = mean_se(xs);
    json!({ "n": xs.len(), "mean": mean, "mean_se": mean_se, "variance": variance(xs) })
}

/// Trajectory CSV `time,replicate,value,state`.
pub fn render_trajectories(runs: &[Vec<Record>]) -> Vec<u8> {
    let mut s = String::from("time,replicate,value,state\n");
    for (k, run) in runs.iter().enumerate() {
        for r in run {
            let _ = writeln!(s, "{},{},{},{}", r.time, k, r.value, r.state);
        }
    }
    s.into_bytes()
}

/// `simulate`: replicate trajectories at the record times.
pub fn cmd_simulate(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunOutput> {
    let p = Prepared::new("simulate", cfg, opts)?;
    let run = &p.cfg.run;
    let horizon = run.horizon.as_ref().ok_or_else(|| cfg_err("simulate needs [run] horizon"))?.value;
    if run.replicates == 0 {
        return Err(cfg_err("replicates must be at least 1"));
    }
    let record = run.record.as_ref().map_or_else(|| vec![horizon], |r| r.times());
    if record.is_empty() {
        return Err(cfg_err("no record times"));
    }
    let runs = with_threads(p.threads, || simulate_replicates(&p.resolved.model, horizon, &record, run.replicates, p.seed()))?;
    let terminal: Vec<f64> = runs.iter().filter_map(|r| r.last().map(|x| x.value)).collect();
    let mut metrics = json!({
        "replicates": run.replicates,
        "record_times": record.len(),
        "horizon": horizon,
        "terminal": summary_stats(&terminal),
    });
    if let Model::Sis(_) = p.resolved.model {
        let underflow = runs.iter().flatten().filter(|r| r.value == 0.0).count();
        metrics["underflow_records"] = json!(underflow);
    }
    let files = vec![(p.output_name("trajectory"), render_trajectories(&runs))];
    p.finish(files, metrics, json!({}))
}

enum Stationary {
    Ou(StationaryMixture),
    Cir(CirStationary),
    /// SIS (`1/I`) and functional kinds: the perpetuity value itself.
    Perpetuity(PerpetuityMixture),
}

impl Stationary {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<f64> {
        match self {
            Stationary::Ou(m) => m.sample(rng),
            Stationary::Cir(m) => m.sample(rng),
            Stationary::Perpetuity(m) => Ok(m.draw_component(rng)?.v),
        }
    }
}

/// Draw CSV `draw,value`.
pub fn render_draws(draws: &[f64]) -> Vec<u8> {
    let mut s = String::from("draw,value\n");
    for (k, v) in draws.iter().enumerate() {
        let _ = writeln!(s, "{k},{v}");
    }
    s.into_bytes()
}

/// `stationary`: draws from the stationary sampler, a histogram, and
/// optionally the KS distance to terminals of a long simulation.
pub fn cmd_stationary(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunOutput> {
    let p = Prepared::new("stationary", cfg, opts)?;
    if p.resolved.class.regime != Regime::Stable {
        return Err(Error::NotStable {
            e_pi_a: p.resolved.class.e_pi_a,
        });
    }
    let run = &p.cfg.run;
    if run.draws < 2 {
        return Err(cfg_err("draws must be at least 2"));
    }
    let seed = p.seed();
    let model = &p.resolved.model;
    let mut build_rng = stream(seed, "mixture", 0);
    let cycles = run.cycles_per_state;
    let sampler = match model {
        Model::Ou(m) => Stationary::Ou(stationary_sampler(m, cycles, &mut build_rng)?),
        Model::Cir(m) => Stationary::Cir(cir_stationary_sampler(m, cycles, &mut build_rng)?),
        Model::Sis(m) => Stationary::Perpetuity(crate::appmodels::sis_stationary_mixture(m, cycles, &mut build_rng)?),
        Model::Functional(m) => Stationary::Perpetuity(PerpetuityMixture::build(&m.q, &m.c, &m.d, None, cycles, &mut build_rng)?),
    };
    let n_chunks = run.draws.div_ceil(DRAW_CHUNK);
    let draws: Vec<f64> = with_threads(p.threads, || {
        let chunks: Vec<Vec<f64>> = (0..n_chunks)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, "draw", i as u64);
                let len = DRAW_CHUNK.min(run.draws - i * DRAW_CHUNK);
                (0..len).map(|_| sampler.sample(&mut rng)).collect()
            })
            .collect::<Result<_>>()?;
        Ok(chunks.concat())
    })?;
    let set = SampleSet::new(draws.clone())?;
    let hist = histogram(&set, HISTOGRAM_BINS)?;
    let mut hist_csv = Vec::new();
    hist.write_csv(&mut hist_csv).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut metrics = json!({ "draws": summary_stats(&draws) });
    if let Model::Ou(m) = model {
        let mut rng = stream(seed, "moment", 0);
        metrics["second_moment"] = match stationary_moment(m, 2, cycles, &mut rng) {
            Ok(est) => to_json(&est),
            Err(e) => json!({ "error": e.to_string() }),
        };
    }
    if let Some(h) = &run.compare_horizon {
        if run.replicates < 2 {
            return Err(cfg_err("the comparison needs replicates >= 2"));
        }
        let runs = with_threads(p.threads, || simulate_replicates(model, h.value, &[h.value], run.replicates, seed))?;
        let mut terminal = Vec::with_capacity(runs.len());
        let mut dropped = 0;
        for r in &runs {
            let v = r[0].value;
            match model {
                Model::Sis(_) if v == 0.0 => dropped += 1,
                Model::Sis(_) => terminal.push(1.0 / v),
                _ => terminal.push(v),
            }
        }
        let (ks, ks_scaled) = ks_two_sample(&set, &SampleSet::new(terminal.clone())?)?;
        metrics["comparison"] = json!({
            "horizon": h.value,
            "replicates": run.replicates,
            "dropped": dropped,
            "terminal": summary_stats(&terminal),
            "ks": ks,
            "ks_scaled": ks_scaled,
        });
    }
    let value = match model {
        Model::Sis(_) => "1/I",
        _ => "value",
    };
    let files = vec![
        (p.output_name("draws_file"), render_draws(&draws)),
        ("histogram.csv".to_string(), hist_csv),
    ];
    p.finish(files, metrics, json!({ "draw_value": value, "draw_streams": format!("chunks of {DRAW_CHUNK}: (seed, \"draw\", i)") }))
}

/// Statistic CSV `t,replicate,statistic`.
pub fn render_statistics(per_t: &[crate::limits::PerT]) -> Vec<u8> {
    let mut s = String::from("t,replicate,statistic\n");
    for pt in per_t {
        for (k, v) in pt.replicates.iter().zip(&pt.statistics) {
            let _ = writeln!(s, "{},{},{}", pt.t, k, v);
        }
    }
    s.into_bytes()
}

/// `limits`: the scaled log statistic on the time grid against draws of
/// its limit law.
pub fn cmd_limits(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunOutput> {
    let p = Prepared::new("limits", cfg, opts)?;
    let run = &p.cfg.run;
    let t_grid: Vec<f64> = run
        .t_grid
        .as_ref()
        .ok_or_else(|| cfg_err("limits needs [run] t_grid"))?
        .iter()
        .map(|x| x.value)
        .collect();
    if run.replicates < 2 || run.limit_draws < 2 {
        return Err(cfg_err("limits needs replicates >= 2 and limit_draws >= 2"));
    }
    if p.resolved.class.regime == Regime::Stable {
        return Err(Error::WrongRegime {
            expected: "transient or null_recurrent",
            actual: "stable",
        });
    }
    let spec = ExperimentSpec {
        t_grid,
        replicates: run.replicates,
        limit_draws: run.limit_draws,
        n_cycles: run.cycles_per_state,
        seed: p.seed(),
        convention: p.cfg.model.sigma,
        class: Some(p.resolved.class),
    };
    let sis_target;
    let cir_target;
    let target: &dyn LogTarget = match &p.resolved.model {
        Model::Ou(m) => m,
        Model::Functional(m) => m,
        Model::Sis(m) => {
            sis_target = m.reciprocal();
            &sis_target
        }
        Model::Cir(m) => {
            cir_target = CirTarget {
                model: m.clone(),
                form: p.cfg.model.cir_limit,
            };
            &cir_target
        }
    };
    let exp = with_threads(p.threads, || regime_experiment(target, &spec))?;
    let per_t: Vec<Value> = exp
        .per_t
        .iter()
        .map(|pt| json!({ "t": pt.t, "ks": pt.ks, "ks_scaled": pt.ks_scaled, "dropped": pt.dropped, "n": pt.statistics.len() }))
        .collect();
    let metrics = json!({
        "per_t": per_t,
        "ks_decreasing": exp.ks_decreasing,
        "limit_law": to_json(&exp.law),
        "scales_literal": exp.params.scales(SigmaConvention::Literal),
        "scales_centered": exp.params.scales(SigmaConvention::Centered),
        "cycle_params": to_json(&exp.params),
    });
    let statistic = match &p.resolved.model {
        Model::Sis(_) => "ln(1/I_t)/sqrt(t) + sqrt(t) E_pi gamma",
        Model::Cir(_) => "ln R_t/sqrt(t) + 2 sqrt(t) E_pi a",
        Model::Functional(_) => "ln|F_t|/sqrt(t) + sqrt(t) E_pi c",
        Model::Ou(_) => "ln|Y_t|/sqrt(t) + sqrt(t) E_pi a",
    };
    let files = vec![(p.output_name("statistics"), render_statistics(&exp.per_t))];
    p.finish(files, metrics, json!({ "statistic": statistic, "limit_stream": "(seed, \"limit\", 0)", "clt_streams": "anchor j: (seed, \"clt\", j)" }))
}

/// `tailindex`: per-anchor empirical tail index on `tail_cycles` cycles.
pub fn cmd_tailindex(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunOutput> {
    let p = Prepared::new("tailindex", cfg, opts)?;
    let run = &p.cfg.run;
    if run.tail_cycles < 2 {
        return Err(cfg_err("tail_cycles must be at least 2"));
    }
    let q = chain_of(&p.resolved.model);
    if q.n_states() < 2 {
        return Err(Error::InvalidArgument("a one-state chain has no renewal cycles".into()));
    }
    let rate: StateTable = match &p.resolved.model {
        Model::Ou(m) => m.a.clone(),
        Model::Cir(m) => m.base.a.clone(),
        Model::Sis(m) => m.gamma(),
        Model::Functional(m) => m.c.clone(),
    };
    let seed = p.seed();
    let estimates = with_threads(p.threads, || {
        (0..q.n_states())
            .into_par_iter()
            .map(|j| {
                let mut rng = stream(seed, "tail", j as u64);
                let log_a = (0..run.tail_cycles)
                    .map(|_| {
                        let mut integral = 0.0;
                        run_cycle(q, j, &mut rng, |s| integral += rate[s.state] * s.duration)?;
                        Ok(-integral)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                goldie_kesten_index(&log_a)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let nu = nu_star(&estimates)?;
    let mut csv = String::from("state,nu_hat,n_cycles\n");
    for (j, e) in estimates.iter().enumerate() {
        let _ = writeln!(csv, "{j},{},{}", e.nu_hat, e.n_cycles);
    }
    let metrics = json!({
        "nu_hat": estimates.iter().map(|e| e.nu_hat).collect::<Vec<_>>(),
        "nu_star": nu,
        "infinite_marker": "inf (JSON null) when E A^c < 1 for every c > 0",
    });
    let convention = format!(
        "log A = -∫_cycle {} (exponent 1): nu_hat is the power-law tail index of the process itself; \
         the cycle contraction of its variance perpetuity is A^2, whose tail index is nu_hat/2",
        p.resolved.rate_name
    );
    let files = vec![(p.output_name("tail_file"), csv.into_bytes())];
    p.finish(files, metrics, json!({ "tail_convention": convention, "tail_streams": "anchor j: (seed, \"tail\", j)" }))
}

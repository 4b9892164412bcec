//! Line-oriented experiment configuration.
//!
//! ```text
//! # two-state switching OU
//! [chain]
//! states = 2
//! row.0 = *, 1
//! row.1 = 2, *
//!
//! [model]
//! kind = ou
//! a = 2, -1
//! b = 1, 2
//!
//! [run]
//! horizon = 50
//! replicates = 20000
//! seed = 7
//! ```
//!
//! Numbers are decimal literals (`-1.25`, `3e-2`) or rationals (`7/3`);
//! both are kept exactly, so the sign of `E_pi a` is decided without
//! rounding. The diagonal of each rate row is written `*`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::appmodels::{CirLimitForm, CirModel, SisModel};
use crate::chain::RateMatrix;
use crate::error::{Error, Result};
use crate::limits::{classify_exact, FunctionalModel, RegimeClass, SigmaConvention};
use crate::ou::{OuModel, DEFAULT_CYCLES_PER_STATE};
use crate::pathfunc::StateTable;

/// A number as written in the config, with its exact rational value.
#[derive(Debug, Clone, PartialEq)]
pub struct Number {
    pub text: String,
    pub value: f64,
    pub exact: BigRational,
}

impl Number {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let t = text.trim();
        let exact = if let Some((p, q)) = t.split_once('/') {
            let p = BigInt::from_str(p.trim()).map_err(|_| format!("bad numerator in {t:?}"))?;
            let q = BigInt::from_str(q.trim()).map_err(|_| format!("bad denominator in {t:?}"))?;
            if q.is_zero() {
                return Err(format!("zero denominator in {t:?}"));
            }
            BigRational::new(p, q)
        } else {
            parse_decimal(t).ok_or_else(|| format!("not a number: {t:?}"))?
        };
        let value = if t.contains('/') {
            exact.to_f64().ok_or_else(|| format!("{t:?} is out of range"))?
        } else {
            t.parse::<f64>().map_err(|_| format!("not a number: {t:?}"))?
        };
        if !value.is_finite() {
            return Err(format!("{t:?} is out of range"));
        }
        Ok(Self {
            text: t.to_string(),
            value,
            exact,
        })
    }
}

/// `[-+]digits[.digits][e[-+]digits]` as an exact rational.
fn parse_decimal(t: &str) -> Option<BigRational> {
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(k) => (&t[..k], t[k + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(all);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ou,
    Cir,
    Sis,
    Functional,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ou => "ou",
            ModelKind::Cir => "cir",
            ModelKind::Sis => "sis",
            ModelKind::Functional => "functional",
        }
    }

    fn tables(self) -> (&'static [&'static str], &'static [&'static str]) {
        // (required, optional)
        match self {
            ModelKind::Ou => (&["a", "b"], &["c"]),
            ModelKind::Cir => (&["a", "b"], &[]),
            ModelKind::Sis => (&["alpha", "beta"], &[]),
            ModelKind::Functional => (&["c", "d"], &[]),
        }
    }

    fn scalars(self) -> &'static [&'static str] {
        match self {
            ModelKind::Ou => &["y0"],
            ModelKind::Cir => &["n_factors", "r0"],
            ModelKind::Sis => &["n_pop", "i0"],
            ModelKind::Functional => &["f0"],
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ou" => Ok(ModelKind::Ou),
            "cir" => Ok(ModelKind::Cir),
            "sis" => Ok(ModelKind::Sis),
            "functional" => Ok(ModelKind::Functional),
            _ => Err(format!("unknown model kind {s:?} (expected ou, cir, sis or functional)")),
        }
    }
}

/// Record times: an explicit list or `start:step:stop`.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordSpec {
    Times(Vec<Number>),
    Grid { start: Number, step: Number, stop: Number },
}

impl RecordSpec {
    pub fn times(&self) -> Vec<f64> {
        match self {
            RecordSpec::Times(v) => v.iter().map(|n| n.value).collect(),
            RecordSpec::Grid { start, step, stop } => {
                let count = ((stop.value - start.value) / step.value + 1e-9).floor() as usize;
                (0..=count).map(|k| start.value + k as f64 * step.value).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub tables: BTreeMap<String, Vec<Number>>,
    pub scalars: BTreeMap<String, Number>,
    pub x0: Option<usize>,
    pub sigma: SigmaConvention,
    pub cir_limit: CirLimitForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub horizon: Option<Number>,
    pub record: Option<RecordSpec>,
    pub replicates: usize,
    pub seed: u64,
    pub cycles_per_state: usize,
    pub draws: usize,
    pub t_grid: Option<Vec<Number>>,
    pub limit_draws: usize,
    pub tail_cycles: usize,
    pub compare_horizon: Option<Number>,
    pub outputs: BTreeMap<String, String>,
}

/// Output file keys and their default names.
pub const OUTPUTS: [(&str, &str); 5] = [
    ("trajectory", "trajectory.csv"),
    ("statistics", "statistics.csv"),
    ("draws_file", "draws.csv"),
    ("tail_file", "tail_index.csv"),
    ("summary", "summary.json"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Off-diagonal rates; `None` on the diagonal.
    pub rates: Vec<Vec<Option<Number>>>,
    pub model: ModelSection,
    pub run: RunSection,
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_list(line: usize, v: &str) -> Result<Vec<Number>> {
    v.split(',')
        .map(|x| Number::parse(x).map_err(|m| cfg_err(line, m)))
        .collect()
}

fn parse_count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| cfg_err(line, format!("{key} must be a non-negative integer, got {v:?}")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = None::<String>;
        let mut states = None::<(usize, usize)>;
        let mut rows: BTreeMap<usize, (usize, Vec<Option<Number>>)> = BTreeMap::new();
        let mut model_kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut run_kv: BTreeMap<String, (usize, String)> = BTreeMap::new();

        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if !["chain", "model", "run"].contains(&name) {
                    return Err(cfg_err(line, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| cfg_err(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let dup = |line| cfg_err(line, format!("duplicate key {key}"));
            match section.as_deref() {
                None => return Err(cfg_err(line, "key outside of any section")),
                Some("chain") => {
                    if key == "states" {
                        if states.is_some() {
                            return Err(dup(line));
                        }
                        states = Some((parse_count(line, key, value)?, line));
                    } else if let Some(i) = key.strip_prefix("row.") {
                        let i = parse_count(line, key, i)?;
                        let entries = value
                            .split(',')
                            .map(|x| {
                                let x = x.trim();
                                if x == "*" {
                                    Ok(None)
                                } else {
                                    Number::parse(x).map(Some).map_err(|m| cfg_err(line, m))
                                }
                            })
                            .collect::<Result<Vec<_>>>()?;
                        if rows.insert(i, (line, entries)).is_some() {
                            return Err(dup(line));
                        }
                    } else {
                        return Err(cfg_err(line, format!("unknown [chain] key {key}")));
                    }
                }
                Some(s) => {
                    let map = if s == "model" { &mut model_kv } else { &mut run_kv };
                    if map.insert(key.to_string(), (line, value.to_string())).is_some() {
                        return Err(dup(line));
                    }
                }
            }
        }

        let (n, states_line) = states.ok_or_else(|| cfg_err(0, "[chain] needs `states`"))?;
        if n == 0 {
            return Err(cfg_err(states_line, "states must be at least 1"));
        }
        let mut rates = Vec::with_capacity(n);
        for i in 0..n {
            let (line, row) = match rows.remove(&i) {
                Some(r) => r,
                None if n == 1 => (states_line, vec![None]),
                None => return Err(cfg_err(states_line, format!("missing row.{i}"))),
            };
            if row.len() != n {
                return Err(cfg_err(line, format!("row.{i} has {} entries, expected {n}", row.len())));
            }
            for (j, e) in row.iter().enumerate() {
                match (i == j, e) {
                    (true, Some(_)) => return Err(cfg_err(line, format!("diagonal entry of row.{i} must be `*` (it is implied by the row sum)"))),
                    (false, None) => return Err(cfg_err(line, format!("`*` is only allowed on the diagonal (row.{i}, column {j})"))),
                    _ => {}
                }
            }
            rates.push(row);
        }
        if let Some((i, (line, _))) = rows.into_iter().next() {
            return Err(cfg_err(line, format!("row.{i} is out of range for {n} states")));
        }

        let model = Self::parse_model(model_kv, n)?;
        let run = Self::parse_run(run_kv)?;
        Ok(Self { rates, model, run })
    }

    fn parse_model(mut kv: BTreeMap<String, (usize, String)>, n: usize) -> Result<ModelSection> {
        let (kind_line, kind) = kv.remove("kind").ok_or_else(|| cfg_err(0, "[model] needs `kind`"))?;
        let kind: ModelKind = kind.parse().map_err(|m: String| cfg_err(kind_line, m))?;
        let (required, optional) = kind.tables();
        let mut tables = BTreeMap::new();
        for &name in required.iter().chain(optional) {
            match kv.remove(name) {
                Some((line, v)) => {
                    let list = parse_list(line, &v)?;
                    if list.len() != n {
                        return Err(cfg_err(line, format!("table {name} has {} entries, chain has {n} states", list.len())));
                    }
                    tables.insert(name.to_string(), list);
                }
                None if required.contains(&name) => {
                    return Err(cfg_err(kind_line, format!("model kind {} needs table {name}", kind.name())));
                }
                None => {}
            }
        }
        let mut scalars = BTreeMap::new();
        for &name in kind.scalars() {
            if let Some((line, v)) = kv.remove(name) {
                scalars.insert(name.to_string(), Number::parse(&v).map_err(|m| cfg_err(line, m))?);
            }
        }
        let x0 = match kv.remove("x0") {
            Some((line, v)) => {
                let x = parse_count(line, "x0", &v)?;
                if x >= n {
                    return Err(cfg_err(line, format!("x0 = {x} is out of range")));
                }
                Some(x)
            }
            None => None,
        };
        let sigma = match kv.remove("sigma") {
            None => SigmaConvention::default(),
            Some((_, v)) if v == "centered" => SigmaConvention::Centered,
            Some((_, v)) if v == "literal" => SigmaConvention::Literal,
            Some((line, v)) => return Err(cfg_err(line, format!("sigma must be centered or literal, got {v:?}"))),
        };
        let cir_limit = match kv.remove("cir_limit") {
            None => CirLimitForm::default(),
            Some((_, v)) if v == "shared" => CirLimitForm::Shared,
            Some((_, v)) if v == "max_of_n" => CirLimitForm::MaxOfN,
            Some((line, v)) => return Err(cfg_err(line, format!("cir_limit must be shared or max_of_n, got {v:?}"))),
        };
        if let Some((key, (line, _))) = kv.into_iter().next() {
            return Err(cfg_err(line, format!("key {key} is not valid for model kind {}", kind.name())));
        }
        Ok(ModelSection {
            kind,
            tables,
            scalars,
            x0,
            sigma,
            cir_limit,
        })
    }

    fn parse_run(mut kv: BTreeMap<String, (usize, String)>) -> Result<RunSection> {
        let mut take_num = |key: &str| -> Result<Option<Number>> {
            kv.remove(key)
                .map(|(line, v)| Number::parse(&v).map_err(|m| cfg_err(line, m)))
                .transpose()
        };
        let horizon = take_num("horizon")?;
        let compare_horizon = take_num("compare_horizon")?;
        let mut count = |key: &str, default: usize| -> Result<usize> {
            kv.remove(key).map_or(Ok(default), |(line, v)| parse_count(line, key, &v))
        };
        let replicates = count("replicates", 1000)?;
        let cycles_per_state = count("cycles_per_state", DEFAULT_CYCLES_PER_STATE)?;
        let draws = count("draws", 10_000)?;
        let limit_draws = count("limit_draws", 100_000)?;
        let tail_cycles = count("tail_cycles", 100_000)?;
        let seed = match kv.remove("seed") {
            Some((line, v)) => v
                .parse()
                .map_err(|_| cfg_err(line, format!("seed must be an unsigned 64-bit integer, got {v:?}")))?,
            None => 0,
        };
        let record = match (kv.remove("record"), kv.remove("grid")) {
            (Some(_), Some((line, _))) => return Err(cfg_err(line, "give either record or grid, not both")),
            (Some((line, v)), None) => Some(RecordSpec::Times(parse_list(line, &v)?)),
            (None, Some((line, v))) => {
                let parts: Vec<&str> = v.split(':').collect();
                if parts.len() != 3 {
                    return Err(cfg_err(line, "grid must be start:step:stop"));
                }
                let p = |s: &str| Number::parse(s).map_err(|m| cfg_err(line, m));
                let (start, step, stop) = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
                if !(step.value > 0.0) || stop.value < start.value {
                    return Err(cfg_err(line, "grid needs step > 0 and stop >= start"));
                }
                Some(RecordSpec::Grid { start, step, stop })
            }
            (None, None) => None,
        };
        let t_grid = kv.remove("t_grid").map(|(line, v)| parse_list(line, &v)).transpose()?;
        let mut outputs = BTreeMap::new();
        for (key, default) in OUTPUTS {
            let name = kv.remove(key).map_or(default.to_string(), |(_, v)| v);
            outputs.insert(key.to_string(), name);
        }
        if let Some((key, (line, _))) = kv.into_iter().next() {
            return Err(cfg_err(line, format!("unknown [run] key {key}")));
        }
        Ok(RunSection {
            horizon,
            record,
            replicates,
            seed,
            cycles_per_state,
            draws,
            t_grid,
            limit_draws,
            tail_cycles,
            compare_horizon,
            outputs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.rates.len()
    }

    fn table(&self, name: &str) -> Option<&[Number]> {
        self.model.tables.get(name).map(Vec::as_slice)
    }

    fn scalar(&self, name: &str) -> Option<&Number> {
        self.model.scalars.get(name)
    }

    pub fn rate_matrix(&self) -> Result<RateMatrix> {
        let raw: Vec<Vec<f64>> = self
            .rates
            .iter()
            .map(|row| row.iter().map(|e| e.as_ref().map_or(0.0, |x| x.value)).collect())
            .collect();
        RateMatrix::new(&raw).map_err(|e| cfg_err(0, e.to_string()))
    }

    fn exact_rates(&self) -> Vec<Vec<BigRational>> {
        self.rates
            .iter()
            .map(|row| row.iter().map(|e| e.as_ref().map_or_else(BigRational::zero, |x| x.exact.clone())).collect())
            .collect()
    }

    /// Builds the typed model, validating every cross-reference.
    pub fn resolve(&self) -> Result<ResolvedModel> {
        let q = self.rate_matrix()?;
        let wrap = |e: Error| if e.is_config() { e } else { cfg_err(0, e.to_string()) };
        let table = |name: &str| -> Result<StateTable> {
            let v = self.table(name).ok_or_else(|| cfg_err(0, format!("missing table {name}")))?;
            StateTable::new(v.iter().map(|x| x.value).collect()).map_err(wrap)
        };
        let scalar = |name: &str, default: Option<f64>| -> Result<f64> {
            self.scalar(name)
                .map(|x| x.value)
                .or(default)
                .ok_or_else(|| cfg_err(0, format!("model kind {} needs {name}", self.model.kind.name())))
        };
        let exact_table = |name: &str| -> Vec<BigRational> {
            self.table(name).map_or_else(Vec::new, |v| v.iter().map(|x| x.exact.clone()).collect())
        };
        let rates = self.exact_rates();
        let (model, rate_exact, rate_name) = match self.model.kind {
            ModelKind::Ou => {
                let c = self.table("c").is_some().then(|| table("c")).transpose()?;
                let mut m = OuModel::new(q, table("a")?, table("b")?, c, scalar("y0", Some(0.0))?).map_err(wrap)?;
                m.x0 = self.model.x0;
                (Model::Ou(m), exact_table("a"), "a")
            }
            ModelKind::Cir => {
                let mut base = OuModel::new(q, table("a")?, table("b")?, None, 0.0).map_err(wrap)?;
                base.x0 = self.model.x0;
                let nf = scalar("n_factors", None)?;
                if nf.fract() != 0.0 || nf < 2.0 {
                    return Err(cfg_err(0, "n_factors must be an integer >= 2"));
                }
                let m = CirModel::new(base, nf as usize, scalar("r0", Some(1.0))?).map_err(wrap)?;
                (Model::Cir(m), exact_table("a"), "a")
            }
            ModelKind::Sis => {
                let mut m = SisModel::new(q, table("alpha")?, table("beta")?, scalar("n_pop", None)?, scalar("i0", None)?).map_err(wrap)?;
                m.x0 = self.model.x0;
                let n_pop = self.scalar("n_pop").map(|x| x.exact.clone()).unwrap_or_else(BigRational::one);
                let gamma: Vec<BigRational> = exact_table("beta")
                    .into_iter()
                    .zip(exact_table("alpha"))
                    .map(|(b, a)| b * &n_pop - a)
                    .collect();
                (Model::Sis(m), gamma, "gamma")
            }
            ModelKind::Functional => {
                let mut m = FunctionalModel::new(q, table("c")?, table("d")?, scalar("f0", Some(0.0))?).map_err(wrap)?;
                m.x0 = self.model.x0;
                (Model::Functional(m), exact_table("c"), "c")
            }
        };
        let class = classify_exact(&rates, &rate_exact).map_err(wrap)?;
        if let Some(h) = &self.run.horizon {
            if !(h.value > 0.0) {
                return Err(cfg_err(0, "horizon must be positive"));
            }
            if let Some(rec) = &self.run.record {
                let times = rec.times();
                if times.windows(2).any(|w| !(w[0] <= w[1])) || times.iter().any(|&t| !(0.0..=h.value).contains(&t)) {
                    return Err(cfg_err(0, "record times must be sorted and lie in [0, horizon]"));
                }
            }
        }
        if let Some(grid) = &self.run.t_grid {
            let t: Vec<f64> = grid.iter().map(|x| x.value).collect();
            if t.is_empty() || t.iter().any(|&x| !(x > 0.0)) || t.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(cfg_err(0, "t_grid must be strictly increasing positive times"));
            }
        }
        Ok(ResolvedModel {
            model,
            class,
            rate_name,
        })
    }
}

/// A validated model ready to run.
#[derive(Debug, Clone)]
pub enum Model {
    Ou(OuModel),
    Cir(CirModel),
    Sis(SisModel),
    Functional(FunctionalModel),
}

#[derive(Debug, Clone)]
pub struct ResolvedModel {
    pub model: Model,
    /// Classification of the rate that decides the regime, in exact
    /// arithmetic.
    pub class: RegimeClass,
    /// `a`, `gamma` or `c`.
    pub rate_name: &'static str,
}

fn join(v: &[Number]) -> String {
    v.iter().map(|x| x.text.as_str()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for ExperimentConfig {
    /// Canonical form; parsing it gives back an equal config.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[chain]")?;
        writeln!(f, "states = {}", self.n_states())?;
        for (i, row) in self.rates.iter().enumerate() {
            let cells: Vec<&str> = row.iter().map(|e| e.as_ref().map_or("*", |x| x.text.as_str())).collect();
            writeln!(f, "row.{i} = {}", cells.join(", "))?;
        }
        writeln!(f)?;
        writeln!(f, "[model]")?;
        writeln!(f, "kind = {}", self.model.kind.name())?;
        for (k, v) in &self.model.tables {
            writeln!(f, "{k} = {}", join(v))?;
        }
        for (k, v) in &self.model.scalars {
            writeln!(f, "{k} = {}", v.text)?;
        }
        if let Some(x) = self.model.x0 {
            writeln!(f, "x0 = {x}")?;
        }
        let sigma = match self.model.sigma {
            SigmaConvention::Centered => "centered",
            SigmaConvention::Literal => "literal",
        };
        writeln!(f, "sigma = {sigma}")?;
        let cir = match self.model.cir_limit {
            CirLimitForm::Shared => "shared",
            CirLimitForm::MaxOfN => "max_of_n",
        };
        writeln!(f, "cir_limit = {cir}")?;
        writeln!(f)?;
        let r = &self.run;
        writeln!(f, "[run]")?;
        if let Some(h) = &r.horizon {
            writeln!(f, "horizon = {}", h.text)?;
        }
        match &r.record {
            Some(RecordSpec::Times(t)) => writeln!(f, "record = {}", join(t))?,
            Some(RecordSpec::Grid { start, step, stop }) => writeln!(f, "grid = {}:{}:{}", start.text, step.text, stop.text)?,
            None => {}
        }
        writeln!(f, "replicates = {}", r.replicates)?;
        writeln!(f, "seed = {}", r.seed)?;
        writeln!(f, "cycles_per_state = {}", r.cycles_per_state)?;
        writeln!(f, "draws = {}", r.draws)?;
        if let Some(t) = &r.t_grid {
            writeln!(f, "t_grid = {}", join(t))?;
        }
        writeln!(f, "limit_draws = {}", r.limit_draws)?;
        writeln!(f, "tail_cycles = {}", r.tail_cycles)?;
        if let Some(h) = &r.compare_horizon {
            writeln!(f, "compare_horizon = {}", h.text)?;
        }
        for (k, v) in &r.outputs {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::Regime;

    const OU: &str = "
# benchmark
[chain]
states = 2
row.0 = *, 1
row.1 = 2, *   # back

[model]
kind = ou
a = 1, -2
b = 1, 1

[run]
horizon = 10
grid = 0:0.5:10
replicates = 3
seed = 9
";

    #[test]
    fn numbers_are_exact() {
        let n = Number::parse("-1.25").unwrap();
        assert_eq!(n.exact, BigRational::new((-5).into(), 4.into()));
        assert_eq!(n.value, -1.25);
        let n = Number::parse("7/3").unwrap();
        assert_eq!(n.exact, BigRational::new(7.into(), 3.into()));
        assert_eq!(n.value, 7.0 / 3.0);
        assert_eq!(Number::parse("3e-2").unwrap().exact, BigRational::new(3.into(), 100.into()));
        assert_eq!(Number::parse(".5").unwrap().value, 0.5);
        for bad in ["", "abc", "1/0", "inf", "nan", "1e999", "1.2.3"] {
            assert!(Number::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parses_and_resolves() {
        let cfg = ExperimentConfig::parse(OU).unwrap();
        assert_eq!(cfg.n_states(), 2);
        assert_eq!(cfg.run.record.as_ref().unwrap().times().len(), 21);
        let r = cfg.resolve().unwrap();
        assert_eq!(r.class.regime, Regime::NullRecurrent);
        assert!(r.class.exact);
        assert!(matches!(r.model, Model::Ou(_)));
    }

    #[test]
    fn round_trip_is_stable() {
        let cfg = ExperimentConfig::parse(OU).unwrap();
        let text = cfg.to_string();
        let again = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(text, again.to_string());
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            (OU.replace("row.0 = *, 1", "row.0 = -1, 1"), "diagonal"),
            (OU.replace("row.1 = 2, *", "row.1 = *, 2"), "only allowed on the diagonal"),
            (OU.replace("b = 1, 1", "b = 1"), "table b"),
            (OU.replace("kind = ou", "kind = heston"), "unknown model kind"),
            (OU.replace("seed = 9", "seed = -9"), "seed"),
            (OU.replace("seed = 9", "sede = 9"), "unknown [run] key"),
            (OU.replace("a = 1, -2", "a = 1, -2\nalpha = 1, 1"), "not valid for model kind"),
            (OU.replace("[run]", "[runs]"), "unknown section"),
        ];
        for (text, needle) in cases {
            let err = ExperimentConfig::parse(&text).unwrap_err();
            assert!(err.is_config());
            assert!(err.to_string().contains(needle), "{err} !~ {needle}");
        }
        let reducible = OU.replace("row.0 = *, 1", "row.0 = *, 0");
        assert!(ExperimentConfig::parse(&reducible).unwrap().resolve().unwrap_err().is_config());
        let late = OU.replace("grid = 0:0.5:10", "record = 5, 11");
        assert!(ExperimentConfig::parse(&late).unwrap().resolve().is_err());
    }

    #[test]
    fn sis_gamma_is_exact() {
        let text = "[chain]\nstates = 2\nrow.0 = *, 1\nrow.1 = 2, *\n[model]\nkind = sis\nalpha = 1, 3\nbeta = 1/50, 1/100\nn_pop = 100\ni0 = 1\n";
        let r = ExperimentConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(r.rate_name, "gamma");
        assert_eq!(r.class.regime, Regime::NullRecurrent);
    }

    proptest::proptest! {
        #[test]
        fn rendered_configs_parse_back(
            rates in proptest::collection::vec((1u32..50, 1u32..9), 2),
            a in proptest::collection::vec(-400i32..400, 2),
            seed in proptest::prelude::any::<u64>(),
            reps in 1usize..10_000,
        ) {
            let text = format!(
                "[chain]\nstates = 2\nrow.0 = *, {}/{}\nrow.1 = {}/{}, *\n[model]\nkind = ou\na = {}e-2, {}\nb = 1, 1\n[run]\nseed = {seed}\nreplicates = {reps}\n",
                rates[0].0, rates[0].1, rates[1].0, rates[1].1, a[0], a[1]
            );
            let cfg = ExperimentConfig::parse(&text).unwrap();
            let again = ExperimentConfig::parse(&cfg.to_string()).unwrap();
            proptest::prop_assert_eq!(&cfg, &again);
            proptest::prop_assert!(again.resolve().unwrap().class.exact);
        }
    }
}

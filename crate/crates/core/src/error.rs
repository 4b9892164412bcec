use thiserror::Error;

/// Errors raised by the simulation and estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rate table must be square with at least one state (got {rows} rows, row {bad_row} has {bad_len} entries)")]
    NotSquare {
        rows: usize,
        bad_row: usize,
        bad_len: usize,
    },
    #[error("negative rate {value} at ({row}, {col})")]
    NegativeRate { row: usize, col: usize, value: f64 },
    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("rate matrix is reducible: state {to} is not reachable from state {from}")]
    Reducible { from: usize, to: usize },
    #[error("stationary system is singular or ill-conditioned (residual {residual:e})")]
    SingularSystem { residual: f64 },
    #[error("path contains no complete renewal cycle for anchor state {anchor}")]
    NoCompleteCycle { anchor: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical overflow: {0}")]
    Overflow(String),
    #[error("pair source is degenerate and non-contractive")]
    DegenerateSource,
    #[error("backward sum did not contract within {terms} terms")]
    NonContractive { terms: usize },
    #[error("moment of order {order} diverges: estimated E A^m = {ea_m} (se {se})")]
    MomentDiverges { order: u32, ea_m: f64, se: f64 },
    #[error("tail index premise violated: mean log A = {mean_log_a} is not negative")]
    PremiseViolated { mean_log_a: f64 },
    #[error("model is not stable: E_pi a = {e_pi_a}")]
    NotStable { e_pi_a: f64 },
    #[error("operation requires regime {expected}, model is {actual}")]
    WrongRegime {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("cannot take the logarithm of a zero value at t = {t}")]
    ZeroValue { t: f64 },
    #[error("sample set is empty")]
    Empty,
    /// `line` is 0 for problems not tied to one line.
    #[error("config{}: {message}", if *line > 0 { format!(" line {line}") } else { String::new() })]
    Config { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Problems with the input, as opposed to numerical failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

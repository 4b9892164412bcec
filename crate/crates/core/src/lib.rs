pub mod acceptance;
pub mod appmodels;
pub mod chain;
pub mod config;
pub mod error;
pub mod limits;
pub mod ou;
pub mod pathfunc;
pub mod rng;
pub mod run;
pub mod sre;
pub mod stats;

pub use error::{Error, Result};

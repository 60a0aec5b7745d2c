//! Parameter sweeps driven by flat key-value configs, with CSV output.

mod config;
mod csv;
mod sweep;
mod validate;

use thiserror::Error;

use crate::collision::CollisionError;
use crate::models::ModelError;
use crate::sim_time::SimTimeError;

pub use config::{parse_config, parse_grid};
pub use csv::{emit_csv, format_csv, parse_csv};
pub use sweep::{derive_seed, run_sweep, run_sweep_with_threads};
pub use validate::{run_validation, Check};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config line {line}: `{field}`: {reason}")]
    ConfigInvalid {
        /// One-based line number, or 0 for whole-file checks.
        line: usize,
        field: String,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    SimTime(#[from] SimTimeError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("malformed CSV at line {line}: {reason}")]
    CsvInvalid { line: usize, reason: String },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl ExperimentError {
    pub fn config(line: usize, field: impl Into<String>, reason: impl Into<String>) -> Self {
        ExperimentError::ConfigInvalid {
            line,
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    NstarVsJtau,
    NstarVsBeta,
    TsimVsBeta,
    TsimVsEpsilon,
    RandomEnsembleVsBeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    BruteForce,
    Recursion,
    OdeSL,
}

impl std::str::FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "bruteforce" => Ok(Engine::BruteForce),
            "recursion" => Ok(Engine::Recursion),
            "odesl" | "ode" => Ok(Engine::OdeSL),
            other => Err(format!(
                "unknown engine `{other}` (expected brute_force, recursion or ode_sl)"
            )),
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "nstarvsjtau" => Ok(SweepKind::NstarVsJtau),
            "nstarvsbeta" => Ok(SweepKind::NstarVsBeta),
            "tsimvsbeta" => Ok(SweepKind::TsimVsBeta),
            "tsimvsepsilon" => Ok(SweepKind::TsimVsEpsilon),
            "randomensemblevsbeta" => Ok(SweepKind::RandomEnsembleVsBeta),
            other => Err(format!("unknown sweep kind `{other}`")),
        }
    }
}

/// Which physical quantity the grid of an `NstarVsJtau` sweep holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JtauAxis {
    /// Grid points are `J tau` directly.
    JTau,
    /// Grid points are collision durations `tau` at fixed `J`.
    Tau,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    MaximallyMixed,
    Populations(Vec<f64>),
}

/// A validated sweep description. Grid points are the swept parameter; the
/// remaining fields are held fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub axis: JtauAxis,
    pub d: usize,
    pub omega: f64,
    /// Ancilla inverse temperature; `+inf` for zero temperature.
    pub beta: f64,
    pub j_tau: Option<f64>,
    pub j: f64,
    pub gamma: f64,
    pub tau: Option<f64>,
    pub epsilon: f64,
    pub engine: Engine,
    pub seed: u64,
    pub repetitions: usize,
    pub n_max: usize,
    pub t_max: Option<f64>,
    pub j_lo: f64,
    pub j_hi: f64,
    pub initial: InitialState,
}

/// One output row.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub point: f64,
    /// `n*`, `T_sim` or the ensemble mean; the cap when unreachable.
    pub value: f64,
    /// Standard error of the ensemble mean, zero for single runs.
    pub stderr: f64,
    pub reachable: bool,
}

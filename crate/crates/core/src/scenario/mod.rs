//! Scenario configuration, the simulation loop, logs and sweeps.

pub mod config;
pub mod log;
pub mod runner;
pub mod sweep;

pub use config::{Positioning, Scenario, ScenarioConfig};
pub use runner::{run, run_stream, run_with_reference, summarize, RunLog, RunOutcome, RunSummary};
pub use sweep::{apply_overrides, parse_sweep, sweep, Override, SweepEntry};

use crate::{Error, Result};

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../scenarios/", $name, ".toml")))),*]
    };
}

/// Scenario files shipped with the crate, as `(name, toml)` pairs.
pub const BUNDLED: &[(&str, &str)] = bundled![
    "planar_nominal",
    "planar_hybrid",
    "planar_additive",
    "planar_additive_hybrid",
    "planar_additive_unstable",
    "cl_recovery",
    "cl_gain_tuning",
    "stationary_nominal",
    "stationary_attack",
    "stationary_resilient",
    "stationary_resilient_unstable",
    "lemniscate3d_nominal",
    "lemniscate3d_attack",
    "lemniscate3d_resilient",
];

/// Parses a bundled scenario by name.
pub fn bundled(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Argument(format!("no bundled scenario named `{name}`")))?;
    ScenarioConfig::from_toml_str(text)
}

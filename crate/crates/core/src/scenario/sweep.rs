//! Parameter sweeps over a base scenario.
//!
//! Each override set patches the base config by dotted path
//! (`attacks[0].c_a`, `noise.seed`, `attacks`) and runs on its own RNG
//! stream, the run index, so results do not depend on scheduling.

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::runner::{run_with_reference, RunSummary};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Override {
    pub path: String,
    pub value: toml::Value,
}

impl Override {
    pub fn new(path: impl Into<String>, value: impl Into<toml::Value>) -> Self {
        Self {
            path: path.into(),
            value: value.into(),
        }
    }
}

enum Segment<'a> {
    Key(&'a str),
    Index(usize),
}

fn parse_path(path: &str) -> Result<Vec<Segment<'_>>> {
    let bad = || Error::config(path, "malformed override path");
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(p) => (&part[..p], &part[p..]),
            None => (part, ""),
        };
        if key.is_empty() {
            return Err(bad());
        }
        out.push(Segment::Key(key));
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(bad)?;
            if !rest.starts_with('[') {
                return Err(bad());
            }
            out.push(Segment::Index(rest[1..close].parse().map_err(|_| bad())?));
            rest = &rest[close + 1..];
        }
    }
    Ok(out)
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let segments = parse_path(path)?;
    let missing = || Error::config(path, "override path does not exist in the base config");
    let mut node = root;
    for (k, seg) in segments.iter().enumerate() {
        let last = k + 1 == segments.len();
        node = match seg {
            Segment::Key(key) => {
                let table = node.as_table_mut().ok_or_else(missing)?;
                if last {
                    table.insert((*key).to_string(), value);
                    return Ok(());
                }
                table.get_mut(*key).ok_or_else(missing)?
            }
            Segment::Index(i) => {
                let array = node.as_array_mut().ok_or_else(missing)?;
                let slot = array.get_mut(*i).ok_or_else(missing)?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
        };
    }
    Err(missing())
}

/// The base config with `overrides` applied in order.
pub fn apply_overrides(base: &ScenarioConfig, overrides: &[Override]) -> Result<ScenarioConfig> {
    if overrides.is_empty() {
        return Ok(base.clone());
    }
    let mut tree = base.to_value()?;
    for o in overrides {
        set_path(&mut tree, &o.path, o.value.clone())?;
    }
    ScenarioConfig::from_value(tree)
}

/// Parses a sweep file: an array of `[[runs]]` tables whose keys are
/// override paths.
pub fn parse_sweep(text: &str) -> Result<Vec<Vec<Override>>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<sweep>", e.message().to_string()))?;
    for key in table.keys() {
        if key != "runs" {
            return Err(Error::config(key.as_str(), "unknown key in sweep file"));
        }
    }
    let runs = match table.get("runs") {
        None => return Ok(Vec::new()),
        Some(toml::Value::Array(a)) => a,
        Some(_) => return Err(Error::config("runs", "must be an array of tables")),
    };
    runs.iter()
        .enumerate()
        .map(|(k, run)| {
            let t = run
                .as_table()
                .ok_or_else(|| Error::config(format!("runs[{k}]"), "must be a table"))?;
            Ok(t.iter().map(|(p, v)| Override::new(p.clone(), v.clone())).collect())
        })
        .collect()
}

/// One sweep run. Failures are recorded rather than aborting the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub run: usize,
    pub overrides: Vec<Override>,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

/// Runs every override set; an empty list runs the base config once.
pub fn sweep(base: &ScenarioConfig, sets: &[Vec<Override>], jobs: Option<usize>) -> Vec<SweepEntry> {
    let sets: Vec<Vec<Override>> = if sets.is_empty() { vec![Vec::new()] } else { sets.to_vec() };
    let indexed: Vec<(usize, &Vec<Override>)> = sets.iter().enumerate().collect();
    crate::par::with_jobs(jobs, || {
        crate::par::map(&indexed, |(run, overrides)| {
            let outcome = apply_overrides(base, overrides)
                .and_then(|config| run_with_reference(&config, *run as u64, false));
            let (summary, error) = match outcome {
                Ok(o) => (Some(o.summary), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepEntry {
                run: *run,
                overrides: (*overrides).clone(),
                summary,
                error,
            }
        })
    })
}

//! CSV and JSON serialization of run logs.
//!
//! The CSV starts with one `# header=<json>` comment line holding the
//! [`RunHeader`], followed by a column header row and one row per step.
//! Columns, with `i` the agent index and `c` the axis (`0..dim`):
//!
//! ```text
//! t, index,
//! then for each agent i:
//!   x{i}_{c}..., v{i}_{c}..., u{i}_{c}..., xhat{i}_{c}...,
//!   beta{i}, kl{i}, kappa_g{i}, mode{i}, attacked{i},
//!   err{i}, local_err{i}, lyap{i}
//! ```
//!
//! `mode` is one of `initial`, `gps`, `relative`, `predict_only`, or `off`
//! when no estimator runs. Floats use the shortest round-trip formatting,
//! so identical runs produce identical bytes.

use std::io::{BufRead, Write};
use std::path::Path;

use super::runner::{RunHeader, RunLog, RunSummary};
use crate::metrics::{index_from_sums, MetricsConfig};
use crate::{Error, Result};

const HEADER_PREFIX: &str = "# header=";

fn column_names(agents: usize, dim: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string(), "index".to_string()];
    for i in 0..agents {
        for prefix in ["x", "v", "u", "xhat"] {
            for c in 0..dim {
                cols.push(format!("{prefix}{i}_{c}"));
            }
        }
        for name in ["beta", "kl", "kappa_g", "mode", "attacked", "err", "local_err", "lyap"] {
            cols.push(format!("{name}{i}"));
        }
    }
    cols
}

/// Writes the log as CSV.
pub fn write_csv<W: Write>(log: &RunLog, mut out: W) -> Result<()> {
    let header = serde_json::to_string(&log.header).expect("header serializes");
    writeln!(out, "{HEADER_PREFIX}{header}").map_err(|e| Error::io("<csv>", e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(column_names(log.header.agent_count, log.header.dimension))?;
    let mut row: Vec<String> = Vec::new();
    for r in &log.records {
        row.clear();
        row.push(r.t.to_string());
        row.push(r.index.to_string());
        for a in &r.agents {
            for v in [&a.position, &a.velocity, &a.input, &a.estimate] {
                row.extend(v.iter().map(|x| x.to_string()));
            }
            row.push(a.beta.to_string());
            row.push(a.kl.to_string());
            row.push(a.kappa_g.to_string());
            row.push(a.mode.map_or("off", |m| m.as_str()).to_string());
            row.push(u8::from(a.attacked).to_string());
            row.push(a.global_error.to_string());
            row.push(a.local_error.to_string());
            row.push(a.lyapunov.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_csv_file(log: &RunLog, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(log, std::io::BufWriter::new(file))
}

/// CSV bytes of a log.
pub fn csv_bytes(log: &RunLog) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(log, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn write_summary_file(summary: &RunSummary, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// The scalar series of a logged run needed to recompute metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedSeries {
    pub header: RunHeader,
    pub t: Vec<f64>,
    pub index: Vec<f64>,
    /// `Σ‖x̃_i‖` per step.
    pub global_sum: Vec<f64>,
    /// `Σ‖ē_i‖` per step.
    pub local_sum: Vec<f64>,
}

impl LoggedSeries {
    /// Index recomputed from the logged error norms.
    pub fn recompute_index(&self, config: &MetricsConfig) -> Vec<f64> {
        self.local_sum
            .iter()
            .zip(&self.global_sum)
            .map(|(l, g)| index_from_sums(*l, *g, config))
            .collect()
    }

    pub fn metrics_config(&self) -> MetricsConfig {
        MetricsConfig {
            theta: self.header.theta,
            alpha: self.header.alpha,
            epsilon_r: self.header.epsilon_r,
            hold: self.header.hold,
        }
    }
}

/// Reads a CSV written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<LoggedSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = std::io::BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let json = first
        .trim_end()
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| Error::Argument(format!("{} lacks a run header line", path.display())))?;
    let header: RunHeader = serde_json::from_str(json)
        .map_err(|e| Error::Argument(format!("{}: bad run header: {e}", path.display())))?;

    let mut r = csv::Reader::from_reader(reader);
    let cols = r.headers()?.clone();
    let find = |name: &str| {
        cols.iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Argument(format!("{}: missing column `{name}`", path.display())))
    };
    let t_col = find("t")?;
    let index_col = find("index")?;
    let err_cols: Vec<usize> = (0..header.agent_count)
        .map(|i| find(&format!("err{i}")))
        .collect::<Result<_>>()?;
    let local_cols: Vec<usize> = (0..header.agent_count)
        .map(|i| find(&format!("local_err{i}")))
        .collect::<Result<_>>()?;

    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::Argument(format!("{}: bad number `{s}`: {e}", path.display())))
    };
    let mut out = LoggedSeries {
        header,
        t: Vec::new(),
        index: Vec::new(),
        global_sum: Vec::new(),
        local_sum: Vec::new(),
    };
    for rec in r.records() {
        let rec = rec?;
        out.t.push(parse(&rec[t_col])?);
        out.index.push(parse(&rec[index_col])?);
        let mut g = 0.0;
        for &c in &err_cols {
            g += parse(&rec[c])?;
        }
        let mut l = 0.0;
        for &c in &local_cols {
            l += parse(&rec[c])?;
        }
        out.global_sum.push(g);
        out.local_sum.push(l);
    }
    Ok(out)
}

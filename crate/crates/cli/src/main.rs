//! `resform`: run, sweep and score resilient formation scenarios.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid config,
//! 3 simulation diverged, 4 I/O. Failures print one JSON error record
//! on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use resform::metrics::{modified_restoration, restoration, MetricsConfig, Series};
use resform::scenario::log::{read_csv, write_csv_file, write_summary_file};
use resform::scenario::{self, parse_sweep, run_with_reference, ScenarioConfig, BUNDLED};
use resform::Error;

#[derive(Parser)]
#[command(name = "resform", version, about = "Resilient time-varying formation tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Scenario TOML file.
    #[arg(long, value_name = "PATH", conflicts_with = "scenario", required_unless_present = "scenario")]
    config: Option<PathBuf>,
    /// Name of a bundled scenario (see `list-scenarios`).
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    /// Overrides the noise seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV log and JSON summary.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory (created if missing).
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
        /// Also run the attack-free twin and report modified restoration.
        #[arg(long)]
        reference: bool,
    },
    /// Run a base scenario once per `[[runs]]` table of a sweep file.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Sweep file with `[[runs]]` tables of `"path" = value` overrides.
        #[arg(long, value_name = "PATH")]
        sweep: Option<PathBuf>,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long, value_name = "N")]
        jobs: Option<usize>,
    },
    /// Recompute the index, restoration and modified restoration from a CSV log.
    Metrics {
        /// Run log written by `run`.
        #[arg(long, value_name = "PATH")]
        csv: PathBuf,
        /// Attack-free reference log for modified restoration.
        #[arg(long, value_name = "PATH")]
        reference: Option<PathBuf>,
        /// Start of the restoration window; defaults to the logged attack time.
        #[arg(long, value_name = "T")]
        attack_time: Option<f64>,
        /// End of the modified-restoration window; defaults to the logged value.
        #[arg(long, value_name = "T")]
        window_end: Option<f64>,
        /// Also write `metrics.json` into this directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Validate a scenario and print its resolved shape.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// List the bundled scenarios, or print one as TOML.
    ListScenarios {
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
    },
}

fn load(source: &Source) -> Result<(ScenarioConfig, String), Error> {
    let (mut config, stem) = match (&source.config, &source.scenario) {
        (Some(path), _) => {
            let path = std::fs::canonicalize(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            let stem = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            (ScenarioConfig::from_path(&path)?, stem)
        }
        (None, Some(name)) => (scenario::bundled(name)?, name.clone()),
        (None, None) => return Err(Error::Argument("give --config or --scenario".into())),
    };
    if let Some(seed) = source.seed {
        config.noise.seed = seed;
    }
    let name = if config.name.is_empty() { stem } else { config.name.clone() };
    Ok((config, name))
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn write_json(path: &Path, value: &Value) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print(value: &Value) {
    emit(&format!("{}\n", serde_json::to_string_pretty(value).expect("json serializes")));
}

fn cmd_run(source: &Source, out: &Path, reference: bool) -> Result<(), Error> {
    let (config, name) = load(source)?;
    ensure_dir(out)?;
    let outcome = run_with_reference(&config, 0, reference)?;
    let csv = out.join(format!("{name}.csv"));
    let summary = out.join(format!("{name}.summary.json"));
    write_csv_file(&outcome.log, &csv)?;
    write_summary_file(&outcome.summary, &summary)?;
    let mut files = vec![csv.display().to_string(), summary.display().to_string()];
    if let Some(r) = &outcome.reference {
        let path = out.join(format!("{name}.reference.csv"));
        write_csv_file(r, &path)?;
        files.push(path.display().to_string());
    }
    print(&json!({ "summary": outcome.summary, "files": files }));
    Ok(())
}

fn cmd_sweep(source: &Source, sweep_file: Option<&Path>, out: &Path, jobs: Option<usize>) -> Result<(), Error> {
    let (config, name) = load(source)?;
    let sets = match sweep_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            parse_sweep(&text)?
        }
        None => Vec::new(),
    };
    ensure_dir(out)?;
    let entries = scenario::sweep(&config, &sets, jobs);
    let value = json!({ "base": name, "config_hash": config.hash(), "seed": config.seed(), "runs": entries });
    let path = out.join(format!("{name}.sweep.json"));
    write_json(&path, &value)?;
    print(&value);
    Ok(())
}

fn cmd_metrics(
    csv: &Path,
    reference: Option<&Path>,
    attack_time: Option<f64>,
    window_end: Option<f64>,
    out: Option<&Path>,
) -> Result<(), Error> {
    let log = read_csv(csv)?;
    let config: MetricsConfig = log.metrics_config();
    let index = log.recompute_index(&config);
    let dt = log.header.dt;
    let t0 = log.t.first().copied().unwrap_or(0.0);
    let series = Series::new(t0, dt, &index);
    let min_index = index.iter().copied().fold(f64::INFINITY, f64::min);
    let final_index = index.last().copied();
    let attack_time = attack_time.or(log.header.attack_time);
    let window_end = window_end.unwrap_or(log.header.window_end);

    let mut value = json!({
        "csv": csv.display().to_string(),
        "config_hash": log.header.config_hash,
        "seed": log.header.seed,
        "min_index": min_index,
        "final_index": final_index,
        "attack_time": attack_time,
    });
    if let Some(ta) = attack_time {
        let r = restoration(series, ta, &config)?;
        value["restoration"] = json!(r.recovered().then_some(r.value));
        value["recovered"] = json!(r.recovered());
        value["recovery_time"] = json!(r.recovery);
    }
    if let Some(path) = reference {
        let ta = attack_time.ok_or_else(|| Error::Argument("modified restoration needs an attack time".into()))?;
        let reference = read_csv(path)?;
        let ref_index = reference.recompute_index(&config);
        let ref_t0 = reference.t.first().copied().unwrap_or(0.0);
        let rbar = modified_restoration(Series::new(ref_t0, reference.header.dt, &ref_index), series, ta, window_end)?;
        value["reference"] = json!(path.display().to_string());
        value["window"] = json!([ta, window_end]);
        value["modified_restoration"] = json!(rbar);
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("metrics.json"), &value)?;
    }
    print(&value);
    Ok(())
}

fn cmd_validate(source: &Source) -> Result<(), Error> {
    let (config, name) = load(source)?;
    let built = config.build()?;
    print(&json!({
        "name": name,
        "agents": built.graph.agent_count(),
        "dimension": built.plan.dimension(),
        "steps": built.steps,
        "dt": built.dt,
        "attacks": built.attacks.attacks().len(),
        "positioning": config.positioning,
        "config_hash": config.hash(),
        "seed": config.seed(),
    }));
    Ok(())
}

fn cmd_list(show: Option<&str>) -> Result<(), Error> {
    match show {
        Some(name) => {
            let (_, text) = BUNDLED
                .iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| Error::Argument(format!("no bundled scenario named `{name}`")))?;
            emit(text);
        }
        None => {
            for (name, _) in BUNDLED {
                let c = scenario::bundled(name)?;
                emit(&format!("{name:<32} {}\n", c.description));
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Disconnected { .. } => 2,
        Error::Diverged { .. } => 3,
        Error::Io { .. } | Error::Csv(_) => 4,
        _ => 1,
    }
}

fn error_record(e: &Error) -> Value {
    let kind = match e {
        Error::Config { .. } => "config",
        Error::Disconnected { .. } => "disconnected",
        Error::Diverged { .. } => "diverged",
        Error::Degenerate(_) => "degenerate",
        Error::Argument(_) => "argument",
        Error::Io { .. } => "io",
        Error::Csv(_) => "csv",
    };
    let mut record = json!({ "kind": kind, "message": e.to_string() });
    match e {
        Error::Config { path, .. } => record["path"] = json!(path),
        Error::Io { path, .. } => record["path"] = json!(path),
        Error::Diverged { agent, time } => {
            record["agent"] = json!(agent);
            record["time"] = json!(time);
        }
        _ => {}
    }
    json!({ "error": record })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { source, out, reference } => cmd_run(source, out, *reference),
        Command::Sweep { source, sweep, out, jobs } => cmd_sweep(source, sweep.as_deref(), out, *jobs),
        Command::Metrics {
            csv,
            reference,
            attack_time,
            window_end,
            out,
        } => cmd_metrics(csv, reference.as_deref(), *attack_time, *window_end, out.as_deref()),
        Command::Validate { source } => cmd_validate(source),
        Command::ListScenarios { show } => cmd_list(show.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

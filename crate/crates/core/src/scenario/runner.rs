//! The single-rate simulation loop.
//!
//! Each step at `t = k·dt`:
//! measure → attack → estimate → resolve positioning → tune gains →
//! control → log metrics → integrate to `k + 1`.
//! The last step is logged without integrating, so a run holds
//! `duration/dt + 1` records.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Positioning, Scenario, ScenarioConfig};
use crate::control::{control_input, lyapunov, tracking_errors, tune_gain};
use crate::dynamics::{measure, step};
use crate::estimation::{resilient_step, EstimatorMode, EstimatorState, RelativeObservation};
use crate::metrics::{modified_restoration, performance_index, restoration, Restoration, Series};
use crate::{Error, Matrix, Result, Vector};

/// Per-agent slice of one log record.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub position: Vector,
    pub velocity: Vector,
    pub input: Vector,
    /// Estimator output, or the delivered positioning when no estimator runs.
    pub estimate: Vector,
    pub beta: f64,
    pub kl: f64,
    pub kappa_g: f64,
    /// `None` when no estimator is configured.
    pub mode: Option<EstimatorMode>,
    /// Whether an attack was active on this agent.
    pub attacked: bool,
    /// `‖x̃_i‖`.
    pub global_error: f64,
    /// `‖ē_i‖`.
    pub local_error: f64,
    /// `V_i(ξ_i)`.
    pub lyapunov: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub index: f64,
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    /// RNG stream; 0 for single runs, the run index within a sweep.
    pub stream: u64,
    pub agent_count: usize,
    pub dimension: usize,
    pub dt: f64,
    pub theta: f64,
    pub alpha: f64,
    pub epsilon_r: f64,
    pub hold: f64,
    pub attack_time: Option<f64>,
    pub window_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    pub records: Vec<StepRecord>,
}

impl RunLog {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn index_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.index).collect()
    }

    /// Values of one per-agent field over time.
    pub fn agent_series<F: Fn(&AgentRecord) -> f64>(&self, agent: usize, f: F) -> Vec<f64> {
        self.records.iter().map(|r| f(&r.agents[agent])).collect()
    }

    /// Record at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> &StepRecord {
        let k = (t / self.header.dt).round().max(0.0) as usize;
        &self.records[k.min(self.records.len() - 1)]
    }
}

/// Scalar outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub stream: u64,
    pub records: usize,
    pub final_index: f64,
    pub min_index: f64,
    pub max_global_error_final: f64,
    /// `sup_t max_i ‖x̃_i‖`.
    pub max_global_error: f64,
    pub attack_time: Option<f64>,
    /// Minimum index from the attack time on.
    pub min_index_after_attack: Option<f64>,
    /// Restoration from the attack time; `None` when never recovered.
    pub restoration: Option<f64>,
    pub recovery_time: Option<f64>,
    pub recovered: Option<bool>,
    /// Modified restoration against the attack-free twin.
    pub modified_restoration: Option<f64>,
    pub window: Option<(f64, f64)>,
}

impl RunSummary {
    /// Restoration with the infinite sentinel restored.
    pub fn restoration_value(&self) -> Option<f64> {
        match self.recovered {
            Some(true) => self.restoration,
            Some(false) => Some(f64::INFINITY),
            None => None,
        }
    }
}

fn header(config: &ScenarioConfig, scenario: &Scenario, stream: u64) -> RunHeader {
    RunHeader {
        name: scenario.name.clone(),
        config_hash: config.hash(),
        seed: config.seed(),
        stream,
        agent_count: scenario.graph.agent_count(),
        dimension: scenario.plan.dimension(),
        dt: scenario.dt,
        theta: scenario.metrics.theta,
        alpha: scenario.metrics.alpha,
        epsilon_r: scenario.metrics.epsilon_r,
        hold: scenario.metrics.hold,
        attack_time: scenario.attack_time,
        window_end: scenario.window_end,
    }
}

/// Runs a validated config on RNG stream 0.
pub fn run(config: &ScenarioConfig) -> Result<RunLog> {
    run_stream(config, 0)
}

/// Runs on a given RNG stream of the configured seed.
pub fn run_stream(config: &ScenarioConfig, stream: u64) -> Result<RunLog> {
    let scenario = config.build()?;
    let header = header(config, &scenario, stream);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.noise.seed);
    rng.set_stream(stream);
    let records = simulate(&scenario, &mut rng)?;
    Ok(RunLog { header, records })
}

/// Runs the scenario loop with a caller-supplied RNG.
pub fn simulate(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<Vec<StepRecord>> {
    let agents = scenario.graph.agent_count();
    let n = scenario.plan.dimension();
    let dt = scenario.dt;
    let graph = &scenario.graph;
    let mut gains = scenario.gains.clone();
    let mut states = scenario.initial.clone();
    let mut estimators: Option<Vec<EstimatorState>> = None;
    let mut records = Vec::with_capacity(scenario.steps + 1);

    for k in 0..=scenario.steps {
        let t = k as f64 * dt;
        let desired = scenario.plan.desired_states(t);
        let meas = measure(&states, graph, &scenario.noise, rng);

        // The attacker knows the true composite error.
        let truth = tracking_errors(&states, &desired, graph, &gains);
        let mut attacked = vec![false; agents];
        let delivered: Vec<Vector> = (0..agents)
            .map(|i| {
                attacked[i] = scenario.attacks.active_for(i, t).is_some();
                scenario.attacks.corrupt(i, &meas[i].gps, &truth[i].composite, t)
            })
            .collect();

        if let Some((models, p0)) = &scenario.estimator {
            estimators = Some(match estimators.take() {
                None => delivered
                    .iter()
                    .map(|x| EstimatorState::new(x.clone(), Matrix::identity(n, n) * *p0))
                    .collect::<Result<_>>()?,
                Some(prev) => (0..agents)
                    .map(|i| {
                        let relative: Vec<RelativeObservation> = meas[i]
                            .relative
                            .iter()
                            .map(|r| RelativeObservation {
                                neighbor_desired: desired[r.neighbor].position.clone(),
                                measurement: -&r.displacement,
                            })
                            .collect();
                        resilient_step(&prev[i], &meas[i].velocity, &delivered[i], &relative, models)
                    })
                    .collect::<Result<_>>()?,
            });
        }

        let positioning: Vec<Vector> = match (scenario.positioning, &estimators) {
            (Positioning::Estimator, Some(est)) => est.iter().map(|e| e.estimate().clone()).collect(),
            _ => delivered.clone(),
        };

        if let (Some((params, activation)), Some(est)) = (&scenario.tuning, &estimators) {
            if t >= activation - 1e-9 {
                for i in 0..agents {
                    gains.kappa_g[i] = tune_gain(
                        gains.kappa_g[i],
                        est[i].beta,
                        params,
                        dt,
                        gains.kappa_g_lower[i],
                        gains.kappa_g_upper[i],
                    );
                }
            }
        }

        let inputs: Vec<Vector> = (0..agents)
            .map(|i| control_input(i, &meas[i], &positioning[i], &desired, graph, &gains))
            .collect::<Result<_>>()?;

        let errors: Vec<Vector> = truth.iter().map(|e| e.position.clone()).collect();
        let sample = performance_index(t, &errors, graph, &scenario.metrics);
        let composite = tracking_errors(&states, &desired, graph, &gains);
        let agent_records = (0..agents)
            .map(|i| {
                let (estimate, beta, kl, mode) = match &estimators {
                    Some(est) => (est[i].estimate().clone(), est[i].beta, est[i].kl, Some(est[i].mode)),
                    None => (delivered[i].clone(), 1.0, 0.0, None),
                };
                AgentRecord {
                    position: states[i].position.clone(),
                    velocity: states[i].velocity.clone(),
                    input: inputs[i].clone(),
                    estimate,
                    beta,
                    kl,
                    kappa_g: gains.kappa_g[i],
                    mode,
                    attacked: attacked[i],
                    global_error: sample.global_error[i],
                    local_error: sample.local_error[i],
                    lyapunov: lyapunov(&composite[i].composite, &gains.sigma_f[i]),
                }
            })
            .collect();
        records.push(StepRecord {
            t,
            index: sample.index,
            agents: agent_records,
        });

        if k < scenario.steps {
            states = step(&states, &inputs, dt, t)?;
        }
    }
    Ok(records)
}

/// Metrics of a finished run, with an optional attack-free reference.
pub fn summarize(log: &RunLog, reference: Option<&RunLog>) -> Result<RunSummary> {
    let h = &log.header;
    let index = log.index_values();
    let series = Series::new(0.0, h.dt, &index);
    let metrics = crate::metrics::MetricsConfig {
        theta: h.theta,
        alpha: h.alpha,
        epsilon_r: h.epsilon_r,
        hold: h.hold,
    };
    let last = log.records.last().ok_or_else(|| Error::Argument("empty log".into()))?;
    let min_index = index.iter().copied().fold(f64::INFINITY, f64::min);
    let (min_after, rest) = match h.attack_time {
        Some(ta) => {
            let k = series
                .locate(ta)
                .ok_or_else(|| Error::Argument(format!("attack time {ta} outside the log")))?;
            let min_after = index[k..].iter().copied().fold(f64::INFINITY, f64::min);
            (Some(min_after), Some(restoration(series, ta, &metrics)?))
        }
        None => (None, None),
    };
    let (modified, window) = match (reference, h.attack_time) {
        (Some(r), Some(ta)) if h.window_end > ta => {
            let ref_index = r.index_values();
            let value = modified_restoration(Series::new(0.0, r.header.dt, &ref_index), series, ta, h.window_end)?;
            (Some(value), Some((ta, h.window_end)))
        }
        _ => (None, None),
    };
    Ok(RunSummary {
        name: h.name.clone(),
        config_hash: h.config_hash.clone(),
        seed: h.seed,
        stream: h.stream,
        records: log.records.len(),
        final_index: last.index,
        min_index,
        max_global_error_final: last.agents.iter().map(|a| a.global_error).fold(0.0, f64::max),
        max_global_error: log
            .records
            .iter()
            .flat_map(|r| r.agents.iter().map(|a| a.global_error))
            .fold(0.0, f64::max),
        attack_time: h.attack_time,
        min_index_after_attack: min_after,
        restoration: rest.and_then(|r: Restoration| r.recovered().then_some(r.value)),
        recovery_time: rest.and_then(|r| r.recovery),
        recovered: rest.map(|r| r.recovered()),
        modified_restoration: modified,
        window,
    })
}

/// A run together with its summary and, when requested, the attack-free twin.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: RunLog,
    pub reference: Option<RunLog>,
    pub summary: RunSummary,
}

/// Runs the config and, if `metrics.reference` is set or `force_reference`
/// is true, its attack-free twin on the same RNG stream.
pub fn run_with_reference(config: &ScenarioConfig, stream: u64, force_reference: bool) -> Result<RunOutcome> {
    let want_reference = force_reference || config.metrics.reference;
    if !want_reference {
        let log = run_stream(config, stream)?;
        let summary = summarize(&log, None)?;
        return Ok(RunOutcome {
            log,
            reference: None,
            summary,
        });
    }
    let twin = config.without_attacks();
    let pair = [config, &twin];
    let mut logs = crate::par::map(&pair, |c| run_stream(c, stream)).into_iter();
    let log = logs.next().expect("two runs")?;
    let reference = logs.next().expect("two runs")?;
    let summary = summarize(&log, Some(&reference))?;
    Ok(RunOutcome {
        log,
        reference: Some(reference),
        summary,
    })
}

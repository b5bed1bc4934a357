//! TOML scenario schema.
//!
//! Agent indices are 0-based throughout. Times are in seconds and must fall
//! on the `dt` grid. Unknown keys are rejected; deserialization errors carry
//! the dotted path of the offending field.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::{AttackMode, AttackSchedule, AttackSpec, Bias};
use crate::control::{ControllerGains, TuningParams};
use crate::dynamics::{AgentState, GaussianNoise, NoiseConfig};
use crate::estimation::MeasurementModels;
use crate::formation::{FormationPlan, GlobalTrajectory, Keyframe, OffsetSchedule, Oscillation, Shape, SinusoidTerm};
use crate::graph::SensoryGraph;
use crate::metrics::MetricsConfig;
use crate::{Error, Matrix, Result, Vector};

const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub dimension: usize,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub graph: GraphConfig,
    pub formation: FormationConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub gains: GainsConfig,
    #[serde(default)]
    pub tuning: Option<TuningConfig>,
    #[serde(default)]
    pub attacks: Vec<AttackConfig>,
    #[serde(default)]
    pub estimator: Option<EstimatorConfig>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub positioning: Positioning,
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_dt() -> f64 {
    0.01
}

fn one() -> f64 {
    1.0
}

fn default_window() -> f64 {
    5.0
}

fn default_p0() -> f64 {
    1e-4
}

fn default_epsilon() -> f64 {
    0.01
}

/// Undirected topology: either a ring with uniform weight or an edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub agents: usize,
    #[serde(default)]
    pub ring_weight: Option<f64>,
    /// `[i, j, w]` triples.
    #[serde(default)]
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryConfig {
    Constant {
        point: Vec<f64>,
    },
    Lemniscate {
        ax: f64,
        ay: f64,
        omega: f64,
        #[serde(default)]
        vertical_amplitude: Option<f64>,
        #[serde(default)]
        vertical_offset: Option<f64>,
    },
    Sinusoids {
        offset: Vec<f64>,
        terms: Vec<SinusoidTerm>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeConfig {
    pub time: f64,
    #[serde(default)]
    pub shape: Option<Shape>,
    #[serde(default)]
    pub offsets: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationConfig {
    pub trajectory: TrajectoryConfig,
    /// Circumradius of the built-in shapes.
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "default_window")]
    pub transition_window: f64,
    pub keyframes: Vec<KeyframeConfig>,
    #[serde(default)]
    pub oscillations: Vec<Oscillation>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Start exactly on the desired states at `t = 0`.
    #[default]
    OnFormation,
    Explicit {
        positions: Vec<Vec<f64>>,
        #[serde(default)]
        velocities: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainOverride {
    pub agent: usize,
    #[serde(default)]
    pub kappa_g: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub kappa_g_lower: Option<f64>,
    #[serde(default)]
    pub kappa_g_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub kappa_f: f64,
    pub kappa_g: f64,
    /// `σ_f = sigma · I`.
    pub sigma: f64,
    #[serde(default)]
    pub kappa_g_lower: f64,
    /// Defaults to `kappa_g`.
    #[serde(default)]
    pub kappa_g_upper: Option<f64>,
    #[serde(default)]
    pub overrides: Vec<GainOverride>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    pub gamma: f64,
    pub sigma_beta: f64,
    pub chi_beta: f64,
    /// Tuning starts at this time.
    #[serde(default)]
    pub activation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub agent: usize,
    pub mode: AttackMode,
    /// Multiplicative factor; defaults to 1.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Constant part of the bias.
    #[serde(default)]
    pub bias: Option<Vec<f64>>,
    #[serde(default)]
    pub bias_terms: Vec<SinusoidTerm>,
    #[serde(default)]
    pub c_a: f64,
    pub start: f64,
    /// Open-ended when omitted.
    #[serde(default)]
    pub end: Option<f64>,
}

/// Isotropic estimator noise model, given as standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub process_std: f64,
    pub gps_std: f64,
    pub relative_std: f64,
    pub chi: f64,
    /// `P(0) = initial_covariance · I`.
    #[serde(default = "default_p0")]
    pub initial_covariance: f64,
}

/// Sensor noise standard deviations and the RNG seed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub velocity_std: f64,
    #[serde(default)]
    pub gps_std: f64,
    #[serde(default)]
    pub relative_std: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Position source fed to the global term of the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positioning {
    /// The delivered (possibly attacked) positioning measurement.
    #[default]
    Raw,
    /// The resilient estimator output.
    Estimator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub theta: f64,
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon_r: f64,
    #[serde(default = "one")]
    pub hold: f64,
    /// Start of the restoration window; defaults to the first attack onset.
    #[serde(default)]
    pub attack_time: Option<f64>,
    /// End of the modified-restoration window; defaults to the duration.
    #[serde(default)]
    pub window_end: Option<f64>,
    /// Also run an attack-free twin and report modified restoration.
    #[serde(default)]
    pub reference: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
}

/// Everything the run loop needs, validated and assembled.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub dt: f64,
    pub steps: usize,
    pub graph: SensoryGraph,
    pub plan: FormationPlan,
    pub initial: Vec<AgentState>,
    pub gains: ControllerGains,
    pub tuning: Option<(TuningParams, f64)>,
    pub attacks: AttackSchedule,
    pub estimator: Option<(MeasurementModels, f64)>,
    pub noise: NoiseConfig,
    pub positioning: Positioning,
    pub metrics: MetricsConfig,
    pub attack_time: Option<f64>,
    pub window_end: f64,
    pub reference: bool,
}

fn vector(values: &[f64], dimension: usize, path: &str) -> Result<Vector> {
    if values.len() != dimension {
        return Err(Error::config(
            path,
            format!("expected {dimension} components, found {}", values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::config(path, "components must be finite"));
    }
    Ok(Vector::from_column_slice(values))
}

fn vectors(values: &[Vec<f64>], count: usize, dimension: usize, path: &str) -> Result<Vec<Vector>> {
    if values.len() != count {
        return Err(Error::config(
            path,
            format!("expected {count} entries, found {}", values.len()),
        ));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, v)| vector(v, dimension, &format!("{path}[{i}]")))
        .collect()
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<toml>", e.message().to_string()))?;
        Self::from_value(toml::Value::Table(table))
    }

    /// Deserializes from an already parsed TOML tree.
    pub fn from_value(value: toml::Value) -> Result<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = match e.path().to_string() {
                p if p == "." => "<root>".to_string(),
                p => p,
            };
            Error::config(path, e.into_inner().to_string().trim_end())
        })
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_value(&self) -> Result<toml::Value> {
        toml::Value::try_from(self).map_err(|e| Error::config("<toml>", e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<toml>", e.to_string()))
    }

    pub fn seed(&self) -> u64 {
        self.noise.seed
    }

    /// SHA-256 over the semantic content: everything except the name,
    /// description and output paths.
    pub fn hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.name.clear();
        semantic.description.clear();
        semantic.output = OutputConfig::default();
        let bytes = serde_json::to_vec(&semantic).expect("config serializes to JSON");
        hex::encode(Sha256::digest(&bytes))
    }

    /// The same scenario with every attack removed.
    pub fn without_attacks(&self) -> Self {
        let mut c = self.clone();
        c.attacks.clear();
        c
    }

    fn check_grid(&self, t: f64, path: &str) -> Result<()> {
        let k = (t / self.dt).round();
        if !t.is_finite() || (t - k * self.dt).abs() > GRID_TOLERANCE {
            return Err(Error::config(path, format!("{t} is not a multiple of dt = {}", self.dt)));
        }
        Ok(())
    }

    /// Validates and assembles the runnable scenario.
    pub fn build(&self) -> Result<Scenario> {
        let n = self.dimension;
        if n != 2 && n != 3 {
            return Err(Error::config("dimension", "must be 2 or 3"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("dt", "must be positive"));
        }
        if !(self.duration > 0.0) {
            return Err(Error::config("duration", "must be positive"));
        }
        self.check_grid(self.duration, "duration")?;
        let steps = (self.duration / self.dt).round() as usize;

        let graph = self.build_graph()?;
        let agents = graph.agent_count();
        let plan = self.build_plan(agents)?;
        let initial = self.build_initial(&plan)?;
        let gains = self.build_gains(agents)?;

        let tuning = match &self.tuning {
            Some(t) => {
                let params = TuningParams {
                    gamma: t.gamma,
                    sigma_beta: t.sigma_beta,
                    chi_beta: t.chi_beta,
                };
                params.validate()?;
                self.check_grid(t.activation, "tuning.activation")?;
                if self.estimator.is_none() {
                    return Err(Error::config("tuning", "gain tuning needs an [estimator] section"));
                }
                Some((params, t.activation))
            }
            None => None,
        };

        let attacks = self.build_attacks(agents)?;

        let estimator = match &self.estimator {
            Some(e) => {
                let models = MeasurementModels::isotropic(n, e.process_std, e.gps_std, e.relative_std, self.dt, e.chi)?;
                if !(e.initial_covariance > 0.0) {
                    return Err(Error::config("estimator.initial_covariance", "must be positive"));
                }
                Some((models, e.initial_covariance))
            }
            None => None,
        };
        if self.positioning == Positioning::Estimator && estimator.is_none() {
            return Err(Error::config("positioning", "estimator positioning needs an [estimator] section"));
        }

        let noise = self.build_noise()?;

        let metrics = MetricsConfig {
            theta: self.metrics.theta,
            alpha: self.metrics.alpha,
            epsilon_r: self.metrics.epsilon_r,
            hold: self.metrics.hold,
        };
        metrics.validate()?;
        let attack_time = self.metrics.attack_time.or_else(|| attacks.first_onset());
        if let Some(t) = attack_time {
            self.check_grid(t, "metrics.attack_time")?;
            if t > self.duration {
                return Err(Error::config("metrics.attack_time", "beyond the run duration"));
            }
        }
        let window_end = self.metrics.window_end.unwrap_or(self.duration);
        self.check_grid(window_end, "metrics.window_end")?;
        if window_end > self.duration + GRID_TOLERANCE {
            return Err(Error::config("metrics.window_end", "beyond the run duration"));
        }

        Ok(Scenario {
            name: self.name.clone(),
            dt: self.dt,
            steps,
            graph,
            plan,
            initial,
            gains,
            tuning,
            attacks,
            estimator,
            noise,
            positioning: self.positioning,
            metrics,
            attack_time,
            window_end,
            reference: self.metrics.reference,
        })
    }

    fn build_graph(&self) -> Result<SensoryGraph> {
        let g = &self.graph;
        match (g.ring_weight, g.edges.is_empty()) {
            (Some(w), true) => SensoryGraph::ring(g.agents, w),
            (None, false) => SensoryGraph::from_edges(g.agents, &g.edges),
            (Some(_), false) => Err(Error::config("graph", "give either ring_weight or edges, not both")),
            (None, true) => Err(Error::config("graph", "one of ring_weight or edges is required")),
        }
    }

    fn build_plan(&self, agents: usize) -> Result<FormationPlan> {
        let n = self.dimension;
        let f = &self.formation;
        let global = match &f.trajectory {
            TrajectoryConfig::Constant { point } => {
                GlobalTrajectory::Constant(vector(point, n, "formation.trajectory.point")?)
            }
            TrajectoryConfig::Lemniscate {
                ax,
                ay,
                omega,
                vertical_amplitude,
                vertical_offset,
            } => {
                let vertical = match (n, vertical_amplitude, vertical_offset) {
                    (2, None, None) => None,
                    (2, _, _) => {
                        return Err(Error::config("formation.trajectory", "vertical terms need dimension 3"))
                    }
                    (_, a, o) => Some((a.unwrap_or(0.0), o.unwrap_or(0.0))),
                };
                GlobalTrajectory::Lemniscate {
                    ax: *ax,
                    ay: *ay,
                    omega: *omega,
                    vertical,
                }
            }
            TrajectoryConfig::Sinusoids { offset, terms } => {
                for (k, term) in terms.iter().enumerate() {
                    if term.component >= n {
                        return Err(Error::config(
                            format!("formation.trajectory.terms[{k}].component"),
                            "component exceeds dimension",
                        ));
                    }
                }
                GlobalTrajectory::Sinusoids {
                    offset: vector(offset, n, "formation.trajectory.offset")?,
                    terms: terms.clone(),
                }
            }
        };
        let mut keyframes = Vec::with_capacity(f.keyframes.len());
        for (k, kf) in f.keyframes.iter().enumerate() {
            let path = format!("formation.keyframes[{k}]");
            self.check_grid(kf.time, &format!("{path}.time"))?;
            let offsets = match (&kf.shape, &kf.offsets) {
                (Some(shape), None) => shape
                    .offsets(agents, n, f.radius)
                    .map_err(|e| match e {
                        Error::Config { message, .. } => Error::config(format!("{path}.shape"), message),
                        other => other,
                    })?,
                (None, Some(raw)) => vectors(raw, agents, n, &format!("{path}.offsets"))?,
                _ => return Err(Error::config(path, "give exactly one of shape or offsets")),
            };
            keyframes.push(Keyframe { time: kf.time, offsets });
        }
        let schedule = OffsetSchedule::new(keyframes, f.transition_window, f.oscillations.clone())?;
        FormationPlan::new(global, schedule)
    }

    fn build_initial(&self, plan: &FormationPlan) -> Result<Vec<AgentState>> {
        let agents = plan.agent_count();
        let n = self.dimension;
        match &self.initial {
            InitialConfig::OnFormation => Ok(plan
                .desired_states(0.0)
                .into_iter()
                .map(|k| AgentState::new(k.position, k.velocity))
                .collect()),
            InitialConfig::Explicit { positions, velocities } => {
                let pos = vectors(positions, agents, n, "initial.positions")?;
                let vel = match velocities {
                    Some(v) => vectors(v, agents, n, "initial.velocities")?,
                    None => vec![Vector::zeros(n); agents],
                };
                Ok(pos.into_iter().zip(vel).map(|(p, v)| AgentState::new(p, v)).collect())
            }
        }
    }

    fn build_gains(&self, agents: usize) -> Result<ControllerGains> {
        let g = &self.gains;
        let n = self.dimension;
        let mut gains = ControllerGains::uniform(agents, n, g.kappa_f, g.kappa_g, g.sigma);
        gains.kappa_g_lower = vec![g.kappa_g_lower; agents];
        gains.kappa_g_upper = vec![g.kappa_g_upper.unwrap_or(g.kappa_g); agents];
        for (k, o) in g.overrides.iter().enumerate() {
            if o.agent >= agents {
                return Err(Error::config(format!("gains.overrides[{k}].agent"), "agent out of range"));
            }
            let i = o.agent;
            if let Some(v) = o.kappa_g {
                gains.kappa_g[i] = v;
            }
            if let Some(v) = o.sigma {
                gains.sigma_f[i] = Matrix::identity(n, n) * v;
            }
            if let Some(v) = o.kappa_g_lower {
                gains.kappa_g_lower[i] = v;
            }
            if let Some(v) = o.kappa_g_upper {
                gains.kappa_g_upper[i] = v;
            }
        }
        gains.validate(agents, n)?;
        Ok(gains)
    }

    fn build_attacks(&self, agents: usize) -> Result<AttackSchedule> {
        let n = self.dimension;
        let mut specs = Vec::with_capacity(self.attacks.len());
        for (k, a) in self.attacks.iter().enumerate() {
            let path = format!("attacks[{k}]");
            self.check_grid(a.start, &format!("{path}.start"))?;
            if let Some(end) = a.end {
                self.check_grid(end, &format!("{path}.end"))?;
            }
            let offset = match &a.bias {
                Some(b) => vector(b, n, &format!("{path}.bias"))?,
                None => Vector::zeros(n),
            };
            for (m, term) in a.bias_terms.iter().enumerate() {
                if term.component >= n {
                    return Err(Error::config(
                        format!("{path}.bias_terms[{m}].component"),
                        "component exceeds dimension",
                    ));
                }
            }
            if a.mode == AttackMode::Unstable && (a.bias.is_some() || !a.bias_terms.is_empty()) {
                return Err(Error::config(path, "unstable attacks take no bias"));
            }
            let bias = if a.bias_terms.is_empty() {
                Bias::Constant(offset)
            } else {
                Bias::Sinusoids {
                    offset,
                    terms: a.bias_terms.clone(),
                }
            };
            specs.push(AttackSpec {
                agent: a.agent,
                mode: a.mode,
                delta: a.delta.unwrap_or(1.0),
                bias,
                c_a: a.c_a,
                start: a.start,
                end: a.end.unwrap_or(f64::INFINITY),
            });
        }
        AttackSchedule::new(specs, agents, n)
    }

    fn build_noise(&self) -> Result<NoiseConfig> {
        let n = self.dimension;
        let s = &self.noise;
        let channel = |std: f64, path: &str| {
            if !(std >= 0.0) || !std.is_finite() {
                return Err(Error::config(path, "standard deviation must be finite and nonnegative"));
            }
            GaussianNoise::new(Matrix::identity(n, n) * (std * std))
        };
        Ok(NoiseConfig {
            velocity: channel(s.velocity_std, "noise.velocity_std")?,
            gps: channel(s.gps_std, "noise.gps_std")?,
            relative: channel(s.relative_std, "noise.relative_std")?,
            seed: s.seed,
        })
    }
}

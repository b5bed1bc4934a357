//! Formation-tracking performance index and restoration measures.

use serde::{Deserialize, Serialize};

use crate::graph::SensoryGraph;
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// `ϑ`.
    pub theta: f64,
    /// `α`, weight on the global tracking error.
    pub alpha: f64,
    /// Recovery threshold: recovered once `I ≥ 1 − ε_r`.
    #[serde(default = "default_epsilon")]
    pub epsilon_r: f64,
    /// Seconds the index must stay recovered.
    #[serde(default = "default_hold")]
    pub hold: f64,
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_hold() -> f64 {
    1.0
}

impl MetricsConfig {
    pub fn new(theta: f64, alpha: f64) -> Self {
        Self {
            theta,
            alpha,
            epsilon_r: default_epsilon(),
            hold: default_hold(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) || !self.theta.is_finite() {
            return Err(Error::config("metrics.theta", "must be positive"));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::config("metrics.alpha", "must be positive"));
        }
        if !(self.epsilon_r > 0.0 && self.epsilon_r < 1.0) {
            return Err(Error::config("metrics.epsilon_r", "must lie in (0, 1)"));
        }
        if !(self.hold >= 0.0) || !self.hold.is_finite() {
            return Err(Error::config("metrics.hold", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Per-step error summary.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSample {
    pub t: f64,
    /// `‖x̃_i‖`.
    pub global_error: Vec<f64>,
    /// `‖ē_i‖`, the unweighted neighbor-mean error.
    pub local_error: Vec<f64>,
    pub index: f64,
}

/// `(ϑ + Σ‖ē‖) / (ϑ + Σ‖ē‖ + α Σ‖x̃‖)` from the summed norms.
pub fn index_from_sums(local_sum: f64, global_sum: f64, config: &MetricsConfig) -> f64 {
    let num = config.theta + local_sum;
    num / (num + config.alpha * global_sum)
}

/// Evaluates the index from the global tracking errors `x̃_i`.
///
/// The local term ignores the graph weights: `ē_i = Σ_{j∈N_i}(x̃_i − x̃_j) / n_i`.
pub fn performance_index(t: f64, errors: &[Vector], graph: &SensoryGraph, config: &MetricsConfig) -> MetricsSample {
    let global_error: Vec<f64> = errors.iter().map(|e| e.norm()).collect();
    let local_error: Vec<f64> = (0..errors.len())
        .map(|i| {
            let nbrs = graph.neighbors(i);
            let mut sum = Vector::zeros(errors[i].len());
            for &j in nbrs {
                sum += &errors[i] - &errors[j];
            }
            sum.norm() / nbrs.len() as f64
        })
        .collect();
    let index = index_from_sums(local_error.iter().sum(), global_error.iter().sum(), config);
    MetricsSample {
        t,
        global_error,
        local_error,
        index,
    }
}

/// Trapezoidal integral of uniformly spaced samples.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dt * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// An index series on a uniform grid starting at `t0`.
#[derive(Debug, Clone, Copy)]
pub struct Series<'a> {
    pub t0: f64,
    pub dt: f64,
    pub values: &'a [f64],
}

impl<'a> Series<'a> {
    pub fn new(t0: f64, dt: f64, values: &'a [f64]) -> Self {
        Self { t0, dt, values }
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Index of the grid point at `t`, if `t` lies within the series.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if self.values.is_empty() || !(self.dt > 0.0) {
            return None;
        }
        let k = ((t - self.t0) / self.dt).round();
        let tol = 1e-6 * self.dt;
        if k < 0.0 || (t - self.time(k as usize)).abs() > tol || k as usize >= self.values.len() {
            return None;
        }
        Some(k as usize)
    }
}

/// Restoration result. `recovery` is `None` and `value` infinite when the
/// index never recovers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Restoration {
    pub value: f64,
    pub recovery: Option<f64>,
}

impl Restoration {
    pub fn recovered(&self) -> bool {
        self.recovery.is_some()
    }
}

/// `R_s = ∫_{t_a}^{t_r} (1 − I) dτ`.
///
/// `t_r` is the first grid time from which `I ≥ 1 − ε_r` holds for
/// `config.hold` seconds, searched from the first post-attack sample below
/// `1 − ε_r`. An index that never dips gives `t_r = t_a`.
pub fn restoration(series: Series<'_>, t_a: f64, config: &MetricsConfig) -> Result<Restoration> {
    let start = series
        .locate(t_a)
        .ok_or_else(|| Error::Argument(format!("attack time {t_a} is outside the series")))?;
    let threshold = 1.0 - config.epsilon_r;
    let hold_steps = (config.hold / series.dt - 1e-9).ceil().max(0.0) as usize;
    let values = series.values;
    let Some(dip) = values[start..].iter().position(|&v| v < threshold) else {
        return Ok(Restoration {
            value: 0.0,
            recovery: Some(t_a),
        });
    };
    let mut run_start: Option<usize> = None;
    for k in start + dip..values.len() {
        if values[k] >= threshold {
            let s = *run_start.get_or_insert(k);
            if k - s >= hold_steps {
                let deficit: Vec<f64> = values[start..=s].iter().map(|v| 1.0 - v).collect();
                return Ok(Restoration {
                    value: trapezoid(&deficit, series.dt),
                    recovery: Some(series.time(s)),
                });
            }
        } else {
            run_start = None;
        }
    }
    Ok(Restoration {
        value: f64::INFINITY,
        recovery: None,
    })
}

/// `∫(Nor − Att) / ∫ Nor` over `[t_a, t_s]`.
pub fn modified_restoration(reference: Series<'_>, attacked: Series<'_>, t_a: f64, t_s: f64) -> Result<f64> {
    if (reference.dt - attacked.dt).abs() > 1e-12 || (reference.t0 - attacked.t0).abs() > 1e-9 {
        return Err(Error::Argument("reference and attacked series use different grids".into()));
    }
    if !(t_s > t_a) {
        return Err(Error::Argument("window end must follow its start".into()));
    }
    let locate = |s: &Series<'_>, t: f64| {
        s.locate(t)
            .ok_or_else(|| Error::Argument(format!("time {t} is outside the series")))
    };
    let (a0, a1) = (locate(&reference, t_a)?, locate(&reference, t_s)?);
    let (b0, b1) = (locate(&attacked, t_a)?, locate(&attacked, t_s)?);
    debug_assert_eq!((a0, a1), (b0, b1));
    let nor = &reference.values[a0..=a1];
    let att = &attacked.values[b0..=b1];
    let diff: Vec<f64> = nor.iter().zip(att).map(|(n, a)| n - a).collect();
    let denom = trapezoid(nor, reference.dt);
    if denom == 0.0 {
        return Err(Error::Argument("reference index integrates to zero".into()));
    }
    Ok(trapezoid(&diff, reference.dt) / denom)
}

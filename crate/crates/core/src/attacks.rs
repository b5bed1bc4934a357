//! Deception attacks on the global positioning signal.

use serde::{Deserialize, Serialize};

use crate::formation::SinusoidTerm;
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    None,
    /// `x̂ = x + Δ`.
    Additive,
    /// `x̂ = δx + Δ` with `δ ≠ 1`.
    Hybrid,
    /// `x̂ = δx − c_a ξ`.
    Unstable,
}

/// Additive bias `Δ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Bias {
    Constant(Vector),
    Sinusoids { offset: Vector, terms: Vec<SinusoidTerm> },
}

impl Bias {
    pub fn zero(dimension: usize) -> Self {
        Bias::Constant(Vector::zeros(dimension))
    }

    pub fn dimension(&self) -> usize {
        match self {
            Bias::Constant(v) => v.len(),
            Bias::Sinusoids { offset, .. } => offset.len(),
        }
    }

    pub fn eval(&self, t: f64) -> Vector {
        match self {
            Bias::Constant(v) => v.clone(),
            Bias::Sinusoids { offset, terms } => {
                let mut v = offset.clone();
                for term in terms {
                    v[term.component] += term.amplitude * (term.omega * t + term.phase).sin();
                }
                v
            }
        }
    }
}

/// An attack on one agent, active on the half-open window `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub agent: usize,
    pub mode: AttackMode,
    pub delta: f64,
    pub bias: Bias,
    pub c_a: f64,
    pub start: f64,
    pub end: f64,
}

impl AttackSpec {
    pub fn additive(agent: usize, bias: Vector, start: f64, end: f64) -> Self {
        Self {
            agent,
            mode: AttackMode::Additive,
            delta: 1.0,
            bias: Bias::Constant(bias),
            c_a: 0.0,
            start,
            end,
        }
    }

    pub fn hybrid(agent: usize, delta: f64, bias: Vector, start: f64, end: f64) -> Self {
        Self {
            agent,
            mode: AttackMode::Hybrid,
            delta,
            bias: Bias::Constant(bias),
            c_a: 0.0,
            start,
            end,
        }
    }

    pub fn unstable(agent: usize, delta: f64, c_a: f64, dimension: usize, start: f64, end: f64) -> Self {
        Self {
            agent,
            mode: AttackMode::Unstable,
            delta,
            bias: Bias::zero(dimension),
            c_a,
            start,
            end,
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.mode != AttackMode::None && self.start <= t && t < self.end
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !(self.start >= 0.0) || !(self.end > self.start) {
            return Err(Error::config(path, "window must satisfy 0 <= start < end"));
        }
        if !self.delta.is_finite() || !self.c_a.is_finite() {
            return Err(Error::config(path, "delta and c_a must be finite"));
        }
        match self.mode {
            AttackMode::Additive if self.delta != 1.0 => {
                Err(Error::config(path, "additive attacks have delta = 1"))
            }
            AttackMode::Hybrid if self.delta == 1.0 => {
                Err(Error::config(path, "hybrid attacks need delta != 1"))
            }
            _ => Ok(()),
        }
    }
}

/// Compromised positioning for `spec.agent` at `t`. `composite` is the
/// agent's true `ξ_i`; the attacker is assumed to know it.
pub fn apply_attack(spec: &AttackSpec, position: &Vector, composite: &Vector, t: f64) -> Vector {
    if !spec.is_active(t) {
        return position.clone();
    }
    match spec.mode {
        AttackMode::None => position.clone(),
        AttackMode::Additive | AttackMode::Hybrid => position * spec.delta + spec.bias.eval(t),
        AttackMode::Unstable => position * spec.delta - composite * spec.c_a,
    }
}

/// A validated attack list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackSchedule {
    attacks: Vec<AttackSpec>,
}

impl AttackSchedule {
    pub fn new(attacks: Vec<AttackSpec>, agent_count: usize, dimension: usize) -> Result<Self> {
        for (k, a) in attacks.iter().enumerate() {
            let path = format!("attacks[{k}]");
            if a.agent >= agent_count {
                return Err(Error::config(path, format!("agent {} out of range", a.agent)));
            }
            if a.bias.dimension() != dimension {
                return Err(Error::config(path, "bias dimension mismatch"));
            }
            a.validate(&path)?;
            for b in &attacks[..k] {
                if b.agent == a.agent && a.start < b.end && b.start < a.end {
                    return Err(Error::config(path, "overlapping windows on the same agent"));
                }
            }
        }
        Ok(Self { attacks })
    }

    pub fn attacks(&self) -> &[AttackSpec] {
        &self.attacks
    }

    pub fn is_empty(&self) -> bool {
        self.attacks.is_empty()
    }

    /// Earliest onset, if any attack is scheduled.
    pub fn first_onset(&self) -> Option<f64> {
        self.attacks.iter().map(|a| a.start).min_by(f64::total_cmp)
    }

    pub fn active_for(&self, agent: usize, t: f64) -> Option<&AttackSpec> {
        self.attacks.iter().find(|a| a.agent == agent && a.is_active(t))
    }

    /// Positioning delivered to `agent`.
    pub fn corrupt(&self, agent: usize, position: &Vector, composite: &Vector, t: f64) -> Vector {
        match self.active_for(agent, t) {
            Some(spec) => apply_attack(spec, position, composite, t),
            None => position.clone(),
        }
    }
}

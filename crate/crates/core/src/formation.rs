//! Desired trajectories: the formation center `h^d(t)`, per-agent offsets
//! `h̄_i^d(t)`, and their analytic first and second time derivatives.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vector};

/// Position, velocity and acceleration of a desired signal at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub position: Vector,
    pub velocity: Vector,
    pub acceleration: Vector,
}

impl Kinematics {
    pub fn zeros(dimension: usize) -> Self {
        Self {
            position: Vector::zeros(dimension),
            velocity: Vector::zeros(dimension),
            acceleration: Vector::zeros(dimension),
        }
    }

    fn add_assign(&mut self, other: &Kinematics) {
        self.position += &other.position;
        self.velocity += &other.velocity;
        self.acceleration += &other.acceleration;
    }
}

/// `amplitude · sin(omega · t + phase)` on one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinusoidTerm {
    pub component: usize,
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

impl SinusoidTerm {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let arg = self.omega * t + self.phase;
        let (s, c) = arg.sin_cos();
        (
            self.amplitude * s,
            self.amplitude * self.omega * c,
            -self.amplitude * self.omega * self.omega * s,
        )
    }
}

/// Global trajectory of the formation center.
#[derive(Debug, Clone, PartialEq)]
pub enum GlobalTrajectory {
    /// Stationary point.
    Constant(Vector),
    /// `x = ax·sin(ωt)/(cos(ωt) − 3)`, `y = ay·cos(ωt/2)/(cos(ωt) − 3)` and,
    /// in 3-D, `z = az·cos(ωt) + z0`.
    Lemniscate {
        ax: f64,
        ay: f64,
        omega: f64,
        vertical: Option<(f64, f64)>,
    },
    /// Constant offset plus a sum of sinusoids.
    Sinusoids { offset: Vector, terms: Vec<SinusoidTerm> },
}

impl GlobalTrajectory {
    /// Planar lemniscate with a 15 s period used in the simulation studies.
    pub fn planar_lemniscate() -> Self {
        GlobalTrajectory::Lemniscate {
            ax: -2.5,
            ay: -2.4,
            omega: 2.0 * std::f64::consts::PI / 15.0,
            vertical: None,
        }
    }

    /// Lemniscate with an oscillating altitude used for flying agents.
    pub fn spatial_lemniscate() -> Self {
        GlobalTrajectory::Lemniscate {
            ax: 1.3,
            ay: -1.2,
            omega: 2.0 * std::f64::consts::PI / 15.0,
            vertical: Some((0.2, 0.7)),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            GlobalTrajectory::Constant(p) => p.len(),
            GlobalTrajectory::Lemniscate { vertical, .. } => {
                if vertical.is_some() {
                    3
                } else {
                    2
                }
            }
            GlobalTrajectory::Sinusoids { offset, .. } => offset.len(),
        }
    }

    pub fn eval(&self, t: f64) -> Kinematics {
        let n = self.dimension();
        match self {
            GlobalTrajectory::Constant(p) => Kinematics {
                position: p.clone(),
                velocity: Vector::zeros(n),
                acceleration: Vector::zeros(n),
            },
            GlobalTrajectory::Lemniscate {
                ax,
                ay,
                omega,
                vertical,
            } => {
                let w = *omega;
                let (s, c) = (w * t).sin_cos();
                // Common denominator d = cos(ωt) − 3 and its derivatives.
                let d = (c - 3.0, -w * s, -w * w * c);
                let x = quotient((ax * s, ax * w * c, -ax * w * w * s), d);
                let (sh, ch) = (0.5 * w * t).sin_cos();
                let y = quotient(
                    (ay * ch, -0.5 * w * ay * sh, -0.25 * w * w * ay * ch),
                    d,
                );
                let mut k = Kinematics::zeros(n);
                for (i, comp) in [x, y].into_iter().enumerate() {
                    k.position[i] = comp.0;
                    k.velocity[i] = comp.1;
                    k.acceleration[i] = comp.2;
                }
                if let Some((az, z0)) = vertical {
                    k.position[2] = az * c + z0;
                    k.velocity[2] = -az * w * s;
                    k.acceleration[2] = -az * w * w * c;
                }
                k
            }
            GlobalTrajectory::Sinusoids { offset, terms } => {
                let mut k = Kinematics {
                    position: offset.clone(),
                    velocity: Vector::zeros(n),
                    acceleration: Vector::zeros(n),
                };
                for term in terms {
                    let (p, v, a) = term.eval(t);
                    k.position[term.component] += p;
                    k.velocity[term.component] += v;
                    k.acceleration[term.component] += a;
                }
                k
            }
        }
    }
}

/// Value, first and second derivative of `num / den`.
fn quotient(num: (f64, f64, f64), den: (f64, f64, f64)) -> (f64, f64, f64) {
    let q = num.0 / den.0;
    let dq = (num.1 - q * den.1) / den.0;
    let ddq = (num.2 - 2.0 * dq * den.1 - q * den.2) / den.0;
    (q, dq, ddq)
}

/// Quintic smoothstep `10s³ − 15s⁴ + 6s⁵` and its first two derivatives in `s`.
fn smoothstep(s: f64) -> (f64, f64, f64) {
    let s = s.clamp(0.0, 1.0);
    let s2 = s * s;
    (
        s2 * s * (10.0 - 15.0 * s + 6.0 * s2),
        30.0 * s2 * (1.0 - 2.0 * s + s2),
        60.0 * s * (1.0 - 3.0 * s + 2.0 * s2),
    )
}

/// Offsets of every agent that must be reached exactly at `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub time: f64,
    pub offsets: Vec<Vector>,
}

/// Per-agent sinusoid `amplitude·sin(omega·t + phase + (i+1)·phase_per_agent)`,
/// with `i` the 0-based agent index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oscillation {
    pub component: usize,
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub phase_per_agent: f64,
}

/// Piecewise-keyframe offsets blended with a quintic smoothstep over a fixed
/// transition window ending at each keyframe, plus per-agent oscillations.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetSchedule {
    keyframes: Vec<Keyframe>,
    transition_window: f64,
    oscillations: Vec<Oscillation>,
}

impl OffsetSchedule {
    pub fn new(
        keyframes: Vec<Keyframe>,
        transition_window: f64,
        oscillations: Vec<Oscillation>,
    ) -> Result<Self> {
        let first = keyframes
            .first()
            .ok_or_else(|| Error::config("formation.keyframes", "at least one keyframe required"))?;
        let agents = first.offsets.len();
        let dim = first.offsets.first().map_or(0, |v| v.len());
        if agents == 0 || dim == 0 {
            return Err(Error::config("formation.keyframes[0]", "empty offsets"));
        }
        for (k, kf) in keyframes.iter().enumerate() {
            let path = format!("formation.keyframes[{k}]");
            if !kf.time.is_finite() || kf.time < 0.0 {
                return Err(Error::config(path, "time must be finite and nonnegative"));
            }
            if k > 0 && kf.time <= keyframes[k - 1].time {
                return Err(Error::config(path, "keyframe times must be strictly increasing"));
            }
            if kf.offsets.len() != agents || kf.offsets.iter().any(|o| o.len() != dim) {
                return Err(Error::config(path, "inconsistent agent count or dimension"));
            }
        }
        if !(transition_window > 0.0) {
            return Err(Error::config("formation.transition_window", "must be positive"));
        }
        for (k, osc) in oscillations.iter().enumerate() {
            if osc.component >= dim {
                return Err(Error::config(
                    format!("formation.oscillations[{k}].component"),
                    "component exceeds dimension",
                ));
            }
        }
        Ok(Self {
            keyframes,
            transition_window,
            oscillations,
        })
    }

    /// Constant offsets with no transitions.
    pub fn fixed(offsets: Vec<Vector>) -> Result<Self> {
        Self::new(vec![Keyframe { time: 0.0, offsets }], 1.0, Vec::new())
    }

    pub fn agent_count(&self) -> usize {
        self.keyframes[0].offsets.len()
    }

    pub fn dimension(&self) -> usize {
        self.keyframes[0].offsets[0].len()
    }

    pub fn keyframes(&self) -> &[Keyframe] {
        &self.keyframes
    }

    pub fn eval(&self, agent: usize, t: f64) -> Kinematics {
        let mut k = self.keyframe_part(agent, t);
        for osc in &self.oscillations {
            let term = SinusoidTerm {
                component: osc.component,
                amplitude: osc.amplitude,
                omega: osc.omega,
                phase: osc.phase + (agent as f64 + 1.0) * osc.phase_per_agent,
            };
            let (p, v, a) = term.eval(t);
            k.position[osc.component] += p;
            k.velocity[osc.component] += v;
            k.acceleration[osc.component] += a;
        }
        k
    }

    fn keyframe_part(&self, agent: usize, t: f64) -> Kinematics {
        let n = self.dimension();
        let hold = |kf: &Keyframe| Kinematics {
            position: kf.offsets[agent].clone(),
            velocity: Vector::zeros(n),
            acceleration: Vector::zeros(n),
        };
        let next = self.keyframes.partition_point(|kf| kf.time <= t);
        if next == 0 {
            return hold(&self.keyframes[0]);
        }
        if next == self.keyframes.len() {
            return hold(&self.keyframes[next - 1]);
        }
        let (from, to) = (&self.keyframes[next - 1], &self.keyframes[next]);
        let window = self.transition_window.min(to.time - from.time);
        let start = to.time - window;
        if t <= start {
            return hold(from);
        }
        let (s, ds, dds) = smoothstep((t - start) / window);
        let delta = &to.offsets[agent] - &from.offsets[agent];
        Kinematics {
            position: &from.offsets[agent] + &delta * s,
            velocity: &delta * (ds / window),
            acceleration: &delta * (dds / (window * window)),
        }
    }
}

/// Built-in horizontal shapes for six agents with unit circumradius, listed in
/// ring order so that ring neighbors stay adjacent on the perimeter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Hexagon,
    Rectangle,
    Triangle,
}

impl Shape {
    /// Planar vertices scaled by `radius`, padded with zeros up to `dimension`.
    pub fn offsets(self, agent_count: usize, dimension: usize, radius: f64) -> Result<Vec<Vector>> {
        if agent_count != 6 {
            return Err(Error::config(
                "formation.keyframes.shape",
                "built-in shapes are defined for six agents; give explicit offsets instead",
            ));
        }
        if dimension < 2 {
            return Err(Error::config("formation.dimension", "must be 2 or 3"));
        }
        let deg = |a: f64| {
            let r = a.to_radians();
            [r.cos(), r.sin()]
        };
        let planar: Vec<[f64; 2]> = match self {
            Shape::Hexagon => (0..6).map(|i| deg(60.0 * i as f64)).collect(),
            Shape::Rectangle => vec![
                [0.8, 0.6],
                [0.0, 0.6],
                [-0.8, 0.6],
                [-0.8, -0.6],
                [0.0, -0.6],
                [0.8, -0.6],
            ],
            Shape::Triangle => {
                let v = [deg(90.0), deg(210.0), deg(330.0)];
                let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                vec![
                    v[0],
                    mid(v[0], v[1]),
                    v[1],
                    mid(v[1], v[2]),
                    v[2],
                    mid(v[2], v[0]),
                ]
            }
        };
        Ok(planar
            .into_iter()
            .map(|p| {
                let mut v = Vector::zeros(dimension);
                v[0] = radius * p[0];
                v[1] = radius * p[1];
                v
            })
            .collect())
    }
}

/// Complete desired-motion description of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationPlan {
    global: GlobalTrajectory,
    offsets: OffsetSchedule,
}

impl FormationPlan {
    pub fn new(global: GlobalTrajectory, offsets: OffsetSchedule) -> Result<Self> {
        if global.dimension() != offsets.dimension() {
            return Err(Error::config(
                "formation",
                format!(
                    "trajectory dimension {} differs from offset dimension {}",
                    global.dimension(),
                    offsets.dimension()
                ),
            ));
        }
        if !(2..=3).contains(&global.dimension()) {
            return Err(Error::config("formation.dimension", "must be 2 or 3"));
        }
        Ok(Self { global, offsets })
    }

    pub fn dimension(&self) -> usize {
        self.global.dimension()
    }

    pub fn agent_count(&self) -> usize {
        self.offsets.agent_count()
    }

    pub fn global(&self) -> &GlobalTrajectory {
        &self.global
    }

    pub fn offsets(&self) -> &OffsetSchedule {
        &self.offsets
    }

    /// `h_i^d = h^d + h̄_i^d` with its derivatives.
    pub fn desired_state(&self, agent: usize, t: f64) -> Kinematics {
        let mut k = self.global.eval(t);
        k.add_assign(&self.offsets.eval(agent, t));
        k
    }

    /// All agents' desired states at `t`.
    pub fn desired_states(&self, t: f64) -> Vec<Kinematics> {
        let center = self.global.eval(t);
        (0..self.agent_count())
            .map(|i| {
                let mut k = center.clone();
                k.add_assign(&self.offsets.eval(i, t));
                k
            })
            .collect()
    }

    /// `(h_ji^d, ḣ_ji^d)` with `h_ji^d = h_i^d − h_j^d`.
    pub fn desired_displacement(&self, i: usize, j: usize, t: f64) -> (Vector, Vector) {
        debug_assert_ne!(i, j, "displacement to self is undefined");
        let a = self.desired_state(i, t);
        let b = self.desired_state(j, t);
        (a.position - b.position, a.velocity - b.velocity)
    }
}

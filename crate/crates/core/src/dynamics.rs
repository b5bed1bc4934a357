//! Ground-truth double-integrator dynamics and sensor synthesis.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::graph::SensoryGraph;
use crate::{Error, Matrix, Result, Vector};

/// True position and velocity of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub position: Vector,
    pub velocity: Vector,
}

impl AgentState {
    pub fn new(position: Vector, velocity: Vector) -> Self {
        Self { position, velocity }
    }

    pub fn at_rest(position: Vector) -> Self {
        let n = position.len();
        Self {
            position,
            velocity: Vector::zeros(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|v| v.is_finite())
    }
}

/// One classical Runge–Kutta step of `ẏ = f(t, y)`.
pub fn rk4<F>(f: F, t: f64, y: &[f64], dt: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> {
        a.iter().zip(b).map(|(x, d)| x + s * d).collect()
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, &axpy(y, 0.5 * dt, &k1));
    let k3 = f(t + 0.5 * dt, &axpy(y, 0.5 * dt, &k2));
    let k4 = f(t + dt, &axpy(y, dt, &k3));
    y.iter()
        .enumerate()
        .map(|(i, yi)| yi + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Advances every agent by one step of `ẍ_i = u_i` with the input held over
/// the step. `t` is only used to report divergence.
pub fn step(states: &[AgentState], inputs: &[Vector], dt: f64, t: f64) -> Result<Vec<AgentState>> {
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("time step must be positive, got {dt}")));
    }
    if states.len() != inputs.len() {
        return Err(Error::Argument("one input per agent required".into()));
    }
    states
        .iter()
        .zip(inputs)
        .enumerate()
        .map(|(agent, (s, u))| {
            if !s.is_finite() || u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { agent, time: t });
            }
            let n = s.position.len();
            let y: Vec<f64> = s.position.iter().chain(s.velocity.iter()).copied().collect();
            let y = rk4(
                |_, y| y[n..].iter().copied().chain(u.iter().copied()).collect(),
                t,
                &y,
                dt,
            );
            let next = AgentState {
                position: Vector::from_column_slice(&y[..n]),
                velocity: Vector::from_column_slice(&y[n..]),
            };
            if next.is_finite() {
                Ok(next)
            } else {
                Err(Error::Diverged { agent, time: t + dt })
            }
        })
        .collect()
}

/// Zero-mean Gaussian channel with a fixed covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNoise {
    covariance: Matrix,
    factor: Option<Matrix>,
}

impl GaussianNoise {
    /// Fails unless the covariance is symmetric positive semidefinite.
    pub fn new(covariance: Matrix) -> Result<Self> {
        let n = covariance.nrows();
        if covariance.ncols() != n || covariance != covariance.transpose() {
            return Err(Error::config("noise", "covariance must be square and symmetric"));
        }
        if covariance.iter().all(|&v| v == 0.0) {
            return Ok(Self {
                covariance,
                factor: None,
            });
        }
        let eig = covariance.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l < -1e-12) {
            return Err(Error::config("noise", "covariance must be positive semidefinite"));
        }
        let sqrt = Matrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        let factor = &eig.eigenvectors * sqrt;
        Ok(Self {
            covariance,
            factor: Some(factor),
        })
    }

    pub fn zero(dimension: usize) -> Self {
        Self {
            covariance: Matrix::zeros(dimension, dimension),
            factor: None,
        }
    }

    /// `σ² I`.
    pub fn isotropic(dimension: usize, std_dev: f64) -> Self {
        Self::new(Matrix::identity(dimension, dimension) * (std_dev * std_dev))
            .expect("isotropic covariance is PSD")
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn is_zero(&self) -> bool {
        self.factor.is_none()
    }

    /// Adds a sample in place. A zero channel consumes no randomness.
    pub fn perturb<R: Rng + ?Sized>(&self, value: &mut Vector, rng: &mut R) {
        if let Some(factor) = &self.factor {
            let z = Vector::from_fn(value.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            *value += factor * z;
        }
    }
}

/// Sensor noise on each channel. Relative velocities use the velocity channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub velocity: GaussianNoise,
    pub gps: GaussianNoise,
    pub relative: GaussianNoise,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn noiseless(dimension: usize, seed: u64) -> Self {
        Self {
            velocity: GaussianNoise::zero(dimension),
            gps: GaussianNoise::zero(dimension),
            relative: GaussianNoise::zero(dimension),
            seed,
        }
    }
}

/// Agent `i`'s reading of neighbor `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeMeasurement {
    pub neighbor: usize,
    /// `r_ji = x_i − x_j`.
    pub displacement: Vector,
    /// `ṙ_ji`.
    pub velocity: Vector,
}

/// Everything agent `i` senses at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub velocity: Vector,
    /// Uncorrupted global positioning `x_i^g`, before any attack.
    pub gps: Vector,
    /// One entry per neighbor, in ascending neighbor order.
    pub relative: Vec<RelativeMeasurement>,
}

impl Measurements {
    pub fn relative_to(&self, neighbor: usize) -> Option<&RelativeMeasurement> {
        self.relative.iter().find(|r| r.neighbor == neighbor)
    }
}

/// Synthesizes every agent's measurements. Draw order is fixed (agent by
/// agent: velocity, positioning, then each neighbor's displacement and
/// velocity) so a seed determines the whole stream.
pub fn measure<R: Rng + ?Sized>(
    states: &[AgentState],
    graph: &SensoryGraph,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Vec<Measurements> {
    states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut velocity = s.velocity.clone();
            noise.velocity.perturb(&mut velocity, rng);
            let mut gps = s.position.clone();
            noise.gps.perturb(&mut gps, rng);
            let relative = graph
                .neighbors(i)
                .iter()
                .map(|&j| {
                    let mut displacement = &s.position - &states[j].position;
                    noise.relative.perturb(&mut displacement, rng);
                    let mut rel_vel = &s.velocity - &states[j].velocity;
                    noise.velocity.perturb(&mut rel_vel, rng);
                    RelativeMeasurement {
                        neighbor: j,
                        displacement,
                        velocity: rel_vel,
                    }
                })
                .collect();
            Measurements {
                velocity,
                gps,
                relative,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn coasting_is_exact() {
        let s = AgentState::new(v(&[1.0, -2.0]), v(&[0.5, 0.25]));
        let next = step(&[s], &[v(&[0.0, 0.0])], 0.01, 0.0).unwrap();
        assert_eq!(next[0].position, v(&[1.0 + 0.5 * 0.01, -2.0 + 0.25 * 0.01]));
        assert_eq!(next[0].velocity, v(&[0.5, 0.25]));
    }

    #[test]
    fn uniform_acceleration_matches_closed_form() {
        let a = v(&[0.7, -1.3, 2.0]);
        let mut states = vec![AgentState::at_rest(Vector::zeros(3))];
        let dt = 0.01;
        for k in 0..100 {
            states = step(&states, &[a.clone()], dt, k as f64 * dt).unwrap();
        }
        for c in 0..3 {
            assert_abs_diff_eq!(states[0].position[c], 0.5 * a[c], epsilon = 1e-9);
            assert_abs_diff_eq!(states[0].velocity[c], a[c], epsilon = 1e-9);
        }
    }

    #[test]
    fn rk4_is_fourth_order_on_exponential() {
        // ẏ = y from 1 over one unit: error shrinks ~16x when dt halves.
        let run = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut y = vec![1.0];
            for k in 0..n {
                y = rk4(|_, y| vec![y[0]], k as f64 * dt, &y, dt);
            }
            (y[0] - std::f64::consts::E).abs()
        };
        let ratio = run(10) / run(20);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn non_finite_state_diverges() {
        let s = AgentState::new(v(&[f64::NAN, 0.0]), v(&[0.0, 0.0]));
        let ok = AgentState::at_rest(v(&[0.0, 0.0]));
        let err = step(&[ok, s], &[v(&[0.0, 0.0]), v(&[0.0, 0.0])], 0.01, 3.0).unwrap_err();
        assert!(matches!(err, Error::Diverged { agent: 1, time } if time == 3.0));
        let err = step(
            &[AgentState::at_rest(v(&[0.0]))],
            &[v(&[f64::INFINITY])],
            0.01,
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Diverged { agent: 0, .. }));
        assert!(step(&[], &[], 0.0, 0.0).is_err());
    }

    fn path3() -> SensoryGraph {
        SensoryGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn noiseless_relative_measurements() {
        let states = vec![
            AgentState::at_rest(v(&[0.0, 0.0])),
            AgentState::at_rest(v(&[1.0, 0.0])),
            AgentState::at_rest(v(&[1.0, 2.0])),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = measure(&states, &path3(), &NoiseConfig::noiseless(2, 0), &mut rng);
        assert_eq!(m[0].relative_to(1).unwrap().displacement, v(&[-1.0, 0.0]));
        assert!(m[0].relative_to(2).is_none());
        for (i, j, _) in path3().edges() {
            let a = &m[i].relative_to(j).unwrap().displacement;
            let b = &m[j].relative_to(i).unwrap().displacement;
            assert_eq!(a + b, Vector::zeros(2));
            assert_eq!(a.norm(), b.norm());
        }
        assert_eq!(m[2].gps, states[2].position);
    }

    #[test]
    fn seeded_streams_are_identical() {
        let states: Vec<_> = (0..3)
            .map(|i| AgentState::new(v(&[i as f64, 0.5]), v(&[0.1, -0.1 * i as f64])))
            .collect();
        let noise = NoiseConfig {
            velocity: GaussianNoise::isotropic(2, 0.02),
            gps: GaussianNoise::isotropic(2, 5e-4),
            relative: GaussianNoise::isotropic(2, 5e-4),
            seed: 42,
        };
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            (0..5)
                .map(|_| measure(&states, &path3(), &noise, &mut rng))
                .collect::<Vec<_>>()
        };
        let (a, b) = (draw(), draw());
        assert_eq!(a, b);
        assert_ne!(a[0][0].gps, states[0].position);
    }

    #[test]
    fn noise_covariance_is_respected() {
        let cov = Matrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let g = GaussianNoise::new(cov.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40_000;
        let mut acc = Matrix::zeros(2, 2);
        for _ in 0..n {
            let mut x = Vector::zeros(2);
            g.perturb(&mut x, &mut rng);
            acc += &x * x.transpose();
        }
        acc /= n as f64;
        for (a, b) in acc.iter().zip(cov.iter()) {
            assert!((a - b).abs() < 0.1, "{acc}");
        }
        assert!(GaussianNoise::new(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        assert!(GaussianNoise::new(Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
    }
}

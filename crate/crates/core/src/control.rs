//! Formation tracking control law and the quality-driven global gain tuning.

use crate::dynamics::{AgentState, Measurements};
use crate::formation::Kinematics;
use crate::graph::SensoryGraph;
use crate::{Error, Matrix, Result, Vector};

/// Gains of the tracking law.
///
/// `kappa_f` may be zero to run global tracking only, and individual
/// `kappa_g` may be zero to run local tracking only.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub kappa_f: f64,
    pub kappa_g: Vec<f64>,
    pub sigma_f: Vec<Matrix>,
    pub kappa_g_lower: Vec<f64>,
    pub kappa_g_upper: Vec<f64>,
}

impl ControllerGains {
    /// Same gains for every agent; projection bounds are `[0, kappa_g]`.
    pub fn uniform(agent_count: usize, dimension: usize, kappa_f: f64, kappa_g: f64, sigma_f: f64) -> Self {
        Self {
            kappa_f,
            kappa_g: vec![kappa_g; agent_count],
            sigma_f: vec![Matrix::identity(dimension, dimension) * sigma_f; agent_count],
            kappa_g_lower: vec![0.0; agent_count],
            kappa_g_upper: vec![kappa_g; agent_count],
        }
    }

    pub fn validate(&self, agent_count: usize, dimension: usize) -> Result<()> {
        if !(self.kappa_f >= 0.0) || !self.kappa_f.is_finite() {
            return Err(Error::config("gains.kappa_f", "must be finite and nonnegative"));
        }
        for (name, v) in [
            ("kappa_g", &self.kappa_g),
            ("kappa_g_lower", &self.kappa_g_lower),
            ("kappa_g_upper", &self.kappa_g_upper),
        ] {
            if v.len() != agent_count {
                return Err(Error::config(format!("gains.{name}"), "one value per agent required"));
            }
        }
        if self.sigma_f.len() != agent_count {
            return Err(Error::config("gains.sigma_f", "one matrix per agent required"));
        }
        for i in 0..agent_count {
            let (lo, k, hi) = (self.kappa_g_lower[i], self.kappa_g[i], self.kappa_g_upper[i]);
            if !(0.0 <= lo && lo <= k && k <= hi && hi.is_finite()) {
                return Err(Error::config(
                    format!("gains.kappa_g[{i}]"),
                    format!("need 0 <= lower ({lo}) <= kappa_g ({k}) <= upper ({hi})"),
                ));
            }
            let s = &self.sigma_f[i];
            if s.nrows() != dimension || s.ncols() != dimension || s != &s.transpose() {
                return Err(Error::config(
                    format!("gains.sigma_f[{i}]"),
                    "must be a symmetric matrix of the plan dimension",
                ));
            }
            if s.clone().cholesky().is_none() {
                return Err(Error::config(format!("gains.sigma_f[{i}]"), "must be positive definite"));
            }
        }
        Ok(())
    }
}

/// Parameters of `κ̇_g = γ tanh(σ_β (β − χ_β))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningParams {
    pub gamma: f64,
    pub sigma_beta: f64,
    pub chi_beta: f64,
}

impl TuningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.sigma_beta > 0.0) {
            return Err(Error::config("tuning", "gamma and sigma_beta must be positive"));
        }
        if !(self.chi_beta > 0.0 && self.chi_beta <= 1.0) {
            return Err(Error::config("tuning.chi_beta", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Ground-truth tracking errors of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingErrors {
    /// `x̃_i = x_i − h_i^d`.
    pub position: Vector,
    /// `ẋ_i − ḣ_i^d`.
    pub velocity: Vector,
    /// `e_i = Σ_j w_ji (x̃_i − x̃_j)`.
    pub consensus: Vector,
    /// `ξ_i = ẋ̃_i + κ_g,i x̃_i + κ_f e_i`.
    pub composite: Vector,
}

/// Tracking errors of every agent from ground truth.
pub fn tracking_errors(
    states: &[AgentState],
    desired: &[Kinematics],
    graph: &SensoryGraph,
    gains: &ControllerGains,
) -> Vec<TrackingErrors> {
    let pos: Vec<Vector> = states
        .iter()
        .zip(desired)
        .map(|(s, d)| &s.position - &d.position)
        .collect();
    (0..states.len())
        .map(|i| {
            let velocity = &states[i].velocity - &desired[i].velocity;
            let mut consensus = Vector::zeros(pos[i].len());
            for &j in graph.neighbors(i) {
                consensus += (&pos[i] - &pos[j]) * graph.weight(j, i);
            }
            let composite = &velocity + &pos[i] * gains.kappa_g[i] + &consensus * gains.kappa_f;
            TrackingErrors {
                position: pos[i].clone(),
                velocity,
                consensus,
                composite,
            }
        })
        .collect()
}

/// `V_i(ξ_i) = ½ ξ_iᵀ σ_f,i⁻¹ ξ_i`.
pub fn lyapunov(composite: &Vector, sigma_f: &Matrix) -> f64 {
    let chol = sigma_f
        .clone()
        .cholesky()
        .expect("sigma_f is positive definite");
    0.5 * composite.dot(&chol.solve(composite))
}

/// Local term `f_i^l = Σ_j w_ji (ṙ_ji − ḣ_ji^d) + σ_f,i Σ_j w_ji (r_ji − h_ji^d)`.
pub fn local_term(
    measurements: &Measurements,
    desired: &[Kinematics],
    graph: &SensoryGraph,
    gains: &ControllerGains,
    i: usize,
) -> Result<Vector> {
    let n = desired[i].position.len();
    let mut rate = Vector::zeros(n);
    let mut disp = Vector::zeros(n);
    for &j in graph.neighbors(i) {
        let m = measurements.relative_to(j).ok_or_else(|| {
            Error::config(
                format!("measurements[{i}]"),
                format!("missing relative measurement to neighbor {j}"),
            )
        })?;
        let w = graph.weight(j, i);
        let h_ji = &desired[i].position - &desired[j].position;
        let hdot_ji = &desired[i].velocity - &desired[j].velocity;
        rate += (&m.velocity - hdot_ji) * w;
        disp += (&m.displacement - h_ji) * w;
    }
    Ok(rate + &gains.sigma_f[i] * disp)
}

/// Global term `f_i^g = (ẋ_i − ḣ_i^d) + σ_f,i (x_i^used − h_i^d)`, where
/// `positioning` is whichever position source the controller trusts.
pub fn global_term(velocity: &Vector, positioning: &Vector, desired: &Kinematics, sigma_f: &Matrix) -> Vector {
    (velocity - &desired.velocity) + sigma_f * (positioning - &desired.position)
}

/// `u_i = ḧ_i^d − σ_f,i (ẋ_i − ḣ_i^d) − κ_g,i f_i^g − κ_f f_i^l`.
pub fn control_input(
    i: usize,
    measurements: &Measurements,
    positioning: &Vector,
    desired: &[Kinematics],
    graph: &SensoryGraph,
    gains: &ControllerGains,
) -> Result<Vector> {
    let sigma = &gains.sigma_f[i];
    let d = &desired[i];
    let f_g = global_term(&measurements.velocity, positioning, d, sigma);
    let f_l = local_term(measurements, desired, graph, gains, i)?;
    Ok(&d.acceleration - sigma * (&measurements.velocity - &d.velocity) - f_g * gains.kappa_g[i] - f_l * gains.kappa_f)
}

/// One explicit-Euler step of the tanh tuning law, projected onto `[lower, upper]`.
pub fn tune_gain(kappa_g: f64, beta: f64, params: &TuningParams, dt: f64, lower: f64, upper: f64) -> f64 {
    let rate = params.gamma * (params.sigma_beta * (beta - params.chi_beta)).tanh();
    (kappa_g + rate * dt).clamp(lower, upper)
}

/// `−(D_κg + κ_f L)`, the stacked tracking-error system matrix (per axis).
pub fn stacked_error_matrix(graph: &SensoryGraph, gains: &ControllerGains) -> Matrix {
    let d = Matrix::from_diagonal(&Vector::from_column_slice(&gains.kappa_g));
    -(d + graph.laplacian() * gains.kappa_f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{measure, NoiseConfig, RelativeMeasurement};
    use crate::graph::spectrum;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn still(p: &[f64]) -> Kinematics {
        Kinematics {
            position: v(p),
            velocity: Vector::zeros(p.len()),
            acceleration: Vector::zeros(p.len()),
        }
    }

    fn path3() -> SensoryGraph {
        SensoryGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn in_formation_terms_vanish() {
        let g = SensoryGraph::ring(6, 1.0).unwrap();
        let desired: Vec<_> = (0..6)
            .map(|i| Kinematics {
                position: v(&[i as f64, 2.0 * i as f64]),
                velocity: v(&[0.3, -0.1 * i as f64]),
                acceleration: v(&[0.05 * i as f64, 1.0]),
            })
            .collect();
        let states: Vec<_> = desired
            .iter()
            .map(|d| AgentState::new(d.position.clone(), d.velocity.clone()))
            .collect();
        let gains = ControllerGains::uniform(6, 2, 2.0, 2.0, 1.0);
        let m = measure(&states, &g, &NoiseConfig::noiseless(2, 0), &mut ChaCha8Rng::seed_from_u64(0));
        for i in 0..6 {
            assert_eq!(local_term(&m[i], &desired, &g, &gains, i).unwrap(), Vector::zeros(2));
            let fg = global_term(&m[i].velocity, &m[i].gps, &desired[i], &gains.sigma_f[i]);
            assert_eq!(fg, Vector::zeros(2));
            let u = control_input(i, &m[i], &m[i].gps, &desired, &g, &gains).unwrap();
            assert_eq!(u, desired[i].acceleration);
        }
        for e in tracking_errors(&states, &desired, &g, &gains) {
            assert!(e.composite.iter().chain(e.consensus.iter()).all(|&x| x == 0.0));
        }
    }

    #[test]
    fn single_neighbor_substitution() {
        let g = path3();
        let gains = ControllerGains::uniform(3, 2, 1.0, 1.0, 1.0);
        let desired = vec![still(&[0.0, 0.0]), still(&[1.0, 0.0]), still(&[2.0, 0.0])];
        // Agent 0 sees neighbor 1 with r − h^d = [1, 0] and zero rate error.
        let m = Measurements {
            velocity: Vector::zeros(2),
            gps: Vector::zeros(2),
            relative: vec![RelativeMeasurement {
                neighbor: 1,
                displacement: v(&[0.0, 0.0]),
                velocity: Vector::zeros(2),
            }],
        };
        assert_eq!(local_term(&m, &desired, &g, &gains, 0).unwrap(), v(&[1.0, 0.0]));
        let missing = Measurements { relative: vec![], ..m };
        assert!(matches!(
            local_term(&missing, &desired, &g, &gains, 0),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn global_term_substitutions() {
        let sigma = Matrix::identity(2, 2);
        let d = still(&[3.0, 4.0]);
        let fg = global_term(&Vector::zeros(2), &v(&[3.0, 5.0]), &d, &sigma);
        assert_eq!(fg, v(&[0.0, 1.0]));
        // Perfect tracking, additive bias [−2, −2] on the position source.
        let attacked = v(&[3.0, 4.0]) + v(&[-2.0, -2.0]);
        assert_eq!(global_term(&Vector::zeros(2), &attacked, &d, &sigma), v(&[-2.0, -2.0]));
    }

    #[test]
    fn velocity_damping_substitution() {
        let g = path3();
        let mut gains = ControllerGains::uniform(3, 2, 0.0, 0.0, 1.0);
        gains.kappa_g_upper = vec![0.0; 3];
        let desired = vec![still(&[0.0, 0.0]), still(&[1.0, 0.0]), still(&[2.0, 0.0])];
        let m = Measurements {
            velocity: v(&[1.0, 0.0]),
            gps: v(&[0.0, 0.0]),
            relative: vec![RelativeMeasurement {
                neighbor: 1,
                displacement: v(&[-1.0, 0.0]),
                velocity: v(&[1.0, 0.0]),
            }],
        };
        let u = control_input(0, &m, &m.gps, &desired, &g, &gains).unwrap();
        assert_eq!(u, v(&[-1.0, 0.0]));
    }

    #[test]
    fn tuning_law_examples() {
        let p = TuningParams {
            gamma: 1.0,
            sigma_beta: 3.0,
            chi_beta: 0.5,
        };
        assert_eq!(tune_gain(1.2, 0.5, &p, 0.01, 0.0, 2.0), 1.2);
        let rate = 1.5f64.tanh();
        assert_abs_diff_eq!(rate, 0.905_148_253_644_866_6, epsilon = 1e-15);
        assert_abs_diff_eq!(tune_gain(1.0, 1.0, &p, 0.01, 0.0, 2.0), 1.0 + 0.009_051_482_536_448_666, epsilon = 1e-15);
        assert_eq!(tune_gain(1.999, 1.0, &p, 0.01, 0.0, 2.0), 2.0);
        assert_eq!(tune_gain(0.0, 0.0, &p, 0.01, 0.0, 2.0), 0.0);
    }

    #[test]
    fn validation() {
        let mut g = ControllerGains::uniform(3, 2, 2.0, 2.0, 1.0);
        assert!(g.validate(3, 2).is_ok());
        assert!(g.validate(4, 2).is_err());
        g.sigma_f[1] = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(g.validate(3, 2).is_err());
        let mut g = ControllerGains::uniform(3, 2, 2.0, 2.0, 1.0);
        g.kappa_g[0] = 3.0;
        assert!(g.validate(3, 2).is_err());
        let p = TuningParams { gamma: 1.0, sigma_beta: 3.0, chi_beta: 1.5 };
        assert!(p.validate().is_err());
    }

    #[test]
    fn lyapunov_value() {
        let s = Matrix::from_diagonal(&v(&[2.0, 0.5]));
        assert_abs_diff_eq!(lyapunov(&v(&[2.0, 1.0]), &s), 0.5 * (4.0 / 2.0 + 1.0 / 0.5), epsilon = 1e-15);
    }

    /// Kronecker product, written out for the stacked-form oracle.
    fn kron(a: &Matrix, b: &Matrix) -> Matrix {
        Matrix::from_fn(a.nrows() * b.nrows(), a.ncols() * b.ncols(), |r, c| {
            a[(r / b.nrows(), c / b.ncols())] * b[(r % b.nrows(), c % b.ncols())]
        })
    }

    #[test]
    fn local_term_matches_stacked_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n_agents = rng.random_range(3..8);
            let dim = 2 + rng.random_range(0..2);
            let mut edges: Vec<_> = (1..n_agents)
                .map(|c| (rng.random_range(0..c), c, rng.random_range(0.2..3.0)))
                .collect();
            if edges[n_agents - 2].0 != 0 {
                edges.push((0, n_agents - 1, 0.7));
            }
            let g = SensoryGraph::from_edges(n_agents, &edges).unwrap();
            let mut gains = ControllerGains::uniform(n_agents, dim, 1.3, 0.8, 1.0);
            for s in gains.sigma_f.iter_mut() {
                let a = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
                *s = &a * a.transpose() + Matrix::identity(dim, dim);
            }
            let rnd = |rng: &mut ChaCha8Rng| Vector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
            let desired: Vec<_> = (0..n_agents)
                .map(|_| Kinematics {
                    position: rnd(&mut rng),
                    velocity: rnd(&mut rng),
                    acceleration: rnd(&mut rng),
                })
                .collect();
            let states: Vec<_> = (0..n_agents)
                .map(|_| AgentState::new(rnd(&mut rng), rnd(&mut rng)))
                .collect();
            let m = measure(&states, &g, &NoiseConfig::noiseless(dim, 0), &mut rng);

            let lk = kron(&g.laplacian(), &Matrix::identity(dim, dim));
            let stack = |f: &dyn Fn(usize) -> Vector| {
                Vector::from_iterator(n_agents * dim, (0..n_agents).flat_map(|i| f(i).iter().copied().collect::<Vec<_>>()))
            };
            let xt = stack(&|i| &states[i].position - &desired[i].position);
            let vt = stack(&|i| &states[i].velocity - &desired[i].velocity);
            let (lx, lv) = (&lk * xt, &lk * vt);
            for i in 0..n_agents {
                let r = i * dim..(i + 1) * dim;
                let expected = lv.rows(r.start, dim).into_owned() + &gains.sigma_f[i] * lx.rows(r.start, dim);
                let got = local_term(&m[i], &desired, &g, &gains, i).unwrap();
                for c in 0..dim {
                    assert_abs_diff_eq!(got[c], expected[c], epsilon = 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn projection_holds(k in 0.0f64..=2.0, beta in 0.0f64..=1.0, gamma in 0.01f64..10.0, dt in 1e-4f64..1.0) {
            let p = TuningParams { gamma, sigma_beta: 3.0, chi_beta: 0.5 };
            let next = tune_gain(k, beta, &p, dt, 0.0, 2.0);
            prop_assert!((0.0..=2.0).contains(&next));
            if beta > 0.5 { prop_assert!(next >= k); }
            if beta < 0.5 { prop_assert!(next <= k); }
        }

        #[test]
        fn stacked_matrix_bound(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(3..=10);
            let edges: Vec<_> = (1..n).map(|c| (rng.random_range(0..c), c, rng.random_range(0.1..4.0))).collect();
            let g = SensoryGraph::from_edges(n, &edges).unwrap();
            let mut gains = ControllerGains::uniform(n, 2, rng.random_range(0.05..5.0), 1.0, 1.0);
            gains.kappa_g = (0..n).map(|_| rng.random_range(0.05..5.0)).collect();
            gains.kappa_g_upper = gains.kappa_g.clone();
            let min_kg = gains.kappa_g.iter().copied().fold(f64::INFINITY, f64::min);
            let eig = spectrum(&stacked_error_matrix(&g, &gains));
            prop_assert!(eig.iter().all(|&e| e <= -min_kg + 1e-9));
        }
    }
}

//! Per-agent resilient position estimator.
//!
//! Each agent runs an extended information filter over its own position.
//! Every step it predicts with its measured velocity, tries an update with
//! the (possibly compromised) global positioning measurement, and scores
//! that tentative update with the KL divergence between the predicted and
//! updated Gaussians. Below the threshold `χ` the update is kept; otherwise
//! it is discarded and the prediction is corrected instead with one relative
//! measurement per neighbor, using the neighbor's *desired* position in
//! place of any communicated estimate.

use crate::{Error, Matrix, Result, Vector};

/// Noise and gating parameters shared by every agent's filter.
///
/// The motion Jacobians are `F = I` and `G = Δt·I`; the measurement
/// Jacobians are `H = I` for positioning and `H = −I` for relative updates.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModels {
    process: Matrix,
    gps: Matrix,
    relative: Matrix,
    gps_info: Matrix,
    relative_info: Matrix,
    dt: f64,
    chi: f64,
}

fn spd_inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    if m.nrows() != m.ncols() || m != &m.transpose() {
        return Err(Error::config(what, "must be square and symmetric"));
    }
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::config(what, "must be positive definite"))
}

impl MeasurementModels {
    pub fn new(process: Matrix, gps: Matrix, relative: Matrix, dt: f64, chi: f64) -> Result<Self> {
        let n = process.nrows();
        if gps.nrows() != n || relative.nrows() != n {
            return Err(Error::config("estimator", "covariance dimensions differ"));
        }
        spd_inverse(&process, "estimator.process_noise")?;
        let gps_info = spd_inverse(&gps, "estimator.gps_noise")?;
        let relative_info = spd_inverse(&relative, "estimator.relative_noise")?;
        if !(dt > 0.0) {
            return Err(Error::config("estimator.dt", "must be positive"));
        }
        if !(chi > 0.0) {
            return Err(Error::config("estimator.chi", "must be positive"));
        }
        Ok(Self {
            process,
            gps,
            relative,
            gps_info,
            relative_info,
            dt,
            chi,
        })
    }

    /// Isotropic models `q²I`, `r_gps²I`, `r_rel²I` given standard deviations.
    pub fn isotropic(dimension: usize, q: f64, r_gps: f64, r_rel: f64, dt: f64, chi: f64) -> Result<Self> {
        let eye = Matrix::identity(dimension, dimension);
        Self::new(&eye * (q * q), &eye * (r_gps * r_gps), &eye * (r_rel * r_rel), dt, chi)
    }

    pub fn dimension(&self) -> usize {
        self.process.nrows()
    }

    pub fn process(&self) -> &Matrix {
        &self.process
    }

    pub fn gps(&self) -> &Matrix {
        &self.gps
    }

    pub fn relative(&self) -> &Matrix {
        &self.relative
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }
}

/// A Gaussian position belief held in both covariance and information form.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub estimate: Vector,
    pub covariance: Matrix,
    /// `Φ = P⁻¹`.
    pub information: Matrix,
    /// `φ = Φ x̂`.
    pub info_vector: Vector,
}

impl Belief {
    pub fn from_covariance(estimate: Vector, covariance: Matrix) -> Result<Self> {
        let sym = (&covariance + covariance.transpose()) * 0.5;
        let information = sym
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Degenerate("covariance lost positive definiteness".into()))?
            .inverse();
        let information = (&information + information.transpose()) * 0.5;
        let info_vector = &information * &estimate;
        Ok(Self {
            estimate,
            covariance: sym,
            information,
            info_vector,
        })
    }

    /// Recovers `x̂ = Φ⁻¹φ` and `P = Φ⁻¹` after symmetrizing `Φ`.
    pub fn from_information(information: Matrix, info_vector: Vector) -> Result<Self> {
        let information = (&information + information.transpose()) * 0.5;
        let chol = information
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Degenerate("information matrix is not positive definite".into()))?;
        let estimate = chol.solve(&info_vector);
        let covariance = chol.inverse();
        Ok(Self {
            estimate,
            covariance: (&covariance + covariance.transpose()) * 0.5,
            information,
            info_vector,
        })
    }

    pub fn dimension(&self) -> usize {
        self.estimate.len()
    }
}

/// Which correction produced the current estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// No step taken yet.
    Initial,
    Gps,
    Relative,
    /// Positioning rejected and no neighbor available: prediction only.
    PredictOnly,
}

impl EstimatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorMode::Initial => "initial",
            EstimatorMode::Gps => "gps",
            EstimatorMode::Relative => "relative",
            EstimatorMode::PredictOnly => "predict_only",
        }
    }
}

impl std::str::FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "initial" => EstimatorMode::Initial,
            "gps" => EstimatorMode::Gps,
            "relative" => EstimatorMode::Relative,
            "predict_only" => EstimatorMode::PredictOnly,
            other => return Err(Error::Argument(format!("unknown estimator mode `{other}`"))),
        })
    }
}

/// Filter state of one agent after a step.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub belief: Belief,
    /// KL divergence of the last tentative positioning update.
    pub kl: f64,
    /// Positioning quality `β ∈ [0, 1]`.
    pub beta: f64,
    pub mode: EstimatorMode,
}

impl EstimatorState {
    pub fn new(estimate: Vector, covariance: Matrix) -> Result<Self> {
        Ok(Self {
            belief: Belief::from_covariance(estimate, covariance)?,
            kl: 0.0,
            beta: 1.0,
            mode: EstimatorMode::Initial,
        })
    }

    pub fn estimate(&self) -> &Vector {
        &self.belief.estimate
    }
}

/// Prediction with the measured velocity: `x̂ + ẋΔt`, `FPFᵀ + GQGᵀ`.
pub fn predict(belief: &Belief, velocity: &Vector, models: &MeasurementModels) -> Result<Belief> {
    let dt = models.dt;
    let estimate = &belief.estimate + velocity * dt;
    let covariance = &belief.covariance + &models.process * (dt * dt);
    Belief::from_covariance(estimate, covariance)
}

/// The measurement channel used in an information update.
#[derive(Debug, Clone, Copy)]
pub enum Observation<'a> {
    /// `s = x_i + ω`, predicted as `x̂`.
    Gps,
    /// `s = x_j − x_i + ω`, predicted as `h_j^d − x̂`.
    Relative { neighbor_desired: &'a Vector },
}

/// Information-form update:
/// `Φ⁺ = Φ + HᵀR⁻¹H`, `φ⁺ = φ + HᵀR⁻¹(s − ŝ + Hx̂)`.
pub fn update(
    prior: &Belief,
    measurement: &Vector,
    observation: Observation<'_>,
    models: &MeasurementModels,
) -> Result<Belief> {
    let x = &prior.estimate;
    let (sign, r_inv, predicted) = match observation {
        Observation::Gps => (1.0, &models.gps_info, x.clone()),
        Observation::Relative { neighbor_desired } => {
            (-1.0, &models.relative_info, neighbor_desired - x)
        }
    };
    // H = sign·I, so HᵀR⁻¹H = R⁻¹ and Hᵀ R⁻¹ v = sign·R⁻¹ v.
    let information = &prior.information + r_inv;
    let innovation = measurement - predicted + x * sign;
    let info_vector = &prior.info_vector + (r_inv * innovation) * sign;
    Belief::from_information(information, info_vector)
}

fn log_det_spd(m: &Matrix) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// KL divergence from the predicted belief to the updated one:
/// `½{ΔᵀΦ⁺Δ + tr(Φ⁺ Φ⁻⁻¹) + ln(det Φ⁻ / det Φ⁺) − n}` with `Δ = x̂⁺ − x̂⁻`.
pub fn kl_divergence(prior: &Belief, posterior: &Belief) -> Result<f64> {
    let n = prior.dimension() as f64;
    let d = &posterior.estimate - &prior.estimate;
    let quad = d.dot(&(&posterior.information * &d));
    let trace = (&posterior.information * &prior.covariance).trace();
    let log_ratio = log_det_spd(&prior.information)? - log_det_spd(&posterior.information)?;
    Ok(0.5 * (quad + trace + log_ratio - n))
}

/// `β = 1 − sat(D_KL/χ)`; negative rounding residue in `D_KL` counts as zero.
pub fn quality_measure(kl: f64, chi: f64) -> f64 {
    1.0 - (kl.max(0.0) / chi).min(1.0)
}

/// One relative observation of a neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeObservation {
    /// `h_j^d(k)`.
    pub neighbor_desired: Vector,
    /// `s^{r_ij} = x_j − x_i + ω`.
    pub measurement: Vector,
}

/// One step of the resilient estimator.
///
/// Predicts, tries the positioning update, scores it with the KL divergence
/// and `β`, and keeps it when `D_KL < χ`. Otherwise the tentative update is
/// dropped and the prediction is corrected sequentially with each relative
/// observation (callers pass them in ascending neighbor order). With no
/// relative observations the prediction itself is returned in
/// [`EstimatorMode::PredictOnly`].
pub fn resilient_step(
    state: &EstimatorState,
    velocity: &Vector,
    gps: &Vector,
    relative: &[RelativeObservation],
    models: &MeasurementModels,
) -> Result<EstimatorState> {
    let prior = predict(&state.belief, velocity, models)?;
    let tentative = update(&prior, gps, Observation::Gps, models)?;
    let kl = kl_divergence(&prior, &tentative)?;
    let beta = quality_measure(kl, models.chi);
    if kl < models.chi {
        return Ok(EstimatorState {
            belief: tentative,
            kl,
            beta,
            mode: EstimatorMode::Gps,
        });
    }
    let mut belief = prior;
    for obs in relative {
        belief = update(
            &belief,
            &obs.measurement,
            Observation::Relative {
                neighbor_desired: &obs.neighbor_desired,
            },
            models,
        )?;
    }
    let mode = if relative.is_empty() {
        EstimatorMode::PredictOnly
    } else {
        EstimatorMode::Relative
    };
    Ok(EstimatorState { belief, kl, beta, mode })
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use resform::estimation::{update, Belief, MeasurementModels, Observation};
use resform::{Matrix, Vector};

/// Averages the posterior estimation error over noisy relative measurements
/// of an exactly tracking neighbor and compares the V-metric of the mean
/// error against the prior.
#[test]
fn mean_error_metric_decreases_under_noise() {
    let n = 3;
    let r_std = 5e-3;
    let models = MeasurementModels::isotropic(n, 0.02, r_std, r_std, 0.01, 5.0).unwrap();
    let truth = Vector::from_column_slice(&[0.3, -0.2, 0.9]);
    let prior = Belief::from_covariance(
        &truth - Vector::from_column_slice(&[0.01, 0.015, -0.008]),
        Matrix::identity(n, n) * 1e-4,
    )
    .unwrap();
    let h_j = Vector::from_column_slice(&[1.3, -0.2, 0.9]);
    let draws = 20_000;
    let sums: Vec<Vector> = resform::par::map_range(8, |chunk| {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        rng.set_stream(chunk as u64);
        let mut acc = Vector::zeros(n);
        for _ in 0..draws / 8 {
            let noise = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * r_std);
            let s = &h_j - &truth + noise;
            let post = update(&prior, &s, Observation::Relative { neighbor_desired: &h_j }, &models).unwrap();
            acc += &truth - &post.estimate;
        }
        acc
    });
    let mean = sums.iter().fold(Vector::zeros(n), |a, s| a + s) / draws as f64;
    let post_info = &prior.information + Matrix::identity(n, n) / (r_std * r_std);
    let e_prior = &truth - &prior.estimate;
    let v_prior = e_prior.dot(&(&prior.information * &e_prior));
    let v_post = mean.dot(&(&post_info * &mean));
    assert!(v_post < v_prior, "{v_post} vs {v_prior}");
    // The sample mean matches Φ(k|k)⁻¹ Φ(k|k−1) E[x~(k|k−1)] within sampling error.
    let expected = post_info.clone().try_inverse().unwrap() * &prior.information * &e_prior;
    let gain = post_info.try_inverse().unwrap() / (r_std * r_std);
    let sd = gain[(0, 0)] * r_std / (draws as f64).sqrt();
    assert!((&mean - &expected).abs().max() < 5.0 * sd, "{mean} vs {expected}");
}

#[test]
fn random_relative_chains_never_raise_mean_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let n = rng.random_range(2..=3);
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let cov = (&a * a.transpose() + Matrix::identity(n, n) * 0.1) * 1e-3;
        let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let r = (&b * b.transpose() + Matrix::identity(n, n) * 0.1) * 1e-3;
        let models = MeasurementModels::new(Matrix::identity(n, n), r.clone(), r, 0.01, 5.0).unwrap();
        let truth = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let mut belief = Belief::from_covariance(&truth + Vector::from_fn(n, |_, _| rng.random_range(-0.1..0.1)), cov).unwrap();
        let mut v_last = f64::INFINITY;
        for _ in 0..5 {
            let h_j = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            belief = update(&belief, &(&h_j - &truth), Observation::Relative { neighbor_desired: &h_j }, &models).unwrap();
            let e = &truth - &belief.estimate;
            let v = e.dot(&(&belief.information * &e));
            assert!(v <= v_last * (1.0 + 1e-12));
            v_last = v;
        }
    }
}

use resform::attacks::AttackMode;
use resform::control::lyapunov;
use resform::scenario::config::{AttackConfig, InitialConfig};
use resform::scenario::{bundled, run, sweep, Override};

fn unstable_attack(agent: usize, delta: f64, c_a: f64, start: f64) -> toml::Value {
    toml::Value::try_from(AttackConfig {
        agent,
        mode: AttackMode::Unstable,
        delta: Some(delta),
        bias: None,
        bias_terms: Vec::new(),
        c_a,
        start,
        end: None,
    })
    .unwrap()
}

#[test]
fn lyapunov_sum_decays_from_perturbed_start() {
    let mut config = bundled("planar_nominal").unwrap();
    // Ends before the first formation transition.
    config.duration = 14.0;
    let plan = config.build().unwrap().plan;
    let positions = plan
        .desired_states(0.0)
        .iter()
        .enumerate()
        .map(|(i, k)| k.position.iter().map(|p| p + 0.1 * (i as f64 - 2.5)).collect())
        .collect();
    config.initial = InitialConfig::Explicit { positions, velocities: None };
    let log = run(&config).unwrap();
    let total = |k: usize| log.records[k].agents.iter().map(|a| a.lyapunov).sum::<f64>();
    let v0 = total(0);
    assert!(v0 > 1e-3);
    let vend = total(log.records.len() - 1);
    assert!(vend < 1e-6 * v0, "{vend} vs {v0}");
    // Sampled once per second the sum shrinks until it reaches the
    // zero-order-hold residual of the moving reference.
    let per_second: Vec<f64> = (0..=14).map(|s| total(s * 100)).collect();
    assert!(
        per_second.windows(2).filter(|w| w[0] > 1e-6 * v0).all(|w| w[1] < w[0]),
        "{per_second:?}"
    );
    assert!(per_second.iter().all(|&v| v <= v0));
    assert!(log.records[0].index < log.records.last().unwrap().index);
}

#[test]
fn logged_lyapunov_matches_composite_error() {
    let log = run(&bundled("planar_hybrid").unwrap()).unwrap();
    let config = bundled("planar_hybrid").unwrap();
    let scenario = config.build().unwrap();
    let rec = log.at(20.0);
    let desired = scenario.plan.desired_states(rec.t);
    let states: Vec<_> = rec
        .agents
        .iter()
        .map(|a| resform::dynamics::AgentState::new(a.position.clone(), a.velocity.clone()))
        .collect();
    let errors = resform::control::tracking_errors(&states, &desired, &scenario.graph, &scenario.gains);
    for (i, e) in errors.iter().enumerate() {
        let v = lyapunov(&e.composite, &scenario.gains.sigma_f[i]);
        assert!((v - rec.agents[i].lyapunov).abs() <= 1e-12 * v.max(1.0));
    }
}

#[test]
fn hybrid_attack_degrades_and_marks_agent() {
    let log = run(&bundled("planar_hybrid").unwrap()).unwrap();
    assert!(!log.at(14.99).agents[0].attacked);
    assert!(log.at(15.0).agents[0].attacked);
    assert!(log.records.iter().all(|r| r.agents[1..].iter().all(|a| !a.attacked)));
    assert!(log.at(40.0).index < 0.9);
}

#[test]
fn more_unstable_attackers_lower_the_minimum_index() {
    let base = bundled("cl_gain_tuning").unwrap();
    let sets: Vec<Vec<Override>> = (1..=5)
        .map(|m| {
            let attacks = (0..m).map(|a| unstable_attack(a, 2.0, 5.0, 15.0)).collect::<Vec<_>>();
            vec![Override::new("attacks", toml::Value::Array(attacks))]
        })
        .collect();
    let results = sweep(&base, &sets, None);
    let mins: Vec<f64> = results
        .iter()
        .map(|r| r.summary.as_ref().expect("run succeeds").min_index)
        .collect();
    assert!(mins.windows(2).all(|w| w[1] < w[0]), "{mins:?}");
}

#[test]
fn boundedness_flips_across_unit_gain_product() {
    // kappa_g = 2, so the boundary sits at c_a = 0.5.
    let base = bundled("planar_nominal").unwrap();
    let c_values = [0.1, 0.25, 0.4, 1.0, 2.5];
    let sets: Vec<Vec<Override>> = c_values
        .iter()
        .map(|&c| vec![Override::new("attacks", toml::Value::Array(vec![unstable_attack(3, 1.0, c, 15.0)]))])
        .collect();
    let results = sweep(&base, &sets, Some(2));
    for (c, r) in c_values.iter().zip(&results) {
        let bounded = r.summary.as_ref().is_some_and(|s| s.max_global_error <= 10.0);
        assert_eq!(bounded, 2.0 * c < 1.0, "c_a = {c}: {r:?}");
    }
}

#[test]
fn sweep_collects_failures_and_defaults_to_base() {
    let mut base = bundled("planar_nominal").unwrap();
    base.duration = 2.0;
    let single = sweep(&base, &[], None);
    assert_eq!(single.len(), 1);
    assert!(single[0].summary.is_some());

    let sets = vec![
        vec![Override::new("gains.kappa_f", 1.0)],
        vec![Override::new("gains.no_such_gain", 1.0)],
        vec![Override::new("attacks[3].c_a", 1.0)],
        vec![Override::new("gains.kappa_f", -1.0)],
    ];
    let results = sweep(&base, &sets, None);
    assert_eq!(results.iter().map(|r| r.run).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    assert!(results[0].error.is_none());
    for r in &results[1..] {
        assert!(r.summary.is_none() && r.error.is_some(), "{r:?}");
    }
    assert!(results[1].error.as_ref().unwrap().contains("no_such_gain"));
}

#[test]
fn sweep_streams_are_independent_of_scheduling() {
    let mut base = bundled("cl_recovery").unwrap();
    base.duration = 3.0;
    base.attacks.clear();
    let sets: Vec<Vec<Override>> = (0..4).map(|_| Vec::new()).collect();
    let a = sweep(&base, &sets, Some(1));
    let b = sweep(&base, &sets, Some(4));
    assert_eq!(a, b);
    // Different run indices draw different noise.
    let mins: Vec<f64> = a.iter().map(|r| r.summary.as_ref().unwrap().min_index).collect();
    assert!(mins[0] != mins[1]);
}

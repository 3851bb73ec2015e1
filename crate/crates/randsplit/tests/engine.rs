//! The splitting chain: reproducibility, flow-time distributions, drift and
//! cocycle behaviour.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use randsplit::engine::{self, RunConfig, RunOptions, TimeDistribution};
use randsplit::models;

fn base_cfg(cycles: u64, frame: usize, seed: u64) -> RunConfig {
    RunConfig {
        h: 1.0,
        dist: TimeDistribution::Exponential,
        cycles,
        burn_in: engine::default_burn_in(cycles),
        frame,
        seed,
        tol: 1e-10,
    }
}

#[test]
fn identical_seeds_reproduce_bitwise() {
    let model = models::lorenz_model(4, 1.0);
    let cfg = base_cfg(5000, 3, 42);
    let a = engine::run(&model, &cfg, &RunOptions::default()).unwrap();
    let b = engine::run(&model, &cfg, &RunOptions::default()).unwrap();
    assert_eq!(a.exponents, b.exponents);
    assert_eq!(a.final_state, b.final_state);
    assert_eq!(a.stderrs, b.stderrs);
}

#[test]
fn different_seeds_decorrelate() {
    let model = models::lorenz_model(4, 1.0);
    let a = engine::run(&model, &base_cfg(5000, 1, 1), &RunOptions::default()).unwrap();
    let b = engine::run(&model, &base_cfg(5000, 1, 2), &RunOptions::default()).unwrap();
    assert_ne!(a.final_state, b.final_state);
    assert_ne!(a.exponents, b.exponents);
}

#[test]
fn flow_time_distributions_have_mean_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for dist in [
        TimeDistribution::Exponential,
        TimeDistribution::UniformTwo,
        TimeDistribution::custom(vec![0.0, 0.5, 2.0], vec![1.0, 2.0]).unwrap(),
    ] {
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| dist.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 1e-2, "{dist:?}: mean {mean}");
        let min = (0..1000).map(|_| dist.sample(&mut rng)).fold(f64::MAX, f64::min);
        assert!(min >= 0.0);
    }
}

#[test]
fn distribution_parsing_and_validation() {
    assert_eq!(
        TimeDistribution::from_name("exp").unwrap(),
        TimeDistribution::Exponential
    );
    assert_eq!(
        TimeDistribution::from_name("uniform").unwrap(),
        TimeDistribution::UniformTwo
    );
    assert!(TimeDistribution::from_name("gamma").is_err());
    assert!(TimeDistribution::custom(vec![0.0], vec![]).is_err());
    assert!(TimeDistribution::custom(vec![1.0, 0.5], vec![1.0]).is_err());
    assert!(TimeDistribution::custom(vec![0.0, 1.0], vec![-1.0]).is_err());
}

#[test]
fn invalid_configurations_are_rejected() {
    let model = models::lorenz_model(4, 1.0);
    let mut cfg = base_cfg(100, 4, 1);
    // Frame larger than the orbit tangent dimension (n - 1 = 3).
    assert!(engine::run(&model, &cfg, &RunOptions::default()).is_err());
    cfg.frame = 2;
    cfg.cycles = 0;
    assert!(engine::run(&model, &cfg, &RunOptions::default()).is_err());
    cfg.cycles = 10;
    cfg.burn_in = 10;
    assert!(engine::run(&model, &cfg, &RunOptions::default()).is_err());
    cfg.burn_in = 0;
    let opts = RunOptions {
        initial: Some(vec![1.0; 3]),
        ..RunOptions::default()
    };
    assert!(engine::run(&model, &cfg, &opts).is_err());
}

#[test]
fn conserved_quantities_drift_slowly() {
    let model = models::lorenz_model(6, 1.5);
    let res = engine::run(&model, &base_cfg(20_000, 0, 5), &RunOptions::default()).unwrap();
    assert!(res.drift[0] < 1e-11, "sphere drift {:e}", res.drift[0]);
}

#[test]
fn single_rotation_field_has_vanishing_top_exponent() {
    // One shear flow alone produces only polynomial cocycle growth, so the
    // exponent estimate decays toward zero.
    let full = models::lorenz_model(4, 1.0);
    let model = models::SplitModel {
        name: "single rotation".into(),
        dim: full.dim,
        fields: vec![full.fields[0]],
        conserved: full.conserved.clone(),
        initial: full.initial.clone(),
    };
    let res = engine::run(&model, &base_cfg(20_000, 1, 1), &RunOptions::default()).unwrap();
    assert!(
        res.exponents[0].abs() < 5e-3,
        "shear exponent {:e} not vanishing",
        res.exponents[0]
    );
}

#[test]
fn zero_sum_on_the_full_tangent_frame() {
    let model = models::lorenz_model(5, 1.0);
    let res = engine::run(&model, &base_cfg(20_000, 4, 9), &RunOptions::default()).unwrap();
    assert!(res.sum.abs() < 1e-10, "sum {:e}", res.sum);
    // Exponents come out ordered by the QR convention.
    assert!(res.exponents[0] >= *res.exponents.last().unwrap());
}

#[test]
fn observable_accumulates_x1_squared() {
    let model = models::lorenz_model(4, 1.0);
    let opts = RunOptions {
        observable: true,
        ..RunOptions::default()
    };
    let res = engine::run(&model, &base_cfg(200_000, 0, 3), &opts).unwrap();
    assert!(
        (res.observable_mean - 0.25).abs() < 5.0 * res.observable_stderr,
        "mean {} stderr {}",
        res.observable_mean,
        res.observable_stderr
    );
    assert!(res.observable_stderr > 0.0 && res.observable_stderr < 1e-2);
}

#[test]
fn gronwall_bound_holds() {
    let model = models::lorenz_model(4, 1.0);
    let opts = RunOptions {
        gronwall: true,
        ..RunOptions::default()
    };
    let res = engine::run(&model, &base_cfg(10_000, 3, 11), &opts).unwrap();
    let g = res.gronwall.unwrap();
    assert_eq!(g.violations, 0);
    assert!(g.constant > 0.0);
    assert!(g.max_ratio <= 1.0 + 1e-12);
}

#[test]
fn trace_records_running_estimates() {
    let model = models::lorenz_model(4, 1.0);
    let opts = RunOptions {
        trace_points: 10,
        ..RunOptions::default()
    };
    let res = engine::run(&model, &base_cfg(5000, 2, 1), &opts).unwrap();
    assert!(!res.trace.is_empty());
    assert!(res.trace.len() <= 11);
    let last = res.trace.last().unwrap();
    assert_eq!(last.exponents.len(), 2);
    // The final trace value matches the overall estimate closely.
    assert!((last.exponents[0] - res.exponents[0]).abs() < 1e-2);
}

#[test]
fn default_burn_in_policy() {
    assert_eq!(engine::default_burn_in(1_000_000), 10_000);
    assert_eq!(engine::default_burn_in(50_000), 1000);
    assert_eq!(engine::default_burn_in(500), 499);
}

#[test]
fn initial_override_is_used() {
    let model = models::lorenz_model(4, 1.0);
    let mut alt = model.initial.clone();
    alt.rotate_left(1);
    let opts = RunOptions {
        initial: Some(alt.clone()),
        ..RunOptions::default()
    };
    let a = engine::run(&model, &base_cfg(100, 0, 1), &opts).unwrap();
    let b = engine::run(&model, &base_cfg(100, 0, 1), &RunOptions::default()).unwrap();
    assert_ne!(a.final_state, b.final_state);
}

//! Acceptance criteria for the toolkit, one test per criterion. Each test
//! prints a single `ACCEPTANCE <k> <name>: PASS|FAIL` line before asserting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use randsplit::certifier;
use randsplit::cli::shear_check_field;
use randsplit::engine::{self, RunConfig, RunOptions, TimeDistribution};
use randsplit::flows::{self, FlowKind};
use randsplit::lyapunov;
use randsplit::models;

fn report(k: u32, name: &str, pass: bool) {
    println!("ACCEPTANCE {k} {name}: {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "acceptance criterion {k} ({name}) failed");
}

fn cfg(h: f64, cycles: u64, frame: usize, seed: u64) -> RunConfig {
    RunConfig {
        h,
        dist: TimeDistribution::Exponential,
        cycles,
        burn_in: engine::default_burn_in(cycles),
        frame,
        seed,
        tol: 1e-10,
    }
}

fn euler_model() -> models::SplitModel {
    let p = certifier::euler_test_point(3, 1.0, 0.5, 0.01).unwrap();
    let modes = models::half_lattice(3);
    models::euler_model(3, p.state_in(&modes))
}

#[test]
fn criterion_01_conservation_drift() {
    let mut lmax: f64 = 0.0;
    for n in [4, 8] {
        let lorenz = models::lorenz_model(n, 1.0);
        let r = engine::run(&lorenz, &cfg(1.0, 100_000, 0, 1), &RunOptions::default()).unwrap();
        lmax = lmax.max(r.drift.iter().cloned().fold(0.0, f64::max));
    }
    let euler = euler_model();
    let re = engine::run(&euler, &cfg(1.0, 10_000, 0, 1), &RunOptions::default()).unwrap();
    let emax = re.drift.iter().cloned().fold(0.0, f64::max);
    println!("  lorenz drift {lmax:.3e} (bound 1e-9), euler drift {emax:.3e} (bound 1e-6)");
    report(1, "conservation drift", lmax <= 1e-9 && emax <= 1e-6);
}

#[test]
fn criterion_02_zero_exponent_sum() {
    let lorenz = models::lorenz_model(4, 1.0);
    let rl = engine::run(&lorenz, &cfg(1.0, 100_000, 3, 1), &RunOptions::default()).unwrap();
    let euler = euler_model();
    let frame = euler.tangent_dim();
    let re = engine::run(&euler, &cfg(1.0, 10_000, frame, 1), &RunOptions::default()).unwrap();
    println!("  lorenz sum {:.3e} (bound 1e-6), euler sum {:.3e} (bound 1e-4)", rl.sum, re.sum);
    report(2, "exponent sum vanishes", rl.sum.abs() <= 1e-6 && re.sum.abs() <= 1e-4);
}

#[test]
fn criterion_03_lorenz_positive_top_exponent() {
    let model = models::lorenz_model(4, 1.0);
    let mut pass = true;
    for h in [0.5, 1.0] {
        for seed in 1..=10u64 {
            let r = engine::run(&model, &cfg(h, 1_000_000, 1, seed), &RunOptions::default())
                .unwrap();
            let ok = r.exponents[0] > 5.0 * r.stderrs[0];
            if !ok {
                println!(
                    "  h {h} seed {seed}: lambda_1 {:.4e} vs 5 sigma {:.4e}",
                    r.exponents[0],
                    5.0 * r.stderrs[0]
                );
            }
            pass &= ok;
        }
    }
    report(3, "lorenz top exponent positive at 5 sigma", pass);
}

#[test]
fn criterion_04_euler_positive_top_exponent() {
    let model = euler_model();
    let mut pass = true;
    for seed in 1..=5u64 {
        let r = engine::run(&model, &cfg(1.0, 100_000, 1, seed), &RunOptions::default()).unwrap();
        let ok = r.exponents[0] > 3.0 * r.stderrs[0];
        println!(
            "  seed {seed}: lambda_1 {:.4e} +- {:.4e} ({})",
            r.exponents[0],
            r.stderrs[0],
            if ok { "ok" } else { "weak" }
        );
        pass &= ok;
    }
    report(4, "euler top exponent positive at 3 sigma", pass);
}

#[test]
fn criterion_05_lorenz_certification() {
    let mut pass = true;
    for n in 4..=12 {
        let cert = certifier::certify_lorenz(n, 1.0, 1e-10, 1e-8);
        let ok = cert.pass
            && cert.rank.rank == 2 * n - 2
            && cert.rank.smallest_retained >= 1e3 * cert.rank.threshold
            && cert.relation_residuals.iter().all(|r| r.abs() <= 1e-12);
        if !ok {
            println!("  n {n}: {cert:?}");
        }
        pass &= ok;
    }
    report(5, "lorenz bracket rank certified for n = 4..12", pass);
}

#[test]
fn criterion_06_euler_certification() {
    let cert = certifier::certify_euler(3, 1.0, 0.5, 0.01, 1e-10, 1e-8).unwrap();
    let dets_ok = cert.blocks.iter().all(|b| b.rel_err <= 1e-8);
    println!(
        "  rank {}/{} margin {:.2e}, worst det rel err {:.2e}",
        cert.rank.rank,
        cert.expected_rank,
        cert.rank.smallest_retained / cert.rank.threshold,
        cert.blocks.iter().map(|b| b.rel_err).fold(0.0, f64::max)
    );
    report(6, "euler bracket rank certified", cert.pass && cert.rank.rank == 92 && dets_ok);
}

#[test]
fn criterion_07_resonant_shear_identity() {
    let lorenz = models::lorenz_model(4, 1.0);
    let (s1, j1) = shear_check_field(&lorenz.fields[0], &lorenz.initial, 10);
    let euler = euler_model();
    let rot = euler
        .fields
        .iter()
        .find(|f| f.kind == FlowKind::Rotation)
        .unwrap();
    let (s2, j2) = shear_check_field(rot, &euler.initial, 10);
    println!("  max state error {:.3e}, max jacobian error {:.3e}", s1.max(s2), j1.max(j2));
    report(7, "resonant shear identity", s1.max(s2) <= 1e-10 && j1.max(j2) <= 1e-10);
}

#[test]
fn criterion_08_flow_jacobian_accuracy() {
    let lorenz = models::lorenz_model(4, 1.0);
    let euler = euler_model();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    // 100 samples per flow type: closed-form rotations and adaptive tops.
    let mut counts = [0u32; 2];
    while counts[0] < 100 || counts[1] < 100 {
        let pick_top = counts[1] < 100 && (counts[0] >= 100 || rng.gen::<bool>());
        let (model, scale) = if pick_top { (&euler, 0.3) } else { (&lorenz, 1.0) };
        let field = &model.fields[rng.gen_range(0..model.fields.len())];
        let is_top = field.kind == FlowKind::Top;
        if is_top != pick_top {
            continue;
        }
        counts[is_top as usize] += 1;
        let x0: Vec<f64> = (0..model.dim).map(|_| scale * (rng.gen::<f64>() - 0.5)).collect();
        let t = 0.2 + rng.gen::<f64>();
        let mut x = x0.clone();
        let j = flows::advance_with_jacobian(field, &mut x, t, 1e-12).unwrap();
        let eps = 1e-6;
        for col in 0..3 {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[field.coords[col]] += eps;
            xm[field.coords[col]] -= eps;
            flows::advance(field, &mut xp, t, 1e-12).unwrap();
            flows::advance(field, &mut xm, t, 1e-12).unwrap();
            for row in 0..3 {
                let fd =
                    (xp[field.coords[row]] - xm[field.coords[row]]) / (2.0 * eps);
                let rel = (j[(row, col)] - fd).abs() / (1.0 + fd.abs());
                worst = worst.max(rel);
            }
        }
    }
    println!("  worst relative deviation {worst:.3e} (bound 1e-5)");
    report(8, "flow jacobians match finite differences", worst <= 1e-5);
}

#[test]
fn criterion_09_splitting_convergence_order() {
    let rep = lyapunov::convergence_study(4, 1.0, &[0.1, 0.05, 0.025], 1.0).unwrap();
    println!("  fitted order {:.3} (bound 0.8)", rep.fitted_order);
    report(9, "deterministic splitting converges at order >= 0.8", rep.fitted_order >= 0.8);
}

#[test]
fn criterion_10_uniform_sphere_average() {
    let model = models::lorenz_model(4, 1.0);
    let opts = RunOptions {
        observable: true,
        ..RunOptions::default()
    };
    let r = engine::run(&model, &cfg(1.0, 10_000_000, 0, 1), &opts).unwrap();
    let dev = (r.observable_mean - 0.25).abs();
    println!(
        "  avg x_1^2 = {:.8e} +- {:.3e}, deviation {dev:.3e}",
        r.observable_mean, r.observable_stderr
    );
    report(10, "time average matches uniform sphere value", dev <= 3.0 * r.observable_stderr);
}

#[test]
fn criterion_11_cocycle_growth_bound() {
    let model = models::lorenz_model(4, 1.0);
    let opts = RunOptions {
        gronwall: true,
        ..RunOptions::default()
    };
    let r = engine::run(&model, &cfg(1.0, 100_000, 3, 1), &opts).unwrap();
    let g = r.gronwall.unwrap();
    println!(
        "  {} violations in {} cycles (constant {:.3e}, max ratio {:.3})",
        g.violations, g.cycles, g.constant, g.max_ratio
    );
    report(11, "a priori cocycle growth bound holds", g.violations == 0);
}

#[test]
fn criterion_12_bitwise_reproducibility() {
    let commands: Vec<Vec<&str>> = vec![
        vec!["lyapunov", "--model", "lorenz", "--n", "4", "--steps", "50000", "--seeds", "3"],
        vec!["lyapunov", "--model", "euler", "--N", "3", "--steps", "1500"],
        vec!["certify", "--model", "lorenz", "--n", "6"],
        vec!["certify", "--model", "euler", "--N", "3", "--beta", "0.01"],
        vec!["shear-check"],
        vec!["convergence", "--n", "4", "--h-grid", "0.5,0.25,0.125"],
        vec!["ergodic-check", "--n", "4", "--steps", "100000"],
        vec!["simulate", "--model", "lorenz", "--n", "4", "--steps", "20000", "--frame", "2"],
    ];
    let mut pass = true;
    for args in &commands {
        let run = |out: &std::path::Path| {
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_randsplit"))
                .args(args)
                .arg("--out")
                .arg(out)
                .stdout(std::process::Stdio::null())
                .status()
                .unwrap();
            assert!(status.success(), "command {args:?} failed");
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run(d1.path());
        run(d2.path());
        let mut names: Vec<_> = std::fs::read_dir(d1.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            let a = std::fs::read(d1.path().join(&name)).unwrap();
            let b = std::fs::read(d2.path().join(&name)).unwrap();
            if a != b {
                println!("  {:?}: file {:?} differs between reruns", args[0], name);
                pass = false;
            }
        }
    }
    report(12, "every command is byte identical across reruns", pass);
}

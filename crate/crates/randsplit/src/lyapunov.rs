//! Lyapunov spectrum estimation and the splitting-convergence study.

use crate::engine::{self, RunConfig, RunOptions, RunResult, TimeDistribution};
use crate::flows;
use crate::models::{self, SplitModel};

/// Estimate the leading `cfg.frame` Lyapunov exponents of the splitting
/// chain, including their sum (which vanishes for these volume-preserving
/// families when the frame spans the full orbit tangent space).
pub fn estimate_spectrum(
    model: &SplitModel,
    cfg: &RunConfig,
    opts: &RunOptions,
) -> Result<RunResult, engine::EngineError> {
    assert!(cfg.frame > 0, "spectrum estimation needs a tangent frame");
    let recorded = cfg.cycles - cfg.burn_in.min(cfg.cycles);
    if recorded < engine::BATCHES as u64 {
        return Err(engine::EngineError::Config(format!(
            "{recorded} recorded cycles cannot fill {} batches; raise the cycle \
             count or lower the burn-in",
            engine::BATCHES
        )));
    }
    engine::run(model, cfg, opts)
}

/// One point of the h -> 0 study.
#[derive(Clone, Debug)]
pub struct ConvergencePoint {
    pub h: f64,
    pub cycles: u64,
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of log error against log h.
    pub fitted_order: f64,
}

/// Compare the deterministic splitting (all flow times equal to `h`) against
/// a high-accuracy reference integration of the Lorenz drift up to time
/// `t_final`, for each step size in `h_grid`.
pub fn convergence_study(
    n: usize,
    radius: f64,
    h_grid: &[f64],
    t_final: f64,
) -> Result<ConvergenceReport, engine::EngineError> {
    if h_grid.len() < 3 {
        return Err(engine::EngineError::Config(
            "convergence study needs at least three step sizes".into(),
        ));
    }
    if h_grid.iter().any(|&h| h <= 0.0) || h_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(engine::EngineError::Config(
            "step sizes must be positive and strictly descending".into(),
        ));
    }
    let model = models::lorenz_model(n, radius);
    let drift = models::lorenz_drift_field(n);
    let mut reference = model.initial.clone();
    flows::dopri5_dyn(
        |x, dx| {
            let v = drift.evaluate(x);
            dx.copy_from_slice(&v);
        },
        &mut reference,
        t_final,
        1e-12,
        1e-14,
    )
    .map_err(|e| engine::EngineError::Flow {
        cycle: 0,
        field: 0,
        source: e,
    })?;

    let mut points = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let cycles = (t_final / h).round() as u64;
        assert!(
            (cycles as f64 * h - t_final).abs() < 1e-9,
            "step {h} does not divide the final time {t_final}"
        );
        let cfg = RunConfig {
            h,
            dist: TimeDistribution::Fixed(1.0),
            cycles,
            burn_in: 0,
            frame: 0,
            seed: 0,
            tol: 1e-12,
        };
        let out = engine::run(&model, &cfg, &RunOptions::default())?;
        let error = out
            .final_state
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        points.push(ConvergencePoint { h, cycles, error });
    }

    // Least-squares fit of log error = order * log h + const.
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.error > 0.0)
        .map(|p| (p.h.ln(), p.error.ln()))
        .collect();
    let m = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let fitted_order = (m * sxy - sx * sy) / (m * sxx - sx * sx);

    Ok(ConvergenceReport {
        points,
        fitted_order,
    })
}

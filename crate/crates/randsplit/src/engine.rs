//! The random-splitting Markov chain and its tangent cocycle.
//!
//! One cycle applies every flow of the model once, in a fixed order, with iid
//! flow times `h * tau_j` where `tau_j` has mean one. Randomness comes from a
//! counter-based ChaCha8 generator: `seed` selects the key and fixed stream
//! identifiers separate the flow-time stream from the initialisation stream,
//! so runs are reproducible bit-for-bit and independent runs are obtained by
//! changing the seed.
//!
//! The tangent cocycle is propagated on an orthonormal frame, projected onto
//! the tangent space of the conserved-quantity level sets and re-orthonormal-
//! ized by a QR factorization after every cycle; the logs of the diagonal of
//! R accumulate into Lyapunov exponent estimates with batch-mean standard
//! errors.

use crate::flows::{self, FlowError};
use crate::models::SplitModel;
use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Distribution of the unscaled flow times; all variants have mean one.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeDistribution {
    /// Exponential with rate one.
    Exponential,
    /// Uniform on (0, 2).
    UniformTwo,
    /// Deterministic time (used by the splitting-convergence study).
    Fixed(f64),
    /// Piecewise-constant density on `[edges[0], edges.last()]` with one
    /// weight per bin, rescaled to mean one at construction.
    Custom { edges: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("flow failed in cycle {cycle}, field {field}: {source}")]
    Flow {
        cycle: u64,
        field: usize,
        source: FlowError,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl TimeDistribution {
    /// Parse a CLI name.
    pub fn from_name(name: &str) -> Result<Self, EngineError> {
        match name {
            "exp" => Ok(TimeDistribution::Exponential),
            "uniform" => Ok(TimeDistribution::UniformTwo),
            other => Err(EngineError::Config(format!(
                "unknown time distribution '{other}' (expected 'exp' or 'uniform')"
            ))),
        }
    }

    /// Build a custom piecewise-constant distribution, rescaling the support
    /// so the mean is exactly one.
    pub fn custom(edges: Vec<f64>, weights: Vec<f64>) -> Result<Self, EngineError> {
        if edges.len() != weights.len() + 1 || weights.is_empty() {
            return Err(EngineError::Config(
                "custom density needs one more edge than weights".into(),
            ));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) || edges[0] < 0.0 {
            return Err(EngineError::Config(
                "custom density edges must be nonnegative and increasing".into(),
            ));
        }
        if weights.iter().any(|&w| w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(EngineError::Config("custom density weights invalid".into()));
        }
        // Mean of the unscaled density.
        let mass: f64 = edges
            .windows(2)
            .zip(&weights)
            .map(|(e, w)| w * (e[1] - e[0]))
            .sum();
        let mean: f64 = edges
            .windows(2)
            .zip(&weights)
            .map(|(e, w)| w * (e[1] * e[1] - e[0] * e[0]) / 2.0)
            .sum::<f64>()
            / mass;
        let edges = edges.into_iter().map(|e| e / mean).collect();
        Ok(TimeDistribution::Custom { edges, weights })
    }

    /// Draw one flow time (mean one) by inverse transform sampling.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            TimeDistribution::Exponential => {
                let u: f64 = rng.gen();
                -(-u).ln_1p()
            }
            TimeDistribution::UniformTwo => 2.0 * rng.gen::<f64>(),
            TimeDistribution::Fixed(t) => *t,
            TimeDistribution::Custom { edges, weights } => {
                let mass: f64 = edges
                    .windows(2)
                    .zip(weights)
                    .map(|(e, w)| w * (e[1] - e[0]))
                    .sum();
                let mut u = rng.gen::<f64>() * mass;
                for (e, w) in edges.windows(2).zip(weights) {
                    let bin = w * (e[1] - e[0]);
                    if u <= bin || e[1] >= *edges.last().unwrap() {
                        return e[0] + if *w > 0.0 { u / w } else { 0.0 };
                    }
                    u -= bin;
                }
                *edges.last().unwrap()
            }
        }
    }
}

/// Run configuration shared by all drivers.
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Time-step scale multiplying the sampled flow times.
    pub h: f64,
    pub dist: TimeDistribution,
    /// Number of splitting cycles.
    pub cycles: u64,
    /// Cycles excluded from every estimator (still simulated).
    pub burn_in: u64,
    /// Number of tangent directions carried (0 disables the cocycle).
    pub frame: usize,
    pub seed: u64,
    /// Relative tolerance of the adaptive triad integrator.
    pub tol: f64,
}

/// Default burn-in: one percent of the run, at least 1000 cycles (capped so
/// short runs keep at least one recorded cycle).
pub fn default_burn_in(cycles: u64) -> u64 {
    (cycles / 100).max(1000).min(cycles.saturating_sub(1))
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Record the per-cycle cocycle norm against the a priori growth bound.
    pub gronwall: bool,
    /// Accumulate the observable `x_1^2` with batch statistics.
    pub observable: bool,
    /// Number of checkpoints recorded in the convergence trace.
    pub trace_points: usize,
    /// Override the model's default initial state.
    pub initial: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct TracePoint {
    pub cycle: u64,
    pub exponents: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GronwallReport {
    /// Cycles where `log ||cocycle factor||` exceeded `C h sum(tau)`.
    pub violations: u64,
    /// The sampled constant `C = max_j sup_orbit ||DV_j||_2`.
    pub constant: f64,
    /// Largest observed ratio of log-norm to bound.
    pub max_ratio: f64,
    pub cycles: u64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// Lyapunov exponent estimates, one per frame direction, per cycle.
    pub exponents: Vec<f64>,
    /// Batch-mean standard errors of the estimates.
    pub stderrs: Vec<f64>,
    /// Estimate of the sum of the carried exponents.
    pub sum: f64,
    pub sum_stderr: f64,
    /// Maximum relative drift of each conserved quantity over the run.
    pub drift: Vec<f64>,
    pub observable_mean: f64,
    pub observable_stderr: f64,
    pub gronwall: Option<GronwallReport>,
    pub trace: Vec<TracePoint>,
    pub final_state: Vec<f64>,
    pub recorded_cycles: u64,
}

/// Number of batches for batch-mean standard errors.
pub const BATCHES: usize = 50;

/// Accumulates one scalar series into equal-width batches.
struct BatchAcc {
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl BatchAcc {
    fn new() -> Self {
        BatchAcc {
            sums: vec![0.0; BATCHES],
            counts: vec![0; BATCHES],
        }
    }

    fn push(&mut self, batch: usize, v: f64) {
        self.sums[batch] += v;
        self.counts[batch] += 1;
    }

    /// Overall mean and the batch-mean standard error of that mean.
    fn finalize(&self) -> (f64, f64) {
        let total: f64 = self.sums.iter().sum();
        let count: u64 = self.counts.iter().sum();
        if count == 0 {
            return (0.0, f64::INFINITY);
        }
        let mean = total / count as f64;
        let means: Vec<f64> = self
            .sums
            .iter()
            .zip(&self.counts)
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| s / c as f64)
            .collect();
        if means.len() < 2 {
            return (mean, f64::INFINITY);
        }
        let b = means.len() as f64;
        let bm = means.iter().sum::<f64>() / b;
        let var = means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>() / (b - 1.0);
        (mean, (var / b).sqrt())
    }
}

/// Standard normal via the Box-Muller transform (two uniforms per draw, no
/// cached spare, so the draw sequence is stable).
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    (-2.0 * (-u1).ln_1p()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Orthonormalized gradients of the conserved quantities at `x` (modified
/// Gram-Schmidt; gradients of distinct quadratics are independent at generic
/// points).
fn conserved_frame(model: &SplitModel, x: &[f64]) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(model.conserved.len());
    for w in &model.conserved {
        let mut g = DVector::from_iterator(model.dim, w.iter().zip(x).map(|(wi, xi)| 2.0 * wi * xi));
        for prev in &out {
            let d = prev.dot(&g);
            g -= prev * d;
        }
        let n = g.norm();
        if n > 0.0 {
            g /= n;
            out.push(g);
        }
    }
    out
}

fn project_frame(frame: &mut DMatrix<f64>, grads: &[DVector<f64>]) {
    for col in 0..frame.ncols() {
        for g in grads {
            let d = g.dot(&frame.column(col));
            let mut c = frame.column_mut(col);
            c.axpy(-d, g, 1.0);
        }
    }
}

/// QR re-orthonormalization with the diagonal of R made positive. Replaces
/// `frame` by Q and returns `ln R_ii` per column, plus the largest singular
/// value of R (the norm of the cocycle factor restricted to the frame span).
fn qr_renormalize(frame: &mut DMatrix<f64>, want_norm: bool) -> (Vec<f64>, f64) {
    let k = frame.ncols();
    let qr = frame.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    let norm = if want_norm {
        r.clone().svd(false, false).singular_values[0]
    } else {
        0.0
    };
    let mut logs = Vec::with_capacity(k);
    for j in 0..k {
        let d = r[(j, j)];
        if d < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
        logs.push(d.abs().ln());
    }
    *frame = q;
    (logs, norm)
}

fn apply_jacobian_rows(frame: &mut DMatrix<f64>, coords: [usize; 3], j: &Matrix3<f64>) {
    let [c0, c1, c2] = coords;
    for col in 0..frame.ncols() {
        let a = frame[(c0, col)];
        let b = frame[(c1, col)];
        let c = frame[(c2, col)];
        frame[(c0, col)] = j[(0, 0)] * a + j[(0, 1)] * b + j[(0, 2)] * c;
        frame[(c1, col)] = j[(1, 0)] * a + j[(1, 1)] * b + j[(1, 2)] * c;
        frame[(c2, col)] = j[(2, 0)] * a + j[(2, 1)] * b + j[(2, 2)] * c;
    }
}

/// Largest singular value of the field Jacobian `DV_j(x)` (only the active
/// 3x3 block is nonzero).
fn field_jacobian_norm(field: &flows::CompiledField, x: &[f64]) -> f64 {
    let y = [
        x[field.coords[0]],
        x[field.coords[1]],
        x[field.coords[2]],
    ];
    field
        .rhs_jacobian(&y)
        .svd(false, false)
        .singular_values[0]
}

/// Simulate the splitting chain. With `cfg.frame > 0` the tangent cocycle is
/// carried along and Lyapunov statistics are produced.
pub fn run(model: &SplitModel, cfg: &RunConfig, opts: &RunOptions) -> Result<RunResult, EngineError> {
    if cfg.frame > model.tangent_dim() {
        return Err(EngineError::Config(format!(
            "frame size {} exceeds tangent dimension {}",
            cfg.frame,
            model.tangent_dim()
        )));
    }
    if cfg.cycles == 0 {
        return Err(EngineError::Config("cycle count must be positive".into()));
    }
    if cfg.burn_in >= cfg.cycles {
        return Err(EngineError::Config("burn-in must be below cycle count".into()));
    }
    let mut x = opts
        .initial
        .clone()
        .unwrap_or_else(|| model.initial.clone());
    if x.len() != model.dim {
        return Err(EngineError::Config("initial state dimension mismatch".into()));
    }

    let mut rng_times = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_times.set_stream(0);
    let mut rng_init = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_init.set_stream(1);

    let k = cfg.frame;
    let mut frame = DMatrix::zeros(model.dim, k.max(1));
    if k > 0 {
        for j in 0..k {
            for i in 0..model.dim {
                frame[(i, j)] = gaussian(&mut rng_init);
            }
        }
        let grads = conserved_frame(model, &x);
        project_frame(&mut frame, &grads);
        qr_renormalize(&mut frame, false);
    }

    let q0 = model.conserved_values(&x);
    let recorded = cfg.cycles - cfg.burn_in;
    let mut acc: Vec<BatchAcc> = (0..k).map(|_| BatchAcc::new()).collect();
    let mut acc_sum = BatchAcc::new();
    let mut acc_obs = BatchAcc::new();
    let mut drift = vec![0.0f64; q0.len()];
    let mut running = vec![0.0; k];
    let mut trace = Vec::new();
    let trace_every = if opts.trace_points > 0 {
        (recorded / opts.trace_points as u64).max(1)
    } else {
        0
    };
    let mut gron: Vec<(f64, f64)> = Vec::new();
    let mut gron_c: f64 = 0.0;

    for cycle in 0..cfg.cycles {
        if opts.gronwall && k > 0 {
            let local = model
                .fields
                .iter()
                .map(|f| field_jacobian_norm(f, &x))
                .fold(0.0, f64::max);
            gron_c = gron_c.max(local);
        }
        let mut sum_t = 0.0;
        for (fi, field) in model.fields.iter().enumerate() {
            let tau = cfg.dist.sample(&mut rng_times);
            let t = cfg.h * tau;
            sum_t += t;
            if t == 0.0 {
                continue;
            }
            if k > 0 {
                let j = flows::advance_with_jacobian(field, &mut x, t, cfg.tol)
                    .map_err(|source| EngineError::Flow { cycle, field: fi, source })?;
                apply_jacobian_rows(&mut frame, field.coords, &j);
            } else {
                flows::advance(field, &mut x, t, cfg.tol)
                    .map_err(|source| EngineError::Flow { cycle, field: fi, source })?;
            }
        }

        let post_burn = cycle >= cfg.burn_in;
        if k > 0 {
            let grads = conserved_frame(model, &x);
            project_frame(&mut frame, &grads);
            let (logs, norm) = qr_renormalize(&mut frame, opts.gronwall);
            if post_burn {
                let idx = cycle - cfg.burn_in;
                let batch = ((idx * BATCHES as u64) / recorded) as usize;
                let mut tot = 0.0;
                for (i, l) in logs.iter().enumerate() {
                    acc[i].push(batch, *l);
                    running[i] += *l;
                    tot += *l;
                }
                acc_sum.push(batch, tot);
                if opts.gronwall {
                    gron.push((norm.ln(), sum_t));
                }
                if trace_every > 0 && (idx + 1) % trace_every == 0 {
                    trace.push(TracePoint {
                        cycle: cycle + 1,
                        exponents: running.iter().map(|s| s / (idx + 1) as f64).collect(),
                    });
                }
            }
        }
        if post_burn && opts.observable {
            let idx = cycle - cfg.burn_in;
            let batch = ((idx * BATCHES as u64) / recorded) as usize;
            acc_obs.push(batch, x[0] * x[0]);
        }
        let q = model.conserved_values(&x);
        for (i, (qi, qi0)) in q.iter().zip(&q0).enumerate() {
            let scale = qi0.abs().max(f64::MIN_POSITIVE);
            drift[i] = drift[i].max((qi - qi0).abs() / scale);
        }
    }

    let mut exponents = Vec::with_capacity(k);
    let mut stderrs = Vec::with_capacity(k);
    for a in &acc {
        let (m, s) = a.finalize();
        exponents.push(m);
        stderrs.push(s);
    }
    let (sum, sum_stderr) = if k > 0 { acc_sum.finalize() } else { (0.0, 0.0) };
    let (obs_mean, obs_stderr) = if opts.observable {
        acc_obs.finalize()
    } else {
        (0.0, 0.0)
    };
    let gronwall = if opts.gronwall && k > 0 {
        let mut violations = 0;
        let mut max_ratio: f64 = 0.0;
        for &(logn, st) in &gron {
            let bound = gron_c * st;
            if logn > bound + 1e-12 {
                violations += 1;
            }
            if bound > 0.0 {
                max_ratio = max_ratio.max(logn / bound);
            }
        }
        Some(GronwallReport {
            violations,
            constant: gron_c,
            max_ratio,
            cycles: gron.len() as u64,
        })
    } else {
        None
    };

    Ok(RunResult {
        exponents,
        stderrs,
        sum,
        sum_stderr,
        drift,
        observable_mean: obs_mean,
        observable_stderr: obs_stderr,
        gronwall,
        trace,
        final_state: x,
        recorded_cycles: recorded,
    })
}

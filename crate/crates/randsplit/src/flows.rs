//! Flow maps for the splitting fields.
//!
//! Every field in both models is a triple-product field
//! `xdot_{c0} = r0 x_{c1} x_{c2}`, `xdot_{c1} = r1 x_{c0} x_{c2}`,
//! `xdot_{c2} = r2 x_{c0} x_{c1}` on three coordinates of the ambient space,
//! with `r0 + r1 + r2 = 0` (norm conservation). When one rate vanishes
//! exactly the third coordinate is frozen and the flow is a rigid rotation
//! with closed-form map and Jacobian; otherwise the flow is a classical
//! spinning top integrated by an adaptive embedded Dormand-Prince 5(4) pair
//! together with its 3x3 variational system.

use nalgebra::Matrix3;

/// Dispatch decided at model-construction time from exact rational rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    /// All rates vanish; the flow is the identity.
    Identity,
    /// `rates[2] = 0`, `rates[1] = -rates[0]`: rotation of the
    /// `(c0, c1)` plane with angular velocity `rates[0] * x_{c2}`.
    Rotation,
    /// All three rates nonzero.
    Top,
}

/// A compiled triple-product field acting on coordinates `coords` of the
/// ambient state with the rates above.
#[derive(Clone, Copy, Debug)]
pub struct CompiledField {
    pub coords: [usize; 3],
    pub rates: [f64; 3],
    pub kind: FlowKind,
}

/// Flow-map failures (only the adaptive integrator can fail).
#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("step size underflow at tolerance {rtol:e} (flow time {t:e})")]
    StepUnderflow { rtol: f64, t: f64 },
    #[error("integrator exceeded {0} steps")]
    MaxSteps(usize),
}

impl CompiledField {
    /// Build a field from its rates; `exact_zero[i]` marks rates that are
    /// exactly zero in the underlying rational arithmetic, which decides the
    /// closed-form dispatch. Coordinates are rotated cyclically so that a
    /// vanishing rate sits in the last slot.
    pub fn new(coords: [usize; 3], rates: [f64; 3], exact_zero: [bool; 3]) -> CompiledField {
        assert!(coords[0] != coords[1] && coords[1] != coords[2] && coords[0] != coords[2]);
        let nzero = exact_zero.iter().filter(|&&z| z).count();
        if nzero >= 2 {
            // r0 + r1 + r2 = 0 forces the remaining rate to vanish as well.
            assert!(rates.iter().zip(exact_zero).all(|(&r, z)| z == (r == 0.0)));
            return CompiledField {
                coords,
                rates: [0.0; 3],
                kind: FlowKind::Identity,
            };
        }
        if nzero == 1 {
            let z = exact_zero.iter().position(|&z| z).unwrap();
            // Cyclic shift putting the frozen coordinate last.
            let rot = |a: [usize; 3], s: usize| [a[s % 3], a[(s + 1) % 3], a[(s + 2) % 3]];
            let rotf = |a: [f64; 3], s: usize| [a[s % 3], a[(s + 1) % 3], a[(s + 2) % 3]];
            let s = (z + 1) % 3;
            let coords = rot(coords, s);
            let mut rates = rotf(rates, s);
            // Norm conservation makes the two active rates exact negatives.
            assert_eq!(rates[0], -rates[1], "rotation rates not antisymmetric");
            rates[1] = -rates[0];
            rates[2] = 0.0;
            return CompiledField {
                coords,
                rates,
                kind: FlowKind::Rotation,
            };
        }
        CompiledField {
            coords,
            rates,
            kind: FlowKind::Top,
        }
    }

    /// The field value on its active coordinates `y = (x_{c0}, x_{c1}, x_{c2})`.
    #[inline]
    pub fn rhs(&self, y: &[f64; 3]) -> [f64; 3] {
        [
            self.rates[0] * y[1] * y[2],
            self.rates[1] * y[0] * y[2],
            self.rates[2] * y[0] * y[1],
        ]
    }

    /// Jacobian of the field (not of the flow) on the active coordinates.
    pub fn rhs_jacobian(&self, y: &[f64; 3]) -> Matrix3<f64> {
        let [r0, r1, r2] = self.rates;
        Matrix3::new(
            0.0,
            r0 * y[2],
            r0 * y[1],
            r1 * y[2],
            0.0,
            r1 * y[0],
            r2 * y[1],
            r2 * y[0],
            0.0,
        )
    }
}

/// 2*pi split into a high and a low double so angle reduction keeps extended
/// precision.
const TWO_PI_HI: f64 = 6.283185307179586;
const TWO_PI_LO: f64 = 2.4492935982947064e-16;

/// Reduce an angle to a representative near zero modulo 2*pi, subtracting
/// the nearest multiple with the split constant.
pub fn reduce_angle(theta: f64) -> f64 {
    let n = (theta / TWO_PI_HI).round();
    (theta - n * TWO_PI_HI) - n * TWO_PI_LO
}

/// Closed-form rotation map on `(y0, y1)` with frozen `y2`:
/// angle `theta = c * y2 * t`, `y0' = y0 cos + y1 sin`,
/// `y1' = -y0 sin + y1 cos`.
fn rotation_map(c: f64, y: &mut [f64; 3], t: f64) -> (f64, f64, f64) {
    let theta = reduce_angle(c * y[2] * t);
    let (s, co) = theta.sin_cos();
    let (y0, y1) = (y[0], y[1]);
    y[0] = y0 * co + y1 * s;
    y[1] = -y0 * s + y1 * co;
    (s, co, theta)
}

/// Dormand-Prince 5(4) coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Embedded error weights (5th minus 4th order solution).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 1_000_000;

/// Integrate the autonomous ODE `ydot = f(y)` from 0 to `t_end > 0` with the
/// Dormand-Prince 5(4) pair (FSAL, PI-free standard controller).
pub fn dopri5<const D: usize>(
    f: impl Fn(&[f64; D]) -> [f64; D],
    y: &mut [f64; D],
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Result<(), FlowError> {
    debug_assert!(t_end >= 0.0);
    let mut t = 0.0;
    let mut k1 = f(y);
    // Initial step from the field magnitude at the starting point.
    let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let fnorm = k1.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut h = if fnorm > 1e-300 {
        (0.1 * (ynorm + atol) / fnorm).min(t_end)
    } else {
        t_end
    };
    let mut ks = [[0.0; D]; 7];
    for _step in 0..MAX_STEPS {
        if t >= t_end {
            return Ok(());
        }
        if h < 1e-14 * t_end {
            return Err(FlowError::StepUnderflow { rtol, t });
        }
        h = h.min(t_end - t);
        ks[0] = k1;
        for s in 0..6 {
            let mut ytmp = *y;
            for (j, kj) in ks.iter().enumerate().take(s + 1) {
                let a = A[s][j];
                if a != 0.0 {
                    for d in 0..D {
                        ytmp[d] += h * a * kj[d];
                    }
                }
            }
            ks[s + 1] = f(&ytmp);
        }
        // 5th order solution is the last stage combination (A[5] row = b).
        let mut ynew = *y;
        for (j, kj) in ks.iter().enumerate().take(6) {
            let a = A[5][j];
            if a != 0.0 {
                for d in 0..D {
                    ynew[d] += h * a * kj[d];
                }
            }
        }
        // ks[6] = f(ynew) was already computed as the 7th stage.
        let mut errsq = 0.0;
        for d in 0..D {
            let mut e = 0.0;
            for (j, kj) in ks.iter().enumerate() {
                e += E[j] * kj[d];
            }
            e *= h;
            let sc = atol + rtol * y[d].abs().max(ynew[d].abs());
            errsq += (e / sc) * (e / sc);
        }
        let err = (errsq / D as f64).sqrt();
        if err <= 1.0 {
            t += h;
            *y = ynew;
            k1 = ks[6];
        }
        let fac = if err > 1e-30 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= fac;
    }
    Err(FlowError::MaxSteps(MAX_STEPS))
}

/// Dynamic-dimension variant of [`dopri5`] for reference trajectories of the
/// full drift fields (dimension only known at run time).
pub fn dopri5_dyn(
    f: impl Fn(&[f64], &mut [f64]),
    y: &mut [f64],
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Result<(), FlowError> {
    debug_assert!(t_end >= 0.0);
    let d = y.len();
    let mut t = 0.0;
    let mut ks = vec![vec![0.0; d]; 7];
    let mut ytmp = vec![0.0; d];
    let mut ynew = vec![0.0; d];
    let mut k1 = vec![0.0; d];
    f(y, &mut k1);
    let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let fnorm = k1.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut h = if fnorm > 1e-300 {
        (0.1 * (ynorm + atol) / fnorm).min(t_end)
    } else {
        t_end
    };
    for _step in 0..MAX_STEPS {
        if t >= t_end {
            return Ok(());
        }
        if h < 1e-14 * t_end {
            return Err(FlowError::StepUnderflow { rtol, t });
        }
        h = h.min(t_end - t);
        ks[0].copy_from_slice(&k1);
        for s in 0..6 {
            ytmp.copy_from_slice(y);
            for (j, kj) in ks.iter().enumerate().take(s + 1) {
                let a = A[s][j];
                if a != 0.0 {
                    for dd in 0..d {
                        ytmp[dd] += h * a * kj[dd];
                    }
                }
            }
            let (head, tail) = ks.split_at_mut(s + 1);
            let _ = head;
            f(&ytmp, &mut tail[0]);
        }
        ynew.copy_from_slice(y);
        for (j, kj) in ks.iter().enumerate().take(6) {
            let a = A[5][j];
            if a != 0.0 {
                for dd in 0..d {
                    ynew[dd] += h * a * kj[dd];
                }
            }
        }
        let mut errsq = 0.0;
        for dd in 0..d {
            let mut e = 0.0;
            for (j, kj) in ks.iter().enumerate() {
                e += E[j] * kj[dd];
            }
            e *= h;
            let sc = atol + rtol * y[dd].abs().max(ynew[dd].abs());
            errsq += (e / sc) * (e / sc);
        }
        let err = (errsq / d as f64).sqrt();
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&ynew);
            k1.copy_from_slice(&ks[6]);
        }
        let fac = if err > 1e-30 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= fac;
    }
    Err(FlowError::MaxSteps(MAX_STEPS))
}

/// Advance the active coordinates of `field` by flow time `t >= 0`.
/// `tol` is the relative tolerance of the adaptive integrator (absolute
/// tolerance is `tol * 1e-2`); ignored by the closed-form branches.
pub fn advance(field: &CompiledField, x: &mut [f64], t: f64, tol: f64) -> Result<(), FlowError> {
    let [c0, c1, c2] = field.coords;
    match field.kind {
        FlowKind::Identity => Ok(()),
        FlowKind::Rotation => {
            let mut y = [x[c0], x[c1], x[c2]];
            rotation_map(field.rates[0], &mut y, t);
            x[c0] = y[0];
            x[c1] = y[1];
            Ok(())
        }
        FlowKind::Top => {
            let mut y = [x[c0], x[c1], x[c2]];
            // Negative times integrate the reversed field.
            let sgn = if t < 0.0 { -1.0 } else { 1.0 };
            dopri5(
                |v| {
                    let mut d = field.rhs(v);
                    for e in &mut d {
                        *e *= sgn;
                    }
                    d
                },
                &mut y,
                t.abs(),
                tol,
                tol * 1e-2,
            )?;
            x[c0] = y[0];
            x[c1] = y[1];
            x[c2] = y[2];
            Ok(())
        }
    }
}

/// Advance the active coordinates and return the 3x3 Jacobian of the flow
/// map restricted to them (the ambient Jacobian is the identity elsewhere).
pub fn advance_with_jacobian(
    field: &CompiledField,
    x: &mut [f64],
    t: f64,
    tol: f64,
) -> Result<Matrix3<f64>, FlowError> {
    let [c0, c1, c2] = field.coords;
    match field.kind {
        FlowKind::Identity => Ok(Matrix3::identity()),
        FlowKind::Rotation => {
            let c = field.rates[0];
            let mut y = [x[c0], x[c1], x[c2]];
            let (y0, y1) = (y[0], y[1]);
            let (s, co, _) = rotation_map(c, &mut y, t);
            x[c0] = y[0];
            x[c1] = y[1];
            // d theta / d y2 = c t; the rotated pair picks up a shear column.
            let ct = c * t;
            Ok(Matrix3::new(
                co,
                s,
                ct * (-y0 * s + y1 * co),
                -s,
                co,
                -ct * (y0 * co + y1 * s),
                0.0,
                0.0,
                1.0,
            ))
        }
        FlowKind::Top => {
            // Augmented system: state plus the variational matrix J, column
            // major in slots 3..12, Jdot = Df(x) J, J(0) = I.
            let mut z = [0.0; 12];
            z[0] = x[c0];
            z[1] = x[c1];
            z[2] = x[c2];
            z[3] = 1.0;
            z[7] = 1.0;
            z[11] = 1.0;
            // Negative times integrate the reversed field.
            let sgn = if t < 0.0 { -1.0 } else { 1.0 };
            let [r0, r1, r2] = [
                sgn * field.rates[0],
                sgn * field.rates[1],
                sgn * field.rates[2],
            ];
            dopri5(
                |v| {
                    let mut dz = [0.0; 12];
                    dz[0] = r0 * v[1] * v[2];
                    dz[1] = r1 * v[0] * v[2];
                    dz[2] = r2 * v[0] * v[1];
                    for col in 0..3 {
                        let j0 = v[3 + 3 * col];
                        let j1 = v[4 + 3 * col];
                        let j2 = v[5 + 3 * col];
                        dz[3 + 3 * col] = r0 * (v[2] * j1 + v[1] * j2);
                        dz[4 + 3 * col] = r1 * (v[2] * j0 + v[0] * j2);
                        dz[5 + 3 * col] = r2 * (v[1] * j0 + v[0] * j1);
                    }
                    dz
                },
                &mut z,
                t.abs(),
                tol,
                tol * 1e-2,
            )?;
            x[c0] = z[0];
            x[c1] = z[1];
            x[c2] = z[2];
            Ok(Matrix3::new(
                z[3], z[6], z[9], z[4], z[7], z[10], z[5], z[8], z[11],
            ))
        }
    }
}

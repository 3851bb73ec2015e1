//! Model construction: the conservative Lorenz-96 splitting family and the
//! Galerkin-truncated 2D Euler triad family on the half lattice.
//!
//! Euler modes live on the half lattice `{k : |k|_inf <= N, k2 > 0 or
//! (k2 = 0 and k1 > 0)}` with reality conditions `a_{-k} = a_k`,
//! `b_{-k} = -b_k`; the state is the 4N(N+1) reals `(a_k, b_k)`. Coupling
//! constants are kept as exact rationals with the common 1/(4*pi) factored
//! into the field scale.

use crate::flows::CompiledField;
use crate::vecfield::{ratio, PolyVectorField};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet};

/// A lattice wavevector.
pub type Mode = (i32, i32);

/// Local variable order of a triad field: `(a_j, b_j, a_k, b_k, a_l, b_l)`.
pub const AJ: usize = 0;
pub const BJ: usize = 1;
pub const AK: usize = 2;
pub const BK: usize = 3;
pub const AL: usize = 4;
pub const BL: usize = 5;

fn norm2(m: Mode) -> i64 {
    (m.0 as i64) * (m.0 as i64) + (m.1 as i64) * (m.1 as i64)
}

/// Interaction constant `4*pi*C_{jk} = <j, k_perp> (1/|j|^2 - 1/|k|^2)` with
/// `k_perp = (k2, -k1)`, as an exact rational. Symmetric in its arguments;
/// zero exactly when `j`, `k` are collinear or `|j| = |k|`.
pub fn coupling_constant(j: Mode, k: Mode) -> BigRational {
    let cross = (j.0 as i64) * (k.1 as i64) - (j.1 as i64) * (k.0 as i64);
    let (nj, nk) = (norm2(j), norm2(k));
    assert!(nj != 0 && nk != 0, "coupling constant needs nonzero wavevectors");
    BigRational::new(BigInt::from(cross * (nk - nj)), BigInt::from(nj * nk))
}

/// Half-lattice representative of `v` and the sign carrying `v` onto it.
pub fn representative(v: Mode) -> (Mode, i32) {
    if v.1 < 0 || (v.1 == 0 && v.0 < 0) {
        ((-v.0, -v.1), -1)
    } else {
        (v, 1)
    }
}

/// Half-lattice modes for truncation radius `n_trunc`, row-major
/// (by `k2`, then `k1`). Length `2 * n_trunc * (n_trunc + 1)`.
pub fn half_lattice(n_trunc: i32) -> Vec<Mode> {
    let mut out = Vec::new();
    for k2 in 0..=n_trunc {
        for k1 in -n_trunc..=n_trunc {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            out.push((k1, k2));
        }
    }
    out
}

/// An interacting triple of half-lattice representatives `(j, k, l)` together
/// with signs `eps` such that `eps_1 j + eps_2 k + eps_3 l = 0` on the full
/// lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triad {
    pub j: Mode,
    pub k: Mode,
    pub l: Mode,
    pub signs: [i32; 3],
}

impl Triad {
    /// Construct from representatives, solving for the closure signs.
    pub fn new(j: Mode, k: Mode, l: Mode) -> Option<Triad> {
        for s in 0..8u32 {
            let e = [
                if s & 4 == 0 { 1 } else { -1 },
                if s & 2 == 0 { 1 } else { -1 },
                if s & 1 == 0 { 1 } else { -1 },
            ];
            if e[0] * j.0 + e[1] * k.0 + e[2] * l.0 == 0
                && e[0] * j.1 + e[1] * k.1 + e[2] * l.1 == 0
            {
                return Some(Triad { j, k, l, signs: e });
            }
        }
        None
    }

    /// The signed (actual) wavevectors, which sum to zero.
    pub fn actual(&self) -> [Mode; 3] {
        let s = self.signs;
        [
            (s[0] * self.j.0, s[0] * self.j.1),
            (s[1] * self.k.0, s[1] * self.k.1),
            (s[2] * self.l.0, s[2] * self.l.1),
        ]
    }

    /// Interaction constants `(4*pi*C_jk, 4*pi*C_jl, 4*pi*C_kl)` evaluated at
    /// the signed wavevectors.
    pub fn constants(&self) -> [BigRational; 3] {
        let [ja, ka, la] = self.actual();
        [
            coupling_constant(ja, ka),
            coupling_constant(ja, la),
            coupling_constant(ka, la),
        ]
    }
}

/// The four interaction fields of a triad in local coordinates
/// `(a_j, b_j, a_k, b_k, a_l, b_l)`, as exact polynomial fields with scale
/// `1/(4*pi)`. Negative-sign entries of the triad are mapped through the
/// conjugation `a_{-k} = a_k`, `b_{-k} = -b_k`, which multiplies the `b`
/// couplings by the corresponding sign products. Each field conserves both
/// the Euclidean norm and the energy of the triad and is divergence free.
pub fn triad_fields(t: &Triad) -> [PolyVectorField; 4] {
    let [jk, jl, kl] = t.constants();
    let [e1, e2, e3] = t.signs;
    let s23 = BigRational::from(BigInt::from((e2 * e3) as i64));
    let s13 = BigRational::from(BigInt::from((e1 * e3) as i64));
    let s12 = BigRational::from(BigInt::from((e1 * e2) as i64));

    let mut v1 = PolyVectorField::zero(6, 1);
    v1.add_term(AJ, &[AK as u32, AL as u32], -kl.clone());
    v1.add_term(AK, &[AJ as u32, AL as u32], -jl.clone());
    v1.add_term(AL, &[AJ as u32, AK as u32], -jk.clone());

    let mut v2 = PolyVectorField::zero(6, 1);
    v2.add_term(AJ, &[BK as u32, BL as u32], &s23 * &kl);
    v2.add_term(BK, &[AJ as u32, BL as u32], &s23 * &jl);
    v2.add_term(BL, &[AJ as u32, BK as u32], &s23 * &jk);

    let mut v3 = PolyVectorField::zero(6, 1);
    v3.add_term(BJ, &[AK as u32, BL as u32], &s13 * &kl);
    v3.add_term(AK, &[BJ as u32, BL as u32], &s13 * &jl);
    v3.add_term(BL, &[BJ as u32, AK as u32], &s13 * &jk);

    let mut v4 = PolyVectorField::zero(6, 1);
    v4.add_term(BJ, &[BK as u32, AL as u32], &s12 * &kl);
    v4.add_term(BK, &[BJ as u32, AL as u32], &s12 * &jl);
    v4.add_term(AL, &[BJ as u32, BK as u32], &s12 * &jk);

    [v1, v2, v3, v4]
}

/// Ordered triad enumeration used by the certifier. The first triad
/// introduces three modes; every later triad reuses two known modes and
/// introduces exactly one new one, which makes the bracket matrix block lower
/// triangular. Covers the whole half lattice.
pub struct CertEnumeration {
    pub triads: Vec<Triad>,
    /// Modes in order of introduction; `mode_order[0..3]` come from triad 0,
    /// `mode_order[i + 2]` is the new mode of triad `i` for `i >= 1`.
    pub mode_order: Vec<Mode>,
    pub index: BTreeMap<Mode, usize>,
}

/// Build the certification enumeration for truncation radius `n_trunc >= 3`.
pub fn enumerate_triads(n_trunc: i32) -> CertEnumeration {
    let n = n_trunc;
    assert!(n >= 3, "certification enumeration requires truncation >= 3");
    let mut triples: Vec<(Mode, Mode, Mode)> = Vec::new();
    triples.push(((1, 0), (-n, 1), (-n + 1, 1)));
    for i in 1..=(n - 2) {
        triples.push(((1, 0), (-n + i, 1), (-n + i + 1, 1)));
    }
    triples.push(((-1, 1), (-3, 1), (2, 0)));
    triples.push(((2, 0), (-2, 1), (0, 1)));
    triples.push(((0, 1), (2, 0), (2, 1)));
    triples.push(((1, 0), (2, 1), (1, 1)));
    for i in (n + 3)..=(2 * n) {
        triples.push(((1, 0), (-n + i - 1, 1), (-n + i, 1)));
    }
    // Remaining row-0 modes (3,0)..(n,0).
    for c in 3..=n {
        triples.push(((0, 1), (-c, 1), (c, 0)));
    }
    // Rows 2..n: a bridge introducing (-n, r), then a sweep along the row.
    for r in 2..=n {
        triples.push(((0, 1), (-n, r - 1), (-n, r)));
        for c in -n..n {
            triples.push(((1, 0), (c, r), (c + 1, r)));
        }
    }

    let mut triads = Vec::with_capacity(triples.len());
    let mut mode_order = Vec::new();
    let mut index = BTreeMap::new();
    for (pos, (j, k, l)) in triples.iter().copied().enumerate() {
        let t = Triad::new(j, k, l)
            .unwrap_or_else(|| panic!("triad {:?} does not close", (j, k, l)));
        if pos == 0 {
            for m in [j, k, l] {
                index.insert(m, mode_order.len());
                mode_order.push(m);
            }
        } else {
            assert!(index.contains_key(&j) && index.contains_key(&k));
            assert!(
                !index.contains_key(&l),
                "mode {:?} introduced twice at triad {}",
                l,
                pos
            );
            index.insert(l, mode_order.len());
            mode_order.push(l);
        }
        triads.push(t);
    }
    let lattice: BTreeSet<Mode> = half_lattice(n).into_iter().collect();
    let covered: BTreeSet<Mode> = mode_order.iter().copied().collect();
    assert_eq!(lattice, covered, "enumeration does not cover the half lattice");
    assert_eq!(triads.len(), (2 * n * (n + 1) - 2) as usize);
    CertEnumeration {
        triads,
        mode_order,
        index,
    }
}

/// All interacting triples of the truncation, one per equivalence class of
/// unordered full-lattice triples `{u, v, w}` with `u + v + w = 0` modulo
/// global sign. Collinear triples are skipped: every coupling constant of a
/// collinear triple vanishes. Deterministic order.
pub fn all_triads(n_trunc: i32) -> Vec<Triad> {
    let n = n_trunc;
    let mut lattice = Vec::new();
    for k1 in -n..=n {
        for k2 in -n..=n {
            if (k1, k2) != (0, 0) {
                lattice.push((k1, k2));
            }
        }
    }
    let inside = |m: Mode| m.0.abs() <= n && m.1.abs() <= n && m != (0, 0);
    let mut seen: BTreeSet<[Mode; 3]> = BTreeSet::new();
    let mut out = Vec::new();
    for (i, &u) in lattice.iter().enumerate() {
        for &v in lattice.iter().skip(i + 1) {
            let w = (-u.0 - v.0, -u.1 - v.1);
            if !inside(w) {
                continue;
            }
            if (u.0 as i64) * (v.1 as i64) - (u.1 as i64) * (v.0 as i64) == 0 {
                continue;
            }
            let mut tri = [u, v, w];
            tri.sort_unstable();
            let mut neg = [(-u.0, -u.1), (-v.0, -v.1), (-w.0, -w.1)];
            neg.sort_unstable();
            let key = tri.min(neg);
            if !seen.insert(key) {
                continue;
            }
            // Canonical representatives ordered by (k2, k1).
            let mut reps: Vec<(Mode, i32)> = tri.iter().map(|&m| representative(m)).collect();
            reps.sort_unstable_by_key(|&((k1, k2), _)| (k2, k1));
            let t = Triad::new(reps[0].0, reps[1].0, reps[2].0)
                .expect("class representative does not close");
            out.push(t);
        }
    }
    out
}

/// The Lorenz-96 splitting fields `V_j(x) = x_{j-1} (x_{j+1} e_j - x_j e_{j+1})`
/// with periodic indices, as exact polynomial fields on `R^n`.
pub fn build_lorenz_splitting(n: usize) -> Vec<PolyVectorField> {
    assert!(n >= 4, "Lorenz-96 splitting requires n >= 4");
    (0..n)
        .map(|j| {
            let jm = (j + n - 1) % n;
            let jp = (j + 1) % n;
            let mut v = PolyVectorField::zero(n, 0);
            v.add_term(j, &[jm as u32, jp as u32], ratio(1, 1));
            v.add_term(jp, &[jm as u32, j as u32], ratio(-1, 1));
            v
        })
        .collect()
}

/// The conservative Lorenz-96 drift `V(x)_j = (x_{j+1} - x_{j-2}) x_{j-1}`.
pub fn lorenz_drift_field(n: usize) -> PolyVectorField {
    let mut v = PolyVectorField::zero(n, 0);
    for j in 0..n {
        let jm1 = (j + n - 1) % n;
        let jm2 = (j + n - 2) % n;
        let jp1 = (j + 1) % n;
        v.add_term(j, &[jp1 as u32, jm1 as u32], ratio(1, 1));
        v.add_term(j, &[jm2 as u32, jm1 as u32], ratio(-1, 1));
    }
    v
}

/// The Galerkin-truncated Euler field in half-lattice coordinates, built
/// independently of the triad decomposition by expanding
/// `qdot_j = -sum_{k+l=-j} C_{kl} conj(q_k) conj(q_l)` over the full lattice.
/// Serves as the oracle for the splitting-sum identity.
pub fn euler_galerkin_field(n_trunc: i32) -> PolyVectorField {
    let n = n_trunc;
    let modes = half_lattice(n);
    let index: BTreeMap<Mode, usize> = modes.iter().copied().enumerate().map(|(i, m)| (m, i)).collect();
    let inside = |m: Mode| m.0.abs() <= n && m.1.abs() <= n && m != (0, 0);
    let mut field = PolyVectorField::zero(2 * modes.len(), 1);
    let a = |m: usize| 2 * m as u32;
    let b = |m: usize| 2 * m as u32 + 1;
    for (ir, &r) in modes.iter().enumerate() {
        for k1 in -n..=n {
            for k2 in -n..=n {
                let k = (k1, k2);
                if !inside(k) {
                    continue;
                }
                let l = (-r.0 - k.0, -r.1 - k.1);
                if !inside(l) {
                    continue;
                }
                let c = coupling_constant(k, l);
                if c.is_zero() {
                    continue;
                }
                let (rk, ek) = representative(k);
                let (rl, el) = representative(l);
                let (ik, il) = (index[&rk], index[&rl]);
                let sk = BigRational::from(BigInt::from(ek as i64));
                let sl = BigRational::from(BigInt::from(el as i64));
                // conj(q_k) conj(q_l) = (a_k a_l - ek el b_k b_l)
                //                     - i (el a_k b_l + ek b_k a_l)
                field.add_term(2 * ir, &[a(ik), a(il)], -c.clone());
                field.add_term(2 * ir, &[b(ik), b(il)], &(&sk * &sl) * &c);
                field.add_term(2 * ir + 1, &[a(ik), b(il)], &sl * &c);
                field.add_term(2 * ir + 1, &[b(ik), a(il)], &sk * &c);
            }
        }
    }
    field
}

/// A splitting model compiled for simulation: every field is a triple-product
/// field `xdot_{c0} = r0 x_{c1} x_{c2}` (cyclically), flowed in closed form
/// when degenerate and by an adaptive embedded Runge-Kutta pair otherwise.
pub struct SplitModel {
    pub name: String,
    pub dim: usize,
    pub fields: Vec<CompiledField>,
    /// Quadratic first integrals `Q(x) = sum_i w_i x_i^2`, one weight vector
    /// per conserved quantity. The tangent space of the orbit manifold is the
    /// orthogonal complement of their gradients.
    pub conserved: Vec<Vec<f64>>,
    /// Default initial condition used by the driver.
    pub initial: Vec<f64>,
}

impl SplitModel {
    pub fn tangent_dim(&self) -> usize {
        self.dim - self.conserved.len()
    }

    pub fn conserved_values(&self, x: &[f64]) -> Vec<f64> {
        self.conserved
            .iter()
            .map(|w| w.iter().zip(x).map(|(wi, xi)| wi * xi * xi).sum())
            .collect()
    }
}

/// Compile the Lorenz-96 splitting on the sphere of radius `radius`. The
/// default initial condition is a generic point assembled from the radius.
pub fn lorenz_model(n: usize, radius: f64) -> SplitModel {
    assert!(n >= 4);
    let fields = (0..n)
        .map(|j| {
            let jm = (j + n - 1) % n;
            let jp = (j + 1) % n;
            CompiledField::new([j, jp, jm], [1.0, -1.0, 0.0], [false, false, true])
        })
        .collect();
    // Deterministic generic initial point: all coordinates distinct and
    // nonzero, scaled onto the sphere.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (i as f64 + 1.0).sin()).collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut x {
        *v *= radius / norm;
    }
    assert!(lorenz_genericity(&x).1, "initial point not generic");
    SplitModel {
        name: format!("lorenz(n={n})"),
        dim: n,
        fields,
        conserved: vec![vec![1.0; n]],
        initial: x,
    }
}

/// Compile the full Euler triad family for truncation radius `n_trunc`.
/// Each sign class carries its four fields scaled by 2 so the family sums to
/// the Galerkin field exactly. `initial` must be supplied by the caller
/// (typically the nondegenerate point with prescribed enstrophy and energy).
pub fn euler_model(n_trunc: i32, initial: Vec<f64>) -> SplitModel {
    let modes = half_lattice(n_trunc);
    let index: BTreeMap<Mode, usize> = modes.iter().copied().enumerate().map(|(i, m)| (m, i)).collect();
    assert_eq!(initial.len(), 2 * modes.len());
    let scale = 2.0 / (4.0 * std::f64::consts::PI);
    let mut fields = Vec::new();
    for t in all_triads(n_trunc) {
        let [jk, jl, kl] = t.constants();
        let zero = [kl.is_zero(), jl.is_zero(), jk.is_zero()];
        let rkl = kl.to_f64().unwrap() * scale;
        let rjl = jl.to_f64().unwrap() * scale;
        let rjk = jk.to_f64().unwrap() * scale;
        let (ij, ik, il) = (index[&t.j], index[&t.k], index[&t.l]);
        let (aj, bj) = (2 * ij, 2 * ij + 1);
        let (ak, bk) = (2 * ik, 2 * ik + 1);
        let (al, bl) = (2 * il, 2 * il + 1);
        let s23 = (t.signs[1] * t.signs[2]) as f64;
        let s13 = (t.signs[0] * t.signs[2]) as f64;
        let s12 = (t.signs[0] * t.signs[1]) as f64;
        fields.push(CompiledField::new([aj, ak, al], [-rkl, -rjl, -rjk], zero));
        fields.push(CompiledField::new(
            [aj, bk, bl],
            [s23 * rkl, s23 * rjl, s23 * rjk],
            zero,
        ));
        fields.push(CompiledField::new(
            [bj, ak, bl],
            [s13 * rkl, s13 * rjl, s13 * rjk],
            zero,
        ));
        fields.push(CompiledField::new(
            [bj, bk, al],
            [s12 * rkl, s12 * rjl, s12 * rjk],
            zero,
        ));
    }
    let enstrophy = vec![1.0; 2 * modes.len()];
    let mut energy = Vec::with_capacity(2 * modes.len());
    for &m in &modes {
        let w = 1.0 / norm2(m) as f64;
        energy.push(w);
        energy.push(w);
    }
    SplitModel {
        name: format!("euler(N={n_trunc})"),
        dim: 2 * modes.len(),
        fields,
        conserved: vec![enstrophy, energy],
        initial,
    }
}

/// Genericity functional for a Lorenz state:
/// `sum_j (x_j^2 + x_{j+1}^2) x_{j-1}^2`, compared against `1e-14 ||x||^4`.
/// Returns the value and whether the point is generic.
pub fn lorenz_genericity(x: &[f64]) -> (f64, bool) {
    let n = x.len();
    let mut s = 0.0;
    for j in 0..n {
        let jm = (j + n - 1) % n;
        let jp = (j + 1) % n;
        s += (x[j] * x[j] + x[jp] * x[jp]) * x[jm] * x[jm];
    }
    let nrm2 = x.iter().map(|v| v * v).sum::<f64>();
    (s, s > 1e-14 * nrm2 * nrm2)
}

/// Practical genericity for an Euler state: every coordinate bounded away
/// from zero relative to the root-mean-square amplitude.
pub fn euler_genericity(x: &[f64]) -> bool {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    x.iter().all(|v| v.abs() > 1e-14 * rms)
}

//! Sparse polynomial vector fields with exact rational coefficients.
//!
//! Every field in this crate (Lorenz-96 rotations, Euler triad interactions,
//! their tangent lifts and iterated Lie brackets) is polynomial with rational
//! coefficients once the common factor 1/(4*pi) of the Euler coupling
//! constants is pulled out. Fields therefore store a `scale_pow` recording the
//! power of 1/(4*pi) multiplying all of their terms, and keep the remaining
//! coefficients as exact `BigRational`s. Brackets, sums and tangent lifts stay
//! exact; floating point only enters when a field is evaluated at a point.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{ToPrimitive, Zero};
use std::collections::BTreeMap;

/// A monomial, stored as the sorted multiset of its variable indices.
/// `x0^2 * x3` is `[0, 0, 3]`; the empty list is the constant monomial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn new(mut vars: Vec<u32>) -> Self {
        vars.sort_unstable();
        Monomial(vars)
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|&v| x[v as usize]).product()
    }

    /// Product of two monomials.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Monomial::new(v)
    }
}

/// One component of a field: monomial -> coefficient, zero coefficients pruned.
pub type Polynomial = BTreeMap<Monomial, BigRational>;

fn poly_add_term(p: &mut Polynomial, m: Monomial, c: BigRational) {
    if c.is_zero() {
        return;
    }
    use std::collections::btree_map::Entry;
    match p.entry(m) {
        Entry::Vacant(e) => {
            e.insert(c);
        }
        Entry::Occupied(mut e) => {
            *e.get_mut() += c;
            if e.get().is_zero() {
                e.remove();
            }
        }
    }
}

fn poly_partial(p: &Polynomial, var: u32) -> Polynomial {
    let mut out = Polynomial::new();
    for (m, c) in p {
        let mult = m.0.iter().filter(|&&v| v == var).count();
        if mult == 0 {
            continue;
        }
        let mut reduced = m.0.clone();
        let pos = reduced.iter().position(|&v| v == var).unwrap();
        reduced.remove(pos);
        poly_add_term(
            &mut out,
            Monomial(reduced),
            c * BigRational::from(BigInt::from(mult as i64)),
        );
    }
    out
}

fn poly_eval(p: &Polynomial, x: &[f64]) -> f64 {
    p.iter()
        .map(|(m, c)| c.to_f64().expect("rational out of f64 range") * m.eval(x))
        .sum()
}

/// A polynomial vector field on `R^dim`, with an implicit overall factor
/// `(1/(4*pi))^scale_pow` applied uniformly to every component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyVectorField {
    pub dim: usize,
    pub scale_pow: u32,
    pub comps: Vec<Polynomial>,
}

/// Errors from structurally invalid field combinations.
#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("scale mismatch: (1/4pi)^{0} vs (1/4pi)^{1}")]
    ScaleMismatch(u32, u32),
}

impl PolyVectorField {
    pub fn zero(dim: usize, scale_pow: u32) -> Self {
        PolyVectorField {
            dim,
            scale_pow,
            comps: vec![Polynomial::new(); dim],
        }
    }

    /// Add `coeff * prod(x[vars])` to component `comp`.
    pub fn add_term(&mut self, comp: usize, vars: &[u32], coeff: BigRational) {
        poly_add_term(&mut self.comps[comp], Monomial::new(vars.to_vec()), coeff);
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|p| p.is_empty())
    }

    /// The overall scalar factor `(1/(4*pi))^scale_pow` as a double.
    pub fn scale_factor(&self) -> f64 {
        (1.0 / (4.0 * std::f64::consts::PI)).powi(self.scale_pow as i32)
    }

    /// Evaluate the field at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        let s = self.scale_factor();
        self.comps.iter().map(|p| s * poly_eval(p, x)).collect()
    }

    /// Exact partial derivative field `d/dx_var` applied componentwise.
    pub fn partial(&self, var: u32) -> PolyVectorField {
        PolyVectorField {
            dim: self.dim,
            scale_pow: self.scale_pow,
            comps: self.comps.iter().map(|p| poly_partial(p, var)).collect(),
        }
    }

    /// Jacobian matrix DV(x), row i = gradient of component i.
    pub fn jacobian_at(&self, x: &[f64]) -> nalgebra::DMatrix<f64> {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        let s = self.scale_factor();
        let mut j = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for (i, p) in self.comps.iter().enumerate() {
            for v in 0..self.dim {
                let d = poly_partial(p, v as u32);
                if !d.is_empty() {
                    j[(i, v)] = s * poly_eval(&d, x);
                }
            }
        }
        j
    }

    /// Exact sum; both fields must share dimension and scale power.
    pub fn add(&self, other: &PolyVectorField) -> Result<PolyVectorField, FieldError> {
        if self.dim != other.dim {
            return Err(FieldError::DimensionMismatch(self.dim, other.dim));
        }
        if self.scale_pow != other.scale_pow {
            return Err(FieldError::ScaleMismatch(self.scale_pow, other.scale_pow));
        }
        let mut out = self.clone();
        for (i, p) in other.comps.iter().enumerate() {
            for (m, c) in p {
                poly_add_term(&mut out.comps[i], m.clone(), c.clone());
            }
        }
        Ok(out)
    }

    /// Exact Lie bracket `[V, W] = DW V - DV W`. Scale powers add.
    pub fn lie_bracket(&self, other: &PolyVectorField) -> Result<PolyVectorField, FieldError> {
        if self.dim != other.dim {
            return Err(FieldError::DimensionMismatch(self.dim, other.dim));
        }
        let mut out = PolyVectorField::zero(self.dim, self.scale_pow + other.scale_pow);
        for i in 0..self.dim {
            for v in 0..self.dim {
                // (DW V)_i: dW_i/dx_v * V_v
                let dw = poly_partial(&other.comps[i], v as u32);
                for (m1, c1) in &dw {
                    for (m2, c2) in &self.comps[v] {
                        poly_add_term(&mut out.comps[i], m1.mul(m2), c1 * c2);
                    }
                }
                // -(DV W)_i
                let dv = poly_partial(&self.comps[i], v as u32);
                for (m1, c1) in &dv {
                    for (m2, c2) in &other.comps[v] {
                        poly_add_term(&mut out.comps[i], m1.mul(m2), -(c1 * c2));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Tangent lift to `R^{2 dim}` with interleaved coordinates
    /// `(x_1, eta_1, x_2, eta_2, ...)`: the state block is the original field,
    /// the tangent block is `DV(x) eta`.
    pub fn lift(&self) -> PolyVectorField {
        let mut out = PolyVectorField::zero(2 * self.dim, self.scale_pow);
        let rename = |m: &Monomial| Monomial::new(m.0.iter().map(|&v| 2 * v).collect());
        for (i, p) in self.comps.iter().enumerate() {
            for (m, c) in p {
                poly_add_term(&mut out.comps[2 * i], rename(m), c.clone());
            }
            for v in 0..self.dim {
                let d = poly_partial(p, v as u32);
                for (m, c) in &d {
                    let lifted = rename(m).mul(&Monomial(vec![2 * v as u32 + 1]));
                    poly_add_term(&mut out.comps[2 * i + 1], lifted, c.clone());
                }
            }
        }
        out
    }

    /// Embed into a larger space, sending local variable `i` to
    /// `var_map[i]` and local component `i` to component `var_map[i]`.
    pub fn embed(&self, dim: usize, var_map: &[usize]) -> PolyVectorField {
        assert_eq!(var_map.len(), self.dim);
        assert!(var_map.iter().all(|&v| v < dim));
        let mut out = PolyVectorField::zero(dim, self.scale_pow);
        for (i, p) in self.comps.iter().enumerate() {
            for (m, c) in p {
                let mapped = Monomial::new(m.0.iter().map(|&v| var_map[v as usize] as u32).collect());
                poly_add_term(&mut out.comps[var_map[i]], mapped, c.clone());
            }
        }
        out
    }
}

/// Convenience constructor for small rational coefficients.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

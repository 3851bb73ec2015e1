//! Exact algebra of sparse polynomial vector fields.

use num::Zero;
use proptest::prelude::*;
use randsplit::vecfield::{ratio, Monomial, PolyVectorField};

const DIM: usize = 4;

/// A random sparse quadratic field on R^4 with small integer coefficients.
fn field_strategy() -> impl Strategy<Value = PolyVectorField> {
    let term = (
        0..DIM,
        proptest::collection::vec(0..DIM as u32, 0..=2),
        -3i64..=3,
    );
    proptest::collection::vec(term, 1..5).prop_map(|terms| {
        let mut f = PolyVectorField::zero(DIM, 0);
        for (comp, vars, c) in terms {
            f.add_term(comp, &vars, ratio(c, 1));
        }
        f
    })
}

fn neg(f: &PolyVectorField) -> PolyVectorField {
    let mut out = PolyVectorField::zero(f.dim, f.scale_pow);
    for (i, p) in f.comps.iter().enumerate() {
        for (m, c) in p {
            out.add_term(i, &m.0, -c.clone());
        }
    }
    out
}

proptest! {
    #[test]
    fn bracket_antisymmetric(v in field_strategy(), w in field_strategy()) {
        let vw = v.lie_bracket(&w).unwrap();
        let wv = w.lie_bracket(&v).unwrap();
        prop_assert_eq!(vw, neg(&wv));
    }

    #[test]
    fn bracket_bilinear(u in field_strategy(), v in field_strategy(), w in field_strategy()) {
        // [u + v, w] = [u, w] + [v, w], exactly.
        let lhs = u.add(&v).unwrap().lie_bracket(&w).unwrap();
        let rhs = u.lie_bracket(&w).unwrap().add(&v.lie_bracket(&w).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn jacobi_identity(u in field_strategy(), v in field_strategy(), w in field_strategy()) {
        let a = u.lie_bracket(&v.lie_bracket(&w).unwrap()).unwrap();
        let b = v.lie_bracket(&w.lie_bracket(&u).unwrap()).unwrap();
        let c = w.lie_bracket(&u.lie_bracket(&v).unwrap()).unwrap();
        prop_assert!(a.add(&b).unwrap().add(&c).unwrap().is_zero());
    }

    #[test]
    fn lift_commutes_with_bracket(v in field_strategy(), w in field_strategy()) {
        // The tangent lift is a Lie algebra morphism.
        let lifted_bracket = v.lie_bracket(&w).unwrap().lift();
        let bracket_of_lifts = v.lift().lie_bracket(&w.lift()).unwrap();
        prop_assert_eq!(lifted_bracket, bracket_of_lifts);
    }

    #[test]
    fn jacobian_matches_finite_differences(
        v in field_strategy(),
        x in proptest::collection::vec(-2.0..2.0f64, DIM),
    ) {
        let j = v.jacobian_at(&x);
        let eps = 1e-6;
        for col in 0..DIM {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[col] += eps;
            xm[col] -= eps;
            let fp = v.evaluate(&xp);
            let fm = v.evaluate(&xm);
            for row in 0..DIM {
                let fd = (fp[row] - fm[row]) / (2.0 * eps);
                prop_assert!((j[(row, col)] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }
}

#[test]
fn monomial_is_a_sorted_multiset() {
    assert_eq!(Monomial::new(vec![3, 0, 0]), Monomial(vec![0, 0, 3]));
    assert_eq!(Monomial::new(vec![1, 2]).mul(&Monomial::new(vec![0])).0, vec![0, 1, 2]);
    assert_eq!(Monomial::new(vec![]).eval(&[5.0]), 1.0);
    assert_eq!(Monomial::new(vec![0, 0]).eval(&[3.0]), 9.0);
}

#[test]
fn add_term_cancels_exactly() {
    let mut f = PolyVectorField::zero(2, 0);
    f.add_term(0, &[0, 1], ratio(2, 3));
    f.add_term(0, &[1, 0], ratio(-2, 3));
    assert!(f.is_zero());
}

#[test]
fn partial_derivative_counts_multiplicity() {
    // d/dx0 (x0^2 x1) = 2 x0 x1.
    let mut f = PolyVectorField::zero(2, 0);
    f.add_term(0, &[0, 0, 1], ratio(1, 1));
    let d = f.partial(0);
    let x = [3.0, 5.0];
    assert_eq!(d.evaluate(&x)[0], 2.0 * 3.0 * 5.0);
}

#[test]
fn evaluate_known_field() {
    // V = (x1^2, -2 x0 x1) at (2, 3).
    let mut f = PolyVectorField::zero(2, 0);
    f.add_term(0, &[1, 1], ratio(1, 1));
    f.add_term(1, &[0, 1], ratio(-2, 1));
    assert_eq!(f.evaluate(&[2.0, 3.0]), vec![9.0, -12.0]);
}

#[test]
fn scale_powers_add_under_bracket() {
    let mut v = PolyVectorField::zero(2, 1);
    v.add_term(0, &[1], ratio(1, 1));
    let mut w = PolyVectorField::zero(2, 2);
    w.add_term(1, &[0], ratio(1, 1));
    let b = v.lie_bracket(&w).unwrap();
    assert_eq!(b.scale_pow, 3);
    // Scale mismatch on add is rejected.
    assert!(v.add(&w).is_err());
}

#[test]
fn scale_factor_applies_to_evaluation() {
    let mut v = PolyVectorField::zero(1, 1);
    v.add_term(0, &[], ratio(1, 1));
    let got = v.evaluate(&[0.0])[0];
    assert!((got - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-16);
}

#[test]
fn lift_known_example() {
    // V = x0^2 on R^1 lifts to (x^2, 2 x eta) with interleaved coordinates.
    let mut v = PolyVectorField::zero(1, 0);
    v.add_term(0, &[0, 0], ratio(1, 1));
    let l = v.lift();
    let got = l.evaluate(&[3.0, 0.5]);
    assert_eq!(got, vec![9.0, 3.0]);
}

#[test]
fn embed_relabels_variables_and_components() {
    // Local (x0' = x1) embedded at positions (2, 0) of R^3: x2' = x0.
    let mut v = PolyVectorField::zero(2, 0);
    v.add_term(0, &[1], ratio(1, 1));
    let e = v.embed(3, &[2, 0]);
    assert_eq!(e.evaluate(&[7.0, 0.0, 0.0]), vec![0.0, 0.0, 7.0]);
}

#[test]
fn ratio_reduces() {
    assert!(ratio(2, 4) == ratio(1, 2));
    assert!(ratio(0, 5).is_zero());
}

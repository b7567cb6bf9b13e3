//! Property tests for the rational-arithmetic layer and the factorization
//! pipeline invariants.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use specfact::factor::{
    factor_from_relation, unitary_equivalence_check, FactorOptions, PartitionedSpectralDensity,
};
use specfact::poly::Polynomial;
use specfact::rational::{RationalFunction, Variable};
use specfact::rmatrix::RationalMatrix;

fn stable_pole() -> impl Strategy<Value = f64> {
    prop_oneof![(-0.85..-0.15f64), (0.15..0.85f64)]
}

fn coeff() -> impl Strategy<Value = f64> {
    -2.0..2.0f64
}

fn rational_z() -> impl Strategy<Value = RationalFunction> {
    (
        prop::collection::vec(coeff(), 1..4),
        prop::collection::vec(stable_pole(), 1..3),
    )
        .prop_filter_map("nonzero numerator", |(num, poles)| {
            let n = Polynomial::new(num);
            if n.is_zero() {
                return None;
            }
            let roots: Vec<Complex64> = poles.iter().map(|p| Complex64::new(*p, 0.0)).collect();
            let d = Polynomial::from_roots(&roots, 1.0);
            Some(RationalFunction::new(n, d, Variable::Z))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonicalization_is_idempotent(f in rational_z()) {
        let again = RationalFunction::new(f.num().clone(), f.den().clone(), Variable::Z);
        for k in 0..f.num().coeffs().len().max(again.num().coeffs().len()) {
            prop_assert!((f.num().coeff(k) - again.num().coeff(k)).abs() <= 1e-12);
        }
        for k in 0..f.den().coeffs().len().max(again.den().coeffs().len()) {
            prop_assert!((f.den().coeff(k) - again.den().coeff(k)).abs() <= 1e-12);
        }
    }

    #[test]
    fn evaluation_is_multiplicative(a in rational_z(), b in rational_z(), t in 0.0..1.0f64) {
        let prod = a.mul(&b).unwrap();
        // a non-pole probe point off the boundary
        let p = Complex64::from_polar(1.37 + t, 2.1 * t + 0.3);
        let clear = |f: &RationalFunction| {
            f.den().roots().iter().all(|r| (p - r).norm() > 1e-3 * (1.0 + r.norm()))
        };
        prop_assume!(clear(&a) && clear(&b) && clear(&prod));
        let lhs = prod.eval_unchecked(p);
        let rhs = a.eval_unchecked(p) * b.eval_unchecked(p);
        let scale = 1.0 + lhs.norm().max(rhs.norm());
        prop_assert!((lhs - rhs).norm() <= 1e-9 * scale);
    }

    #[test]
    fn para_conjugate_is_involutive(a in rational_z()) {
        let back = a.para_conjugate().para_conjugate();
        let diff = back.sub(&a).unwrap();
        prop_assert!(diff.is_zero() || diff.num().coeffs().iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn para_conjugate_is_boundary_adjoint(a in rational_z(), t in 0.01..0.99f64) {
        let p = Variable::Z.boundary_point(t);
        prop_assume!(a.den().roots().iter().all(|r| (p - r).norm() > 1e-2));
        let lhs = a.para_conjugate().eval_unchecked(p);
        let rhs = a.eval_unchecked(p).conj();
        prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
    }

    #[test]
    fn addition_matches_pointwise(a in rational_z(), b in rational_z(), t in 0.0..1.0f64) {
        let sum = a.add(&b).unwrap();
        let p = Complex64::from_polar(1.61 + t, 1.3 * t + 0.7);
        let clear = |f: &RationalFunction| {
            f.den().roots().iter().all(|r| (p - r).norm() > 1e-3 * (1.0 + r.norm()))
        };
        prop_assume!(clear(&a) && clear(&b) && clear(&sum));
        let lhs = sum.eval_unchecked(p);
        let rhs = a.eval_unchecked(p) + b.eval_unchecked(p);
        prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
    }
}

#[test]
fn matrix_inverse_is_pointwise_inverse() {
    // random-ish fixed 2x2 full-rank rational matrix
    let e = |num: &[f64], den: &[f64]| {
        RationalFunction::new(
            Polynomial::new(num.to_vec()),
            Polynomial::new(den.to_vec()),
            Variable::Z,
        )
    };
    let m = RationalMatrix::new(
        2,
        2,
        vec![
            e(&[0.4, 1.0], &[0.2, 1.0]),
            e(&[0.9, -0.3], &[-0.5, 1.0]),
            e(&[1.1], &[0.35, 1.0]),
            e(&[-0.2, 0.7], &[0.6, 1.0]),
        ],
        Variable::Z,
    )
    .unwrap();
    let inv = m.inverse().unwrap();
    for k in 0..10 {
        let p = Complex64::from_polar(1.5 + 0.1 * k as f64, 0.37 * k as f64);
        let prod = m.evaluate_unchecked(p) * inv.evaluate_unchecked(p);
        let dev = (&prod - DMatrix::<Complex64>::identity(2, 2)).norm();
        assert!(dev < 1e-9, "deviation {dev} at {p}");
    }
}

/// The deterministic relation extracted from the density of a produced
/// factor matches the relation that produced it.
#[test]
fn h_invariance_through_the_pipeline() {
    let e = |num: &[f64], den: &[f64]| {
        RationalFunction::new(
            Polynomial::new(num.to_vec()),
            Polynomial::new(den.to_vec()),
            Variable::Z,
        )
    };
    let g1 = RationalMatrix::new(1, 1, vec![e(&[0.528, 1.0], &[-0.255, 1.0])], Variable::Z).unwrap();
    let h = RationalMatrix::new(
        2,
        1,
        vec![e(&[-2.0, 1.0], &[2.0, 1.0]), e(&[-1.0, 1.0], &[2.0, 1.0])],
        Variable::Z,
    )
    .unwrap();
    let res = factor_from_relation(&g1, &h, &FactorOptions::default()).unwrap();
    let density = PartitionedSpectralDensity::from_factor(&res.w, 1).unwrap();
    let h_back = density.compute_h().unwrap();
    assert!(h_back.approx_eq(&h, 1e-6));
}

/// With stable H the general coprime path (n_u = 0) and the special-case
/// assembly agree up to a constant unitary right factor.
#[test]
fn special_and_general_paths_agree() {
    let e = |num: &[f64], den: &[f64]| {
        RationalFunction::new(
            Polynomial::new(num.to_vec()),
            Polynomial::new(den.to_vec()),
            Variable::Z,
        )
    };
    let g1 = RationalMatrix::new(1, 1, vec![e(&[0.4, 1.0], &[0.2, 1.0])], Variable::Z).unwrap();
    let h = RationalMatrix::new(
        1,
        1,
        vec![e(&[0.1, 1.0], &[0.3, 1.0])],
        Variable::Z,
    )
    .unwrap();
    // special path
    let special = factor_from_relation(&g1, &h, &FactorOptions::default()).unwrap();
    assert!(special.special_case);
    // general machinery on the same relation: stable input means the
    // coprime factorization degenerates to (P T, P)
    let t = h.mul(&g1).unwrap().transpose();
    let ss = specfact::realization::minimal_realization(&t).unwrap();
    assert_eq!(ss.n_unstable, 0);
    let (t_n, t_d, _) =
        specfact::factor::coprime_inner_factorization(&ss, &DMatrix::identity(1, 1)).unwrap();
    let w2 = t_n.transpose();
    let q1 = t_d.transpose();
    let w1 = g1.mul(&q1).unwrap();
    let w_general = RationalMatrix::vstack(&w1, &w2).unwrap();
    let eq = unitary_equivalence_check(&special.w, &w_general, 1e-8);
    assert!(eq.equivalent);
}

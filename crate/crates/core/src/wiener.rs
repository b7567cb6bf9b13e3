//! One-step-ahead Wiener filter and the canonical feedback representation
//! of a low-rank process, built on the causal/anticausal additive split.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::outer_inner::outer_inner;
use crate::poly::Polynomial;
use crate::rational::{RationalFunction, Variable};
use crate::rmatrix::RationalMatrix;
use crate::tol;

/// Canonical forward loop y1(t) = F_plus y2(t-1) + K_plus e(t) together
/// with the deterministic back relation y2 = H y1.
#[derive(Debug, Clone)]
pub struct FeedbackRepresentation {
    /// One-step predictor map (m x p).
    pub f_plus: RationalMatrix,
    /// Innovation gain (m x m).
    pub k_plus: RationalMatrix,
    /// Deterministic relation W2 W1^-1 (p x m).
    pub h: RationalMatrix,
    /// Strictly causal loop filter z^-1 F_plus.
    pub f: RationalMatrix,
}

/// Causal (stable) part of the additive partial-fraction split. The
/// polynomial part contributes only its constant term; anti-stable terms
/// belong entirely to the anticausal part.
pub fn causal_part(m: &RationalMatrix) -> Result<RationalMatrix> {
    let entries = m
        .entries()
        .iter()
        .map(causal_part_scalar)
        .collect::<Result<Vec<_>>>()?;
    RationalMatrix::new(m.rows(), m.cols(), entries, m.var())
}

fn causal_part_scalar(f: &RationalFunction) -> Result<RationalFunction> {
    let var = f.var();
    if f.is_zero() {
        return Ok(f.clone());
    }
    let (quot, rem) = f.num().divmod(f.den());
    let constant = RationalFunction::constant(quot.coeff(0), var);
    if rem.is_zero() {
        return Ok(constant);
    }
    let den_roots = f.den().roots();
    for r in &den_roots {
        if var.is_on_boundary(*r) {
            return Err(Error::BoundaryPole { pole: (r.re, r.im) });
        }
    }
    let stable: Vec<Complex64> = den_roots
        .iter()
        .copied()
        .filter(|r| var.is_strictly_stable(*r))
        .collect();
    let antistable: Vec<Complex64> = den_roots
        .iter()
        .copied()
        .filter(|r| !var.is_strictly_stable(*r))
        .collect();
    if antistable.is_empty() {
        return RationalFunction::try_new(rem, f.den().clone(), var)?.add(&constant);
    }
    if stable.is_empty() {
        return Ok(constant);
    }
    let den_s = Polynomial::from_roots(&stable, 1.0);
    let den_a = Polynomial::from_roots(&antistable, 1.0);
    let num_s = split_numerator(&rem, &den_s, &den_a)?;
    RationalFunction::try_new(num_s, den_s, var)?.add(&constant)
}

/// Solves rem = n_s * den_a + n_a * den_s for the stable-part numerator by
/// coefficient matching (den_s and den_a are coprime by construction).
fn split_numerator(rem: &Polynomial, den_s: &Polynomial, den_a: &Polynomial) -> Result<Polynomial> {
    let ds = den_s.degree().unwrap_or(0);
    let da = den_a.degree().unwrap_or(0);
    let n = ds + da;
    let mut mat = DMatrix::<f64>::zeros(n, n);
    // columns 0..ds: coefficients of n_s (times den_a shifts)
    for col in 0..ds {
        for (k, &c) in den_a.coeffs().iter().enumerate() {
            if col + k < n {
                mat[(col + k, col)] = c;
            }
        }
    }
    // columns ds..n: coefficients of n_a (times den_s shifts)
    for col in 0..da {
        for (k, &c) in den_s.coeffs().iter().enumerate() {
            if col + k < n {
                mat[(col + k, ds + col)] = c;
            }
        }
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(n);
    for k in 0..n {
        rhs[k] = rem.coeff(k);
    }
    let lu = mat.lu();
    let sol = lu.solve(&rhs).ok_or_else(|| {
        Error::VerificationFailure("stable/antistable split system is singular".into())
    })?;
    Ok(Polynomial::new(sol.as_slice()[..ds].to_vec()))
}

/// One-step-ahead Wiener filter from y2 to y1, given the blocks of a
/// minimum-phase full-column-rank factor.
pub fn wiener_filter(w1: &RationalMatrix, w2: &RationalMatrix) -> Result<FeedbackRepresentation> {
    let var = w1.var();
    if var != Variable::Z {
        return Err(Error::Unsupported(
            "the one-step-ahead Wiener filter is a discrete-time construction".into(),
        ));
    }
    let m = w1.cols();
    if w1.rows() != m || w2.cols() != m || w2.var() != var {
        return Err(Error::DimensionMismatch {
            expected: format!("W1 {m}x{m} and W2 with {m} columns"),
            found: format!("{}x{} and {}x{}", w1.rows(), w1.cols(), w2.rows(), w2.cols()),
        });
    }
    let p = w2.rows();
    let h = w2.mul(&w1.inverse()?)?;
    let rank = w2.normal_rank();
    if rank == 0 {
        // no past information in y2: F_plus = 0 and the innovation carries W1
        let f_plus = RationalMatrix::zeros_matrix(m, p, var);
        return Ok(FeedbackRepresentation {
            f: delay(&f_plus)?,
            f_plus,
            k_plus: w1.clone(),
            h,
        });
    }
    if rank < m {
        return Err(Error::Unsupported(format!(
            "W2 has intermediate normal rank {rank} (full column rank or zero required)"
        )));
    }
    let oi = outer_inner(w2)?;
    let g2 = oi.outer;
    let q2 = oi.inner;
    // [z W1 Q2^*]_+
    let z = RationalFunction::identity_var(var);
    let zw1q2s = w1.mul(&q2.para_conjugate())?.scale_rational(&z)?;
    let causal = causal_part(&zw1q2s)?;
    // left inverse of the outer factor: (G2^* G2)^-1 G2^*
    let g2_star = g2.para_conjugate();
    let g2l = g2_star.mul(&g2)?.inverse()?.mul(&g2_star)?;
    let f_plus = causal.mul(&g2l)?;
    let z_inv = RationalFunction::new(Polynomial::one(), Polynomial::x(), var);
    let k_plus = w1.sub(&causal.scale_rational(&z_inv)?.mul(&q2)?)?;
    let f = delay(&f_plus)?;
    // strict causality: zero feedthrough
    for i in 0..f.rows() {
        for j in 0..f.cols() {
            let e = f.entry(i, j);
            match e.value_at_infinity() {
                Some(v) if v.abs() <= 1e-9 => {}
                _ => {
                    return Err(Error::VerificationFailure(
                        "loop filter is not strictly causal".into(),
                    ))
                }
            }
        }
    }
    // For a tall W2 the pseudo-inverse left factor carries mirrored spectral
    // roots, so F itself need not be a stable rational matrix; its action on
    // the process is, which is what the reconstruction identity certifies:
    // z^-1 F_plus W2 = W1 - K_plus must be stable and reproduce W1.
    let action = f.mul(w2)?;
    if !action.is_stable() {
        return Err(Error::VerificationFailure(
            "loop filter action on the process is not stable".into(),
        ));
    }
    let reconstructed = action.add(&k_plus)?;
    if !reconstructed.approx_eq(w1, 1e-7) {
        return Err(Error::VerificationFailure(
            "feedback reconstruction identity failed".into(),
        ));
    }
    Ok(FeedbackRepresentation { f_plus, k_plus, h, f })
}

fn delay(f_plus: &RationalMatrix) -> Result<RationalMatrix> {
    let z_inv = RationalFunction::new(Polynomial::one(), Polynomial::x(), f_plus.var());
    f_plus.scale_rational(&z_inv)
}

/// Drops near-zero trailing noise so displayed coefficients stay tidy.
pub fn tidy(m: &RationalMatrix) -> RationalMatrix {
    m.map(|e| {
        let scale = e
            .num()
            .coeffs()
            .iter()
            .chain(e.den().coeffs())
            .fold(0.0_f64, |s, c| s.max(c.abs()));
        let cut = tol::COEFF_TRIM * scale.max(1.0) * 10.0;
        let trim = |p: &Polynomial| {
            Polynomial::new(
                p.coeffs()
                    .iter()
                    .map(|&c| if c.abs() <= cut { 0.0 } else { c })
                    .collect(),
            )
        };
        RationalFunction::new(trim(e.num()), trim(e.den()), e.var())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rf(num: &[f64], den: &[f64]) -> RationalFunction {
        RationalFunction::new(
            Polynomial::new(num.to_vec()),
            Polynomial::new(den.to_vec()),
            Variable::Z,
        )
    }

    #[test]
    fn causal_part_of_antistable_is_zero() {
        let m = RationalMatrix::new(1, 1, vec![rf(&[1.0], &[-2.0, 1.0])], Variable::Z).unwrap();
        let c = causal_part(&m).unwrap();
        assert!(c.entry(0, 0).is_zero());
    }

    #[test]
    fn causal_part_keeps_stable_and_constant() {
        // 3 + 1/(z-0.5) + 1/(z-2): causal part 3 + 1/(z-0.5)
        let f = rf(&[3.0], &[1.0])
            .add(&rf(&[1.0], &[-0.5, 1.0]))
            .unwrap()
            .add(&rf(&[1.0], &[-2.0, 1.0]))
            .unwrap();
        let m = RationalMatrix::new(1, 1, vec![f], Variable::Z).unwrap();
        let c = causal_part(&m).unwrap();
        let expect = rf(&[3.0], &[1.0]).add(&rf(&[1.0], &[-0.5, 1.0])).unwrap();
        let d = c.entry(0, 0).sub(&expect).unwrap();
        assert!(d.is_zero() || d.num().coeffs().iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn causal_part_is_idempotent_and_linear() {
        let a = rf(&[1.0, 0.3], &[-0.25, 0.2, 1.0]); // stable-ish mix
        let b = rf(&[2.0], &[-3.0, 1.0]); // antistable
        let sum = a.add(&b).unwrap();
        let m = RationalMatrix::new(1, 1, vec![sum], Variable::Z).unwrap();
        let c1 = causal_part(&m).unwrap();
        let c2 = causal_part(&c1).unwrap();
        assert!(c1.approx_eq(&c2, 1e-10));
        let ma = RationalMatrix::new(1, 1, vec![a], Variable::Z).unwrap();
        let mb = RationalMatrix::new(1, 1, vec![b], Variable::Z).unwrap();
        let lin = causal_part(&ma).unwrap().add(&causal_part(&mb).unwrap()).unwrap();
        assert!(c1.approx_eq(&lin, 1e-10));
    }

    #[test]
    fn boundary_pole_rejected() {
        let m = RationalMatrix::new(1, 1, vec![rf(&[1.0], &[-1.0, 1.0])], Variable::Z).unwrap();
        assert!(matches!(causal_part(&m), Err(Error::BoundaryPole { .. })));
    }

    #[test]
    fn example_causal_projection() {
        // [z W1]_+ for W1 = (z+2)(z+0.528)/((2z+1)(z-0.255))
        let num = Polynomial::new(vec![2.0, 1.0]).mul(&Polynomial::new(vec![0.528, 1.0]));
        let den = Polynomial::new(vec![1.0, 2.0]).mul(&Polynomial::new(vec![-0.255, 1.0]));
        let w1 = RationalFunction::new(num, den.clone(), Variable::Z);
        let zw1 = w1.mul(&RationalFunction::identity_var(Variable::Z)).unwrap();
        let m = RationalMatrix::new(1, 1, vec![zw1], Variable::Z).unwrap();
        let c = causal_part(&m).unwrap();
        // z(2.283z + 1.1835)/((2z+1)(z-0.255))
        let expect_num = Polynomial::new(vec![0.0, 1.1835, 2.283]);
        let expect = RationalFunction::new(expect_num, den, Variable::Z);
        let diff = c.entry(0, 0).sub(&expect).unwrap();
        assert!(
            diff.is_zero() || diff.num().coeffs().iter().all(|x| x.abs() < 1e-9),
            "causal part {:?}",
            c.entry(0, 0)
        );
    }

    #[test]
    fn constant_blocks_have_no_past_dependence() {
        let w1 = RationalMatrix::new(1, 1, vec![rf(&[2.0], &[1.0])], Variable::Z).unwrap();
        let w2 = RationalMatrix::new(1, 1, vec![rf(&[1.0], &[1.0])], Variable::Z).unwrap();
        let fb = wiener_filter(&w1, &w2).unwrap();
        assert!(fb.f_plus.entry(0, 0).is_zero());
        assert!(fb.k_plus.approx_eq(&w1, 1e-12));
    }

    #[test]
    fn example_wiener_filter_values() {
        // W1, W2 of the discrete worked example
        let g = Polynomial::new(vec![0.528, 1.0]);
        let den = Polynomial::new(vec![1.0, 2.0]).mul(&Polynomial::new(vec![-0.255, 1.0]));
        let w1 = RationalMatrix::new(
            1,
            1,
            vec![RationalFunction::new(
                g.mul(&Polynomial::new(vec![2.0, 1.0])),
                den.clone(),
                Variable::Z,
            )],
            Variable::Z,
        )
        .unwrap();
        let w2 = RationalMatrix::new(
            2,
            1,
            vec![
                RationalFunction::new(g.mul(&Polynomial::new(vec![-2.0, 1.0])), den.clone(), Variable::Z),
                RationalFunction::new(g.mul(&Polynomial::new(vec![-1.0, 1.0])), den, Variable::Z),
            ],
            Variable::Z,
        )
        .unwrap();
        let fb = wiener_filter(&w1, &w2).unwrap();
        // K_plus = 0.5 exactly (the feedthrough of W1)
        assert!(fb.k_plus.entry(0, 0).is_constant());
        assert_relative_eq!(fb.k_plus.entry(0, 0).num().coeff(0), 0.5, epsilon = 1e-9);
        // F_plus = z(2.283z+1.1835)/((z+0.528)(3z^2-7z+3)) [2z-1, z-1]
        let fden = Polynomial::new(vec![0.528, 1.0]).mul(&Polynomial::new(vec![3.0, -7.0, 3.0]));
        let f11 = RationalFunction::new(
            Polynomial::new(vec![0.0, 1.1835, 2.283]).mul(&Polynomial::new(vec![-1.0, 2.0])),
            fden.clone(),
            Variable::Z,
        );
        let f12 = RationalFunction::new(
            Polynomial::new(vec![0.0, 1.1835, 2.283]).mul(&Polynomial::new(vec![-1.0, 1.0])),
            fden,
            Variable::Z,
        );
        let expect = RationalMatrix::new(1, 2, vec![f11, f12], Variable::Z).unwrap();
        assert!(
            fb.f_plus.approx_eq(&expect, 1e-7),
            "f_plus = {:?} vs {:?}",
            fb.f_plus.entry(0, 0),
            expect.entry(0, 0)
        );
    }
}

//! Outer-inner factorization by elementary all-pass extraction.
//!
//! Every zero of the input strictly outside the stability region is flipped
//! inside by right-multiplying an elementary Blaschke factor built from the
//! zero and its input direction. Real zeros and complex pairs with a real
//! direction use rank-one real factors; genuinely complex directions go
//! through a one-zero-at-a-time complex extraction whose degree-two product
//! is realified by a unitary left factor (computed from a Takagi-type joint
//! diagonalization, which exists because the correction is a complex
//! symmetric unitary).
//!
//! Defective zero structures (where a direction cannot be separated) abort
//! with a diagnostic rather than silently producing a wrong factor.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::cpoly;
use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::rational::{RationalFunction, Variable};
use crate::rmatrix::{boundary_grid, RationalMatrix};

/// Result of an outer-inner factorization `w = outer * inner`.
#[derive(Debug, Clone)]
pub struct OuterInner {
    pub outer: RationalMatrix,
    pub inner: RationalMatrix,
    /// Zeros on the stability boundary, left in place (the outer factor may
    /// keep them) and reported as warnings.
    pub boundary_zeros: Vec<Complex64>,
}

/// Extracts the minimum-phase (outer) factor of a stable full-column-rank
/// rational matrix.
pub fn outer_inner(w: &RationalMatrix) -> Result<OuterInner> {
    let m = w.cols();
    let var = w.var();
    if w.normal_rank() < m {
        return Err(Error::RankDeficientInput { rank: w.normal_rank(), cols: m });
    }
    if !w.is_stable() {
        return Err(Error::PreconditionViolated(
            "outer-inner extraction needs a stable input factor".into(),
        ));
    }
    let mut current = w.clone();
    let mut inner = RationalMatrix::identity(m, var);
    let initial_zeros = current.zeros()?;
    let boundary_zeros: Vec<Complex64> = initial_zeros
        .iter()
        .copied()
        .filter(|z| var.is_on_boundary(*z))
        .collect();
    let budget = initial_zeros
        .iter()
        .filter(|z| var.is_strictly_unstable(**z))
        .count()
        + 2;
    for _ in 0..budget {
        let mut unstable: Vec<Complex64> = current
            .zeros()?
            .into_iter()
            .filter(|z| var.is_strictly_unstable(*z))
            .collect();
        if unstable.is_empty() {
            let q_res = inner_residual(&inner);
            if q_res > 1e-7 {
                return Err(Error::VerificationFailure(format!(
                    "accumulated inner factor deviates from all-pass by {q_res:.3e}"
                )));
            }
            return Ok(OuterInner { outer: current, inner, boundary_zeros });
        }
        // largest magnitude first, complex representatives with Im >= 0
        unstable.sort_by(|a, b| {
            (b.norm(), a.im.abs(), a.re)
                .partial_cmp(&(a.norm(), b.im.abs(), b.re))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let zero = if unstable[0].im < 0.0 { unstable[0].conj() } else { unstable[0] };
        let (deflated, factor) = extract_one(&current, zero)?;
        current = deflated;
        inner = factor.mul(&inner)?;
        if !current.is_stable() {
            return Err(Error::Unsupported(
                "unstable pole left after zero extraction; defective zero structure".into(),
            ));
        }
    }
    Err(Error::Unsupported(
        "zero extraction did not terminate; defective zero structure".into(),
    ))
}

/// One extraction step: returns (deflated matrix, elementary inner factor).
fn extract_one(w: &RationalMatrix, zero: Complex64) -> Result<(RationalMatrix, RationalMatrix)> {
    let var = w.var();
    let value = w
        .evaluate(zero)
        .map_err(|_| Error::Unsupported(format!("zero {zero} collides with a pole")))?;
    // typical magnitude of w away from its zeros, for the rank-drop check
    let scale = w
        .evaluate_unchecked(Complex64::new(0.9173, 1.2377))
        .norm()
        .max(w.evaluate_unchecked(Complex64::new(-1.3317, 0.4141)).norm());
    let dir = null_direction(&value, scale)?;
    let real_zero = zero.im.abs() <= 1e-9 * (1.0 + zero.norm());
    let dir = normalize_phase(dir);
    let dir_is_real = dir.iter().map(|c| c.im.abs()).fold(0.0, f64::max) < 1e-8;
    let factor = if real_zero && dir_is_real {
        let v: Vec<f64> = dir.iter().map(|c| c.re).collect();
        rank_one_factor(&v, &scalar_allpass_real(zero.re, var), var)
    } else if dir_is_real {
        let v: Vec<f64> = dir.iter().map(|c| c.re).collect();
        rank_one_factor(&v, &scalar_allpass_pair(zero, var), var)
    } else {
        complex_pair_factor(&dir, zero, w)?
    };
    let deflated = w.mul(&factor.para_conjugate())?;
    Ok((deflated, factor))
}

fn null_direction(value: &DMatrix<Complex64>, scale: f64) -> Result<Vec<Complex64>> {
    let m = value.ncols();
    let svd = value.clone().svd(false, true);
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let smin = svd.singular_values[svd.singular_values.len() - 1];
    if smin > 1e-5 * (1.0 + scale) {
        return Err(Error::VerificationFailure(format!(
            "no null direction at reported zero (sigma_min {smin:.3e} vs scale {scale:.3e})"
        )));
    }
    Ok((0..m).map(|j| vt[(vt.nrows() - 1, j)].conj()).collect())
}

fn normalize_phase(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let (mut best, mut mag) = (0usize, 0.0f64);
    for (k, c) in v.iter().enumerate() {
        if c.norm() > mag {
            mag = c.norm();
            best = k;
        }
    }
    let phase = v[best] / v[best].norm();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in v.iter_mut() {
        *c = *c / phase / norm;
    }
    v
}

/// Scalar all-pass with one real zero, sign-normalized positive at infinity.
fn scalar_allpass_real(alpha: f64, var: Variable) -> RationalFunction {
    match var {
        Variable::Z => {
            let sign = if alpha >= 0.0 { 1.0 } else { -1.0 };
            RationalFunction::new(
                Polynomial::new(vec![-alpha * sign, sign]),
                Polynomial::new(vec![-1.0, alpha]),
                var,
            )
        }
        Variable::S => RationalFunction::new(
            Polynomial::new(vec![-alpha, 1.0]),
            Polynomial::new(vec![alpha, 1.0]),
            var,
        ),
    }
}

/// Scalar all-pass carrying a conjugate pair of zeros.
fn scalar_allpass_pair(zero: Complex64, var: Variable) -> RationalFunction {
    let a = zero.re;
    let r2 = zero.norm_sqr();
    match var {
        Variable::Z => RationalFunction::new(
            Polynomial::new(vec![r2, -2.0 * a, 1.0]),
            Polynomial::new(vec![1.0, -2.0 * a, r2]),
            var,
        ),
        Variable::S => RationalFunction::new(
            Polynomial::new(vec![r2, -2.0 * a, 1.0]),
            Polynomial::new(vec![r2, 2.0 * a, 1.0]),
            var,
        ),
    }
}

/// I - v v^T + b(x) v v^T for a real unit direction.
fn rank_one_factor(v: &[f64], b: &RationalFunction, var: Variable) -> RationalMatrix {
    let m = v.len();
    RationalMatrix::from_fn(m, m, var, |i, j| {
        let proj = v[i] * v[j];
        let diag = if i == j { 1.0 } else { 0.0 };
        RationalFunction::constant(diag - proj, var)
            .add(&b.scale(proj))
            .expect("var checked")
    })
    .expect("factor shape")
}

// ---------------------------------------------------------------------------
// complex-direction pair extraction
// ---------------------------------------------------------------------------

/// Complex rational matrix over a shared denominator.
struct CRatMat {
    m: usize,
    nums: Vec<Vec<Complex64>>,
    den: Vec<Complex64>,
}

impl CRatMat {
    /// I - v v^* + b(x) v v^* for the scalar all-pass with one complex zero.
    fn elementary(dir: &[Complex64], zero: Complex64, var: Variable) -> CRatMat {
        let (nb, db) = match var {
            Variable::Z => (
                vec![-zero, Complex64::ONE],
                vec![-Complex64::ONE, zero.conj()],
            ),
            Variable::S => (vec![-zero, Complex64::ONE], vec![zero.conj(), Complex64::ONE]),
        };
        let m = dir.len();
        let mut nums = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let proj = dir[i] * dir[j].conj();
                let diag = if i == j { Complex64::ONE } else { Complex64::ZERO };
                nums.push(cpoly::add(
                    &cpoly::scale(&db, diag - proj),
                    &cpoly::scale(&nb, proj),
                ));
            }
        }
        CRatMat { m, nums, den: db }
    }

    fn mul(&self, other: &CRatMat) -> CRatMat {
        let m = self.m;
        let mut nums = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let mut acc = vec![Complex64::ZERO];
                for k in 0..m {
                    acc = cpoly::add(&acc, &cpoly::mul(&self.nums[i * m + k], &other.nums[k * m + j]));
                }
                nums.push(acc);
            }
        }
        CRatMat { m, nums, den: cpoly::mul(&self.den, &other.den) }
    }

    fn eval(&self, x: Complex64) -> DMatrix<Complex64> {
        let d = cpoly::eval(&self.den, x);
        DMatrix::from_fn(self.m, self.m, |i, j| cpoly::eval(&self.nums[i * self.m + j], x) / d)
    }

    /// Evaluation of the coefficient-conjugated matrix.
    fn eval_conj_coeff(&self, x: Complex64) -> DMatrix<Complex64> {
        let dc: Vec<Complex64> = self.den.iter().map(|c| c.conj()).collect();
        let d = cpoly::eval(&dc, x);
        DMatrix::from_fn(self.m, self.m, |i, j| {
            let nc: Vec<Complex64> = self.nums[i * self.m + j].iter().map(|c| c.conj()).collect();
            cpoly::eval(&nc, x) / d
        })
    }

    fn left_mul_const(&self, theta: &DMatrix<Complex64>) -> CRatMat {
        let m = self.m;
        let mut nums = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let mut acc = vec![Complex64::ZERO];
                for k in 0..m {
                    acc = cpoly::add(&acc, &cpoly::scale(&self.nums[k * m + j], theta[(i, k)]));
                }
                nums.push(acc);
            }
        }
        CRatMat { m, nums, den: self.den.clone() }
    }

    fn to_real(&self, var: Variable) -> Result<RationalMatrix> {
        let (den, den_imag) = cpoly::to_real(&self.den);
        let den_scale = self.den.iter().fold(0.0_f64, |s, c| s.max(c.norm()));
        if den_imag > 1e-7 * (1.0 + den_scale) {
            return Err(Error::VerificationFailure(format!(
                "realified inner factor kept imaginary denominator parts ({den_imag:.3e})"
            )));
        }
        let mut entries = Vec::with_capacity(self.m * self.m);
        for num in &self.nums {
            let (np, imag) = cpoly::to_real(num);
            let scale = num.iter().fold(0.0_f64, |s, c| s.max(c.norm()));
            if imag > 1e-7 * (1.0 + scale) {
                return Err(Error::VerificationFailure(format!(
                    "realified inner factor kept imaginary numerator parts ({imag:.3e})"
                )));
            }
            entries.push(RationalFunction::try_new(np, den.clone(), var)?);
        }
        RationalMatrix::new(self.m, self.m, entries, var)
    }
}

/// Real degree-two inner factor extracting a conjugate zero pair with a
/// genuinely complex direction.
fn complex_pair_factor(
    dir: &[Complex64],
    zero: Complex64,
    w: &RationalMatrix,
) -> Result<RationalMatrix> {
    let var = w.var();
    let b1 = CRatMat::elementary(dir, zero, var);
    let w_conj = w
        .evaluate(zero.conj())
        .map_err(|_| Error::Unsupported(format!("zero {} collides with a pole", zero.conj())))?;
    let dir_conj: Vec<Complex64> = dir.iter().map(|c| c.conj()).collect();
    // the conjugate direction must be a null direction of w at conj(zero)
    let null_check: f64 = (0..w.rows())
        .map(|i| {
            (0..w.cols())
                .map(|j| w_conj[(i, j)] * dir_conj[j])
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    if null_check > 1e-5 * (1.0 + w_conj.norm()) {
        return Err(Error::Unsupported(
            "conjugate zero direction inconsistent; defective zero structure".into(),
        ));
    }
    // direction of the conjugate zero after the first extraction
    let b1_at = b1.eval(zero.conj());
    let v2: Vec<Complex64> = (0..b1.m)
        .map(|i| (0..b1.m).map(|j| b1_at[(i, j)] * dir_conj[j]).sum())
        .collect();
    let v2 = normalize_phase(v2);
    let b2 = CRatMat::elementary(&v2, zero.conj(), var);
    let t = b2.mul(&b1);
    // realifying unitary: U = conj-coeff(T)(x0) * T(x0)^-1 at a real point on
    // the boundary, where both evaluations are unitary
    let candidates = match var {
        Variable::Z => vec![Complex64::ONE, -Complex64::ONE],
        Variable::S => vec![
            Complex64::ZERO,
            Complex64::new(0.0, 0.37),
            Complex64::new(0.0, -1.91),
        ],
    };
    let mut u = None;
    for x0 in candidates {
        let t0 = t.eval(x0);
        let Some(t0_inv) = t0.clone().try_inverse() else { continue };
        let cand = t.eval_conj_coeff(x0) * t0_inv;
        let unitary_err = (&cand * cand.adjoint() - DMatrix::identity(t.m, t.m)).norm();
        let symmetry_err = (&cand - cand.transpose()).norm();
        if unitary_err < 1e-6 && symmetry_err < 1e-6 {
            u = Some(cand);
            break;
        }
    }
    let u = u.ok_or_else(|| Error::Unsupported("could not realify the pair extraction factor".into()))?;
    let theta = realifying_factor(&u)?;
    let r = t.left_mul_const(&theta);
    r.to_real(var)
}

/// For a complex symmetric unitary U with conj(U) U = I, finds a unitary
/// Theta with conj(Theta) U = Theta, so Theta * T is real whenever
/// conj-coeff(T) = U T. Built from the joint real eigenbasis of Re U and
/// Im U (they commute for symmetric unitary U).
fn realifying_factor(u: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = u.nrows();
    let a = DMatrix::<f64>::from_fn(n, n, |i, j| u[(i, j)].re);
    let b = DMatrix::<f64>::from_fn(n, n, |i, j| u[(i, j)].im);
    let a = (&a + a.transpose()) * 0.5;
    let b = (&b + b.transpose()) * 0.5;
    let angles: [f64; 5] = [0.6180339887, 1.0, 0.2, 2.2360679775, 0.861];
    for phi in angles {
        let mix = &a * phi.cos() + &b * phi.sin();
        let eig = nalgebra::SymmetricEigen::new(mix.clone());
        let q = eig.eigenvectors;
        let da = q.transpose() * &a * &q;
        let db = q.transpose() * &b * &q;
        let off = |m: &DMatrix<f64>| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += m[(i, j)] * m[(i, j)];
                    }
                }
            }
            s.sqrt()
        };
        if off(&da) > 1e-8 || off(&db) > 1e-8 {
            continue;
        }
        let mut lam_sqrt = DMatrix::<Complex64>::zeros(n, n);
        let mut unimodular = true;
        for k in 0..n {
            let lam = Complex64::new(da[(k, k)], db[(k, k)]);
            if (lam.norm() - 1.0).abs() > 1e-6 {
                unimodular = false;
                break;
            }
            lam_sqrt[(k, k)] = lam.sqrt();
        }
        if !unimodular {
            return Err(Error::VerificationFailure(
                "realifying unitary has non-unimodular spectrum".into(),
            ));
        }
        let qc = DMatrix::<Complex64>::from_fn(n, n, |i, j| Complex64::new(q[(i, j)], 0.0));
        let theta = &qc * &lam_sqrt * qc.transpose();
        let resid = (theta.map(|c| c.conj()) * u - &theta).norm();
        if resid < 1e-6 {
            return Ok(theta);
        }
    }
    Err(Error::Unsupported(
        "joint diagonalization for realification failed".into(),
    ))
}

/// Max deviation of Q Q^* from the identity over a boundary grid.
pub fn inner_residual(q: &RationalMatrix) -> f64 {
    let grid = boundary_grid(q.var(), 64);
    let id = DMatrix::<Complex64>::identity(q.rows(), q.rows());
    grid.iter()
        .map(|&p| {
            let v = q.evaluate_unchecked(p);
            (&v * v.adjoint() - &id).norm()
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// scalar spectral factorization of a density (mode b)
// ---------------------------------------------------------------------------

/// Minimum-phase factor of a scalar para-Hermitian density by root
/// selection: numerator and denominator roots come in mirrored pairs; the
/// stable representative of each pair is kept and the gain is fixed so that
/// g * para_conjugate(g) equals the density.
pub fn scalar_spectral_factor(phi11: &RationalFunction) -> Result<RationalFunction> {
    let var = phi11.var();
    if phi11.is_zero() {
        return Err(Error::SingularBlock);
    }
    let num_sel = select_stable_representatives(&phi11.num().roots(), var, true)?;
    let den_sel = select_stable_representatives(&phi11.den().roots(), var, false)?;
    let g_num = Polynomial::from_roots(&num_sel, 1.0);
    let g_den = Polynomial::from_roots(&den_sel, 1.0);
    let g = RationalFunction::new(g_num, g_den, var);
    let gg = g.mul(&g.para_conjugate())?;
    let mut gain2 = None;
    for k in 0..16 {
        let p = var.boundary_point(0.043 + k as f64 / 16.0);
        let denom = gg.eval_unchecked(p);
        if denom.norm() < 1e-9 || !denom.is_finite() {
            continue;
        }
        let ratio = phi11.eval_unchecked(p) / denom;
        if !ratio.is_finite() {
            continue;
        }
        if ratio.im.abs() <= 1e-6 * (1.0 + ratio.re.abs()) && ratio.re > 0.0 {
            gain2 = Some(ratio.re);
            break;
        }
    }
    let gain2 = gain2.ok_or_else(|| {
        Error::PreconditionViolated("density is not positive on the stability boundary".into())
    })?;
    Ok(g.scale(gain2.sqrt()))
}

/// Splits mirrored root pairs, returning one representative per pair.
/// Boundary roots pair with themselves; zeros may keep them, poles may not.
fn select_stable_representatives(
    roots: &[Complex64],
    var: Variable,
    allow_boundary: bool,
) -> Result<Vec<Complex64>> {
    if roots.len() % 2 != 0 {
        return Err(Error::PreconditionViolated(
            "density roots do not pair across the boundary".into(),
        ));
    }
    let mut used = vec![false; roots.len()];
    let mut kept = Vec::with_capacity(roots.len() / 2);
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let r = roots[i];
        if var.is_on_boundary(r) {
            if !allow_boundary {
                return Err(Error::BoundaryPole { pole: (r.re, r.im) });
            }
            used[i] = true;
            let partner = roots
                .iter()
                .enumerate()
                .position(|(j, q)| !used[j] && (q - r).norm() <= 1e-4 * (1.0 + r.norm()));
            match partner {
                Some(j) => {
                    used[j] = true;
                    kept.push((r + roots[j]) / 2.0);
                }
                None => return Err(Error::BoundaryZero { zero: (r.re, r.im) }),
            }
            continue;
        }
        let mirror = var.mirror(r);
        let partner = roots.iter().enumerate().position(|(j, q)| {
            !used[j] && j != i && (q - mirror).norm() <= 1e-5 * (1.0 + mirror.norm())
        });
        let Some(j) = partner else {
            return Err(Error::PreconditionViolated(format!(
                "root {r} has no mirrored partner; input is not a valid density"
            )));
        };
        used[i] = true;
        used[j] = true;
        kept.push(if var.is_in_closed_region(r) { r } else { roots[j] });
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rf(num: &[f64], den: &[f64], var: Variable) -> RationalFunction {
        RationalFunction::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()), var)
    }

    #[test]
    fn already_outer_returns_identity_inner() {
        let w = RationalMatrix::new(
            1,
            1,
            vec![rf(&[0.4, 1.0], &[0.2, 1.0], Variable::Z)],
            Variable::Z,
        )
        .unwrap();
        let oi = outer_inner(&w).unwrap();
        assert!(oi.inner.approx_eq(&RationalMatrix::identity(1, Variable::Z), 1e-10));
        assert!(oi.outer.approx_eq(&w, 1e-10));
    }

    #[test]
    fn discrete_scalar_zero_flip() {
        // (z+2)/(5z-1): zero -2 flips to -0.5 with gain doubling
        let w = RationalMatrix::new(
            1,
            1,
            vec![rf(&[2.0, 1.0], &[-1.0, 5.0], Variable::Z)],
            Variable::Z,
        )
        .unwrap();
        let oi = outer_inner(&w).unwrap();
        let expect = RationalMatrix::new(
            1,
            1,
            vec![rf(&[0.2, 0.4], &[-0.2, 1.0], Variable::Z)],
            Variable::Z,
        )
        .unwrap();
        assert!(oi.outer.approx_eq(&expect, 1e-9));
        assert!(oi.outer.mul(&oi.inner).unwrap().approx_eq(&w, 1e-9));
    }

    #[test]
    fn continuous_diagonal_example() {
        // diag((s+1)(s-2)(s^2-2s+2)/((s+3)(s+4)(s^2+2s+2)), (s+3)(s-1)/((s+1)(s+5)))
        let n11 = Polynomial::new(vec![1.0, 1.0])
            .mul(&Polynomial::new(vec![-2.0, 1.0]))
            .mul(&Polynomial::new(vec![2.0, -2.0, 1.0]));
        let d11 = Polynomial::new(vec![3.0, 1.0])
            .mul(&Polynomial::new(vec![4.0, 1.0]))
            .mul(&Polynomial::new(vec![2.0, 2.0, 1.0]));
        let n22 = Polynomial::new(vec![3.0, 1.0]).mul(&Polynomial::new(vec![-1.0, 1.0]));
        let d22 = Polynomial::new(vec![1.0, 1.0]).mul(&Polynomial::new(vec![5.0, 1.0]));
        let w = RationalMatrix::new(
            2,
            2,
            vec![
                RationalFunction::new(n11, d11, Variable::S),
                RationalFunction::zero(Variable::S),
                RationalFunction::zero(Variable::S),
                RationalFunction::new(n22, d22, Variable::S),
            ],
            Variable::S,
        )
        .unwrap();
        let oi = outer_inner(&w).unwrap();
        // outer = diag((s+1)(s+2)/((s+3)(s+4)), (s+3)/(s+5))
        let expect = RationalMatrix::new(
            2,
            2,
            vec![
                rf(&[2.0, 3.0, 1.0], &[12.0, 7.0, 1.0], Variable::S),
                RationalFunction::zero(Variable::S),
                RationalFunction::zero(Variable::S),
                rf(&[3.0, 1.0], &[5.0, 1.0], Variable::S),
            ],
            Variable::S,
        )
        .unwrap();
        assert!(oi.outer.approx_eq(&expect, 1e-8));
        assert!(oi.outer.mul(&oi.inner).unwrap().approx_eq(&w, 1e-8));
        assert!(inner_residual(&oi.inner) < 1e-8);
        assert!(oi.outer.is_minimum_phase().unwrap());
    }

    #[test]
    fn complex_direction_pair_extraction() {
        let n11 = Polynomial::new(vec![2.0, -2.0, 1.0]); // zeros 1 +/- i
        let d11 = Polynomial::new(vec![2.0, 2.0, 1.0]).mul(&Polynomial::new(vec![3.0, 1.0]));
        let w0 = RationalMatrix::new(
            2,
            2,
            vec![
                RationalFunction::new(n11, d11, Variable::S),
                rf(&[0.3], &[4.0, 1.0], Variable::S),
                RationalFunction::zero(Variable::S),
                rf(&[1.0, 1.0], &[6.0, 1.0], Variable::S),
            ],
            Variable::S,
        )
        .unwrap();
        // mix the zero direction with a constant rotation
        let rot = DMatrix::from_row_slice(2, 2, &[0.8, -0.6, 0.6, 0.8]);
        let w = w0.const_mul_right(&rot).unwrap();
        let oi = outer_inner(&w).unwrap();
        assert!(oi.outer.mul(&oi.inner).unwrap().approx_eq(&w, 1e-7));
        assert!(inner_residual(&oi.inner) < 1e-7);
        assert!(oi.outer.is_minimum_phase().unwrap());
    }

    #[test]
    fn scalar_density_factorization() {
        // density of (z+2)/(5z-1): factor 0.4(z+0.5)/(z-0.2)
        let w = rf(&[2.0, 1.0], &[-1.0, 5.0], Variable::Z);
        let phi = w.mul(&w.para_conjugate()).unwrap();
        let g = scalar_spectral_factor(&phi).unwrap();
        assert_relative_eq!(g.num().coeff(1), 0.4, epsilon = 1e-9);
        assert_relative_eq!(g.num().coeff(0), 0.2, epsilon = 1e-9);
        assert_relative_eq!(g.den().coeff(0), -0.2, epsilon = 1e-9);
        let back = g.mul(&g.para_conjugate()).unwrap();
        for k in 0..32 {
            let p = Variable::Z.boundary_point(k as f64 / 32.0 + 0.01);
            let a = back.eval_unchecked(p);
            let b = phi.eval_unchecked(p);
            assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()));
        }
    }
}

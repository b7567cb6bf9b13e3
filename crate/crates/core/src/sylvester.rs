//! Stein and Lyapunov equation solvers for the anti-stable block, with the
//! spectral-disjointness uniqueness certificate.
//!
//! Both equations are solved by Kronecker vectorization; the unstable block
//! is small (its size is the number of unstable poles), so the dense
//! n^2 x n^2 solve is the simplest deterministic choice.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol;

/// Solution of a Stein or Lyapunov equation.
#[derive(Debug, Clone)]
pub struct SylvesterSolution {
    /// Hermitian (real symmetric) solution, symmetrized on output.
    pub x: DMatrix<f64>,
    /// Max-abs residual of the defining equation.
    pub residual_norm: f64,
    /// Whether X is numerically invertible.
    pub invertible: bool,
    /// Smallest singular value of X, the invertibility witness.
    pub smallest_singular_value: f64,
}

/// Outcome of the spectral-disjointness test behind unique solvability.
#[derive(Debug, Clone)]
pub struct UniquenessCheck {
    pub unique: bool,
    /// Offending eigenvalue pair when not unique.
    pub witness: Option<(Complex64, Complex64)>,
}

/// Checks lambda_i * conj(lambda_j) != 1 for all eigenvalue pairs (the
/// Stein/unit-circle condition).
pub fn stein_uniqueness(eigs: &[Complex64]) -> UniquenessCheck {
    for (i, li) in eigs.iter().enumerate() {
        for lj in eigs.iter().skip(i) {
            if (li * lj.conj() - Complex64::ONE).norm() <= tol::DISJOINT {
                return UniquenessCheck { unique: false, witness: Some((*li, *lj)) };
            }
        }
    }
    UniquenessCheck { unique: true, witness: None }
}

/// Checks lambda_i + conj(lambda_j) != 0 for all eigenvalue pairs (the
/// Lyapunov/imaginary-axis condition).
pub fn lyapunov_uniqueness(eigs: &[Complex64]) -> UniquenessCheck {
    for (i, li) in eigs.iter().enumerate() {
        for lj in eigs.iter().skip(i) {
            if (li + lj.conj()).norm() <= tol::DISJOINT {
                return UniquenessCheck { unique: false, witness: Some((*li, *lj)) };
            }
        }
    }
    UniquenessCheck { unique: true, witness: None }
}

/// Solves X - A_u^T X A_u - C_u^T C_u = 0 for A_u with all eigenvalues
/// strictly outside the closed unit disk.
pub fn solve_stein(a_u: &DMatrix<f64>, c_u: &DMatrix<f64>) -> Result<SylvesterSolution> {
    let n = a_u.nrows();
    check_shapes(a_u, c_u)?;
    let eigs: Vec<Complex64> = a_u.complex_eigenvalues().iter().copied().collect();
    for e in &eigs {
        if e.norm() <= 1.0 + tol::BOUNDARY {
            return Err(Error::PreconditionViolated(format!(
                "Stein equation needs all A_u eigenvalues outside the closed unit disk, found {e}"
            )));
        }
    }
    let check = stein_uniqueness(&eigs);
    if !check.unique {
        let (li, lj) = check.witness.unwrap();
        return Err(Error::NonUniqueSolution {
            lambda_i: (li.re, li.im),
            lambda_j: (lj.re, lj.im),
        });
    }
    // vec(X) - (A_u^T (x) A_u^T) vec(X) = vec(C_u^T C_u)
    let at = a_u.transpose();
    let op = DMatrix::identity(n * n, n * n) - kron(&at, &at);
    let q = c_u.transpose() * c_u;
    let x = solve_vectorized(op, &q, n)?;
    let residual = &x - at * &x * a_u - &q;
    Ok(finish(x, residual))
}

/// Solves A_u^T X + X A_u - C_u^T C_u = 0 for A_u with all eigenvalues
/// strictly in the open right half plane.
pub fn solve_lyapunov(a_u: &DMatrix<f64>, c_u: &DMatrix<f64>) -> Result<SylvesterSolution> {
    let n = a_u.nrows();
    check_shapes(a_u, c_u)?;
    let eigs: Vec<Complex64> = a_u.complex_eigenvalues().iter().copied().collect();
    for e in &eigs {
        if e.re <= tol::BOUNDARY {
            return Err(Error::PreconditionViolated(format!(
                "Lyapunov equation needs all A_u eigenvalues in the open right half plane, found {e}"
            )));
        }
    }
    let check = lyapunov_uniqueness(&eigs);
    if !check.unique {
        let (li, lj) = check.witness.unwrap();
        return Err(Error::NonUniqueSolution {
            lambda_i: (li.re, li.im),
            lambda_j: (lj.re, lj.im),
        });
    }
    // (I (x) A_u^T + A_u^T (x) I) vec(X) = vec(C_u^T C_u)
    let at = a_u.transpose();
    let op = kron(&DMatrix::identity(n, n), &at) + kron(&at, &DMatrix::identity(n, n));
    let q = c_u.transpose() * c_u;
    let x = solve_vectorized(op, &q, n)?;
    let residual = at * &x + &x * a_u - &q;
    Ok(finish(x, residual))
}

fn check_shapes(a_u: &DMatrix<f64>, c_u: &DMatrix<f64>) -> Result<()> {
    if a_u.nrows() != a_u.ncols() {
        return Err(Error::DimensionMismatch {
            expected: "square A_u".into(),
            found: format!("{}x{}", a_u.nrows(), a_u.ncols()),
        });
    }
    if c_u.ncols() != a_u.nrows() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} cols in C_u", a_u.nrows()),
            found: format!("{}", c_u.ncols()),
        });
    }
    Ok(())
}

fn solve_vectorized(op: DMatrix<f64>, q: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let rhs = DVector::from_fn(n * n, |k, _| q[(k % n, k / n)]);
    let lu = op.lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::VerificationFailure("vectorized Sylvester solve failed".into()))?;
    Ok(DMatrix::from_fn(n, n, |i, j| sol[j * n + i]))
}

fn finish(x: DMatrix<f64>, residual: DMatrix<f64>) -> SylvesterSolution {
    let xsym = (&x + x.transpose()) * 0.5;
    let res = residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let (inv, smin) = if xsym.nrows() == 0 {
        (true, 0.0)
    } else {
        let sv = xsym.clone().singular_values();
        let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        (smax > 0.0 && smin > tol::RANK_REL * smax, smin)
    };
    SylvesterSolution {
        x: xsym,
        residual_norm: res,
        invertible: inv,
        smallest_singular_value: smin,
    }
}

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

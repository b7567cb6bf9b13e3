//! Spectral factorization of rank-deficient rational densities.
//!
//! The pipeline: extract the deterministic relation H from the partitioned
//! density, obtain a square minimum-phase factor G1 of the leading block,
//! and assemble the full-column-rank minimum-phase factor. When H is stable
//! the factor is [G1; H G1] times a unitary; otherwise a coprime
//! factorization with an inner denominator is run on a minimal realization
//! of G1^T H^T, driven by a Stein (discrete) or Lyapunov (continuous)
//! equation on the anti-stable block.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::analysis::transmission_zeros_with_warnings;
use crate::error::{Error, Result};
use crate::outer_inner::{inner_residual, outer_inner, scalar_spectral_factor};
use crate::rational::Variable;
use crate::realization::{minimal_realization, StateSpace};
use crate::rmatrix::{boundary_grid, RationalMatrix};
use crate::sylvester::{solve_lyapunov, solve_stein, SylvesterSolution};

/// Partitioned para-Hermitian density of normal rank m, with the leading
/// m x m block full rank.
#[derive(Debug, Clone)]
pub struct PartitionedSpectralDensity {
    phi: RationalMatrix,
    m: usize,
}

impl PartitionedSpectralDensity {
    pub fn new(phi: RationalMatrix, m: usize) -> Result<Self> {
        if phi.rows() != phi.cols() {
            return Err(Error::DimensionMismatch {
                expected: "square density".into(),
                found: format!("{}x{}", phi.rows(), phi.cols()),
            });
        }
        if m == 0 || m > phi.rows() {
            return Err(Error::InvalidInput(format!(
                "block size m = {m} out of range for a {}x{} density",
                phi.rows(),
                phi.rows()
            )));
        }
        let density = PartitionedSpectralDensity { phi, m };
        density.validate()?;
        Ok(density)
    }

    /// Builds the density of a full-column-rank factor: phi = w w^*.
    pub fn from_factor(w: &RationalMatrix, m: usize) -> Result<Self> {
        let phi = w.mul(&w.para_conjugate())?;
        Self::new(phi, m)
    }

    fn validate(&self) -> Result<()> {
        let pc = self.phi.para_conjugate();
        if !pc.approx_eq(&self.phi, 1e-7) {
            return Err(Error::PreconditionViolated(
                "density is not para-Hermitian".into(),
            ));
        }
        if self.phi11().normal_rank() < self.m {
            return Err(Error::SingularBlock);
        }
        let rank = self.phi.normal_rank();
        if rank != self.m {
            return Err(Error::PreconditionViolated(format!(
                "density normal rank {rank} does not match block size {}",
                self.m
            )));
        }
        // positive semidefinite on the stability boundary
        let scale = self.boundary_scale(16);
        for p in boundary_grid(self.phi.var(), 16) {
            if self.phi.entries().iter().any(|e| {
                e.den()
                    .roots()
                    .iter()
                    .any(|r| (p - r).norm() < 1e-7 * (1.0 + r.norm()))
            }) {
                continue;
            }
            let v = self.phi.evaluate_unchecked(p);
            let lmin = hermitian_min_eigenvalue(&v);
            if lmin < -1e-8 * (1.0 + scale) {
                return Err(Error::PreconditionViolated(format!(
                    "density is not positive semidefinite on the boundary (eigenvalue {lmin:.3e} at {p})"
                )));
            }
        }
        Ok(())
    }

    fn boundary_scale(&self, n: usize) -> f64 {
        boundary_grid(self.phi.var(), n)
            .iter()
            .map(|&p| self.phi.evaluate_unchecked(p))
            .filter(|v| v.iter().all(|c| c.is_finite()))
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn phi(&self) -> &RationalMatrix {
        &self.phi
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.phi.rows() - self.m
    }

    pub fn var(&self) -> Variable {
        self.phi.var()
    }

    pub fn phi11(&self) -> RationalMatrix {
        self.phi.block(0, 0, self.m, self.m)
    }

    pub fn phi12(&self) -> RationalMatrix {
        self.phi.block(0, self.m, self.m, self.p())
    }

    pub fn phi21(&self) -> RationalMatrix {
        self.phi.block(self.m, 0, self.p(), self.m)
    }

    pub fn phi22(&self) -> RationalMatrix {
        self.phi.block(self.m, self.m, self.p(), self.p())
    }

    /// Deterministic relation H = phi21 * phi11^-1 between the partition
    /// blocks of any full-column-rank factor.
    pub fn compute_h(&self) -> Result<RationalMatrix> {
        if self.p() == 0 {
            return Ok(RationalMatrix::zeros_matrix(0, self.m, self.var()));
        }
        let inv = self.phi11().inverse().map_err(|e| match e {
            Error::SingularMatrix => Error::SingularBlock,
            other => other,
        })?;
        self.phi21().mul(&inv)
    }
}

fn hermitian_min_eigenvalue(h: &DMatrix<Complex64>) -> f64 {
    let n = h.nrows();
    // the realified embedding [[Re, -Im], [Im, Re]] is symmetric with the
    // same spectrum (doubled)
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (h[(i, j)].re + h[(j, i)].re);
            let im = 0.5 * (h[(i, j)].im - h[(j, i)].im);
            m[(i, j)] = re;
            m[(n + i, n + j)] = re;
            m[(i, n + j)] = -im;
            m[(n + i, j)] = im;
        }
    }
    nalgebra::SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Where the square minimum-phase factor of phi11 comes from.
#[derive(Debug, Clone)]
pub enum G1Source {
    /// Caller supplies G1 directly.
    Given(RationalMatrix),
    /// Caller supplies a stable full-column-rank factor W_o of the whole
    /// density; G1 is the outer factor of its leading block.
    StableFactor(RationalMatrix),
    /// Scalar leading block: factor phi11 itself by root selection.
    ScalarDensity,
}

#[derive(Debug, Clone)]
pub struct FactorOptions {
    /// Unitary right-parameter P (defaults to the identity).
    pub unitary_p: Option<DMatrix<f64>>,
    /// Boundary grid size for the factorization residual.
    pub grid_points: usize,
    /// Acceptance threshold for the grid residual (relative).
    pub residual_tol: f64,
    /// In stable-factor mode, form H G1 = W_o2 Q^* directly instead of
    /// extracting H from the density blocks.
    pub stable_factor_shortcut: bool,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions {
            unitary_p: None,
            grid_points: 256,
            residual_tol: 1e-7,
            stable_factor_shortcut: false,
        }
    }
}

/// Diagnostics attached to a factorization result.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub n_unstable: usize,
    pub poles_w: Vec<Complex64>,
    pub zeros_w: Vec<Complex64>,
    /// max-abs deviation of phi - w w^* over the boundary grid.
    pub grid_residual: Option<f64>,
    /// max deviation of q1 q1^* from the identity on the grid.
    pub inner_residual: f64,
    pub sylvester: Option<SylvesterDiagnostics>,
    pub w2_identity_residual: f64,
    pub w1_identity_residual: f64,
    pub h_stable: bool,
    pub w1_minimum_phase: bool,
    pub w_minimum_phase: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SylvesterDiagnostics {
    pub x: DMatrix<f64>,
    pub m_matrix: DMatrix<f64>,
    pub residual: f64,
    pub smallest_singular_value: f64,
}

/// Full-column-rank minimum-phase factor with its building blocks.
#[derive(Debug, Clone)]
pub struct FactorizationResult {
    pub w: RationalMatrix,
    pub w1: RationalMatrix,
    pub w2: RationalMatrix,
    pub q1: RationalMatrix,
    pub h: RationalMatrix,
    pub g1: RationalMatrix,
    pub p_used: DMatrix<f64>,
    pub special_case: bool,
    pub diagnostics: Diagnostics,
}

/// Top-level pipeline: density in, minimum-phase factor out.
pub fn spectral_factor(
    density: &PartitionedSpectralDensity,
    source: &G1Source,
    opts: &FactorOptions,
) -> Result<FactorizationResult> {
    let m = density.m();
    let var = density.var();
    let mut warnings = Vec::new();
    let (g1, h) = match source {
        G1Source::Given(g1) => {
            check_g1(g1, m, var)?;
            (g1.clone(), density.compute_h()?)
        }
        G1Source::StableFactor(w_o) => {
            if w_o.rows() != density.phi().rows() || w_o.cols() != m {
                return Err(Error::DimensionMismatch {
                    expected: format!("{}x{m} stable factor", density.phi().rows()),
                    found: format!("{}x{}", w_o.rows(), w_o.cols()),
                });
            }
            let w_o1 = w_o.block(0, 0, m, m);
            let oi = outer_inner(&w_o1)?;
            for z in &oi.boundary_zeros {
                warnings.push(format!("leading-block zero on the stability boundary at {z}"));
            }
            let h = if opts.stable_factor_shortcut {
                let w_o2 = w_o.block(m, 0, density.p(), m);
                let hg1 = w_o2.mul(&oi.inner.para_conjugate())?;
                hg1.mul(&oi.outer.inverse()?)?
            } else {
                density.compute_h()?
            };
            (oi.outer, h)
        }
        G1Source::ScalarDensity => {
            if m != 1 {
                return Err(Error::Unsupported(
                    "direct density factorization of the leading block is scalar-only; \
                     supply G1 or a stable factor for matrix blocks"
                        .into(),
                ));
            }
            let g = scalar_spectral_factor(density.phi11().entry(0, 0))?;
            let g1 = RationalMatrix::new(1, 1, vec![g], var)?;
            (g1, density.compute_h()?)
        }
    };
    factor_from_relation_inner(&g1, &h, Some(density), opts, warnings)
}

/// Builds the factor from a given square minimum-phase G1 and deterministic
/// relation H (the entry point used by identification, where no density
/// document is available).
pub fn factor_from_relation(
    g1: &RationalMatrix,
    h: &RationalMatrix,
    opts: &FactorOptions,
) -> Result<FactorizationResult> {
    factor_from_relation_inner(g1, h, None, opts, Vec::new())
}

/// Special-case assembly for stable H: W = [G1; H G1] Q1 with Q1 a constant
/// unitary (default identity).
pub fn special_case_factor(
    g1: &RationalMatrix,
    h: &RationalMatrix,
    q1_unitary: Option<&DMatrix<f64>>,
) -> Result<FactorizationResult> {
    if !h.is_stable() {
        return Err(Error::PreconditionViolated(
            "special-case factor needs a stable deterministic relation".into(),
        ));
    }
    let opts = FactorOptions {
        unitary_p: q1_unitary.map(|p| p.transpose()),
        ..FactorOptions::default()
    };
    factor_from_relation_inner(g1, h, None, &opts, Vec::new())
}

fn check_g1(g1: &RationalMatrix, m: usize, var: Variable) -> Result<()> {
    if g1.rows() != m || g1.cols() != m {
        return Err(Error::DimensionMismatch {
            expected: format!("{m}x{m} minimum-phase factor"),
            found: format!("{}x{}", g1.rows(), g1.cols()),
        });
    }
    if g1.var() != var {
        return Err(Error::VariableMismatch);
    }
    if !g1.is_stable() {
        return Err(Error::PreconditionViolated("G1 must be stable".into()));
    }
    Ok(())
}

fn factor_from_relation_inner(
    g1: &RationalMatrix,
    h: &RationalMatrix,
    density: Option<&PartitionedSpectralDensity>,
    opts: &FactorOptions,
    mut warnings: Vec<String>,
) -> Result<FactorizationResult> {
    let var = g1.var();
    let m = g1.cols();
    if h.cols() != m {
        return Err(Error::DimensionMismatch {
            expected: format!("relation with {m} columns"),
            found: format!("{}x{}", h.rows(), h.cols()),
        });
    }
    let p_used = match &opts.unitary_p {
        Some(p) => {
            if p.nrows() != m || p.ncols() != m {
                return Err(Error::DimensionMismatch {
                    expected: format!("{m}x{m} unitary"),
                    found: format!("{}x{}", p.nrows(), p.ncols()),
                });
            }
            let dev = (p.transpose() * p - DMatrix::<f64>::identity(m, m)).norm();
            if dev > 1e-9 {
                return Err(Error::PreconditionViolated(format!(
                    "P is not unitary (deviation {dev:.3e})"
                )));
            }
            p.clone()
        }
        None => DMatrix::identity(m, m),
    };

    let h_stable = h.is_stable();
    let (w2, q1, special_case, sylvester, n_unstable) = if h_stable {
        // W = [G1; H G1] P^T without any coprime factorization
        let q1 = RationalMatrix::from_constant(&p_used.transpose(), var);
        let w2 = h.mul(g1)?.mul(&q1)?;
        (w2, q1, true, None, 0)
    } else {
        let t = h.mul(g1)?.transpose();
        let ss = minimal_realization(&t)?;
        let (t_n, t_d, sylv) = coprime_inner_factorization(&ss, &p_used)?;
        // right-coprime pieces are the transposes
        let q1 = t_d.transpose();
        let w2 = t_n.transpose();
        // T_D T = T_N must hold as a rational identity
        if !t_d.mul(&t)?.approx_eq(&t_n, 1e-6) {
            return Err(Error::VerificationFailure(
                "coprime factorization does not reproduce G1^T H^T".into(),
            ));
        }
        (w2, q1, false, Some(sylv), ss.n_unstable)
    };
    let w1 = g1.mul(&q1)?;
    let w = RationalMatrix::vstack(&w1, &w2)?;

    let inner_res = inner_residual(&q1);
    let w2_res = identity_residual(&w2, &h.mul(&w1)?);
    let w1_res = identity_residual(&w1, &g1.mul(&q1)?);
    let (zeros_w, coincident) = transmission_zeros_with_warnings(&w)?;
    for z in &coincident {
        warnings.push(format!("pole/zero coincidence at {z} left unresolved"));
    }
    let poles_w = w.poles();
    let w_minimum_phase = w.is_stable() && zeros_w.iter().all(|z| var.is_in_closed_region(*z));
    let w1_minimum_phase = w1.is_minimum_phase()?;
    let grid_residual = density.map(|d| factorization_residual(d.phi(), &w, opts.grid_points));

    if inner_res > 1e-8 {
        return Err(Error::VerificationFailure(format!(
            "inner denominator deviates from all-pass by {inner_res:.3e}"
        )));
    }
    if let Some(r) = grid_residual {
        let scale = density
            .map(|d| d.boundary_scale(opts.grid_points.min(64)))
            .unwrap_or(0.0);
        if r > opts.residual_tol * (1.0 + scale) {
            return Err(Error::VerificationFailure(format!(
                "factorization residual {r:.3e} exceeds tolerance"
            )));
        }
    }
    if !w_minimum_phase {
        return Err(Error::VerificationFailure(
            "assembled factor is not minimum-phase".into(),
        ));
    }
    if h_stable != w1_minimum_phase {
        return Err(Error::VerificationFailure(
            "stable-H / minimum-phase-W1 dichotomy violated".into(),
        ));
    }
    if n_unstable > 0 {
        let q1_degree = minimal_realization(&q1)?.order();
        if q1_degree != n_unstable {
            warnings.push(format!(
                "inner denominator degree {q1_degree} differs from the anti-stable order {n_unstable}"
            ));
        }
    }

    Ok(FactorizationResult {
        w,
        w1,
        w2,
        q1,
        h: h.clone(),
        g1: g1.clone(),
        p_used,
        special_case,
        diagnostics: Diagnostics {
            n_unstable,
            poles_w,
            zeros_w,
            grid_residual,
            inner_residual: inner_res,
            sylvester,
            w2_identity_residual: w2_res,
            w1_identity_residual: w1_res,
            h_stable,
            w1_minimum_phase,
            w_minimum_phase,
            warnings,
        },
    })
}

/// Max-abs sampled relative deviation between two rational matrices.
fn identity_residual(a: &RationalMatrix, b: &RationalMatrix) -> f64 {
    let pts = [
        Complex64::new(0.7313, 0.5219),
        Complex64::new(-1.2191, 0.8313),
        Complex64::new(2.1117, -0.3391),
        Complex64::new(-0.4421, -1.7713),
    ];
    pts.iter()
        .map(|&p| {
            let va = a.evaluate_unchecked(p);
            let vb = b.evaluate_unchecked(p);
            let scale = 1.0 + va.norm().max(vb.norm());
            (va - vb).norm() / scale
        })
        .fold(0.0, f64::max)
}

/// Left-coprime factorization with an inner denominator of minimal degree:
/// T = T_D^-1 T_N with T_D inner of degree n_u. The affine (1-z)M input
/// terms of the discrete formulas are absorbed at the rational level using
/// (1-z)(zE - F)^-1 = ((I - E^-1 F)(zI - E^-1 F)^-1 - I) E^-1.
pub fn coprime_inner_factorization(
    ss: &StateSpace,
    p_unitary: &DMatrix<f64>,
) -> Result<(RationalMatrix, RationalMatrix, SylvesterDiagnostics)> {
    let var = ss.var;
    let m_out = ss.outputs();
    let nu = ss.n_unstable;
    if nu == 0 {
        // already stable: T_N = P T, T_D = P
        let t_n = ss.transfer().const_mul_left(p_unitary)?;
        let t_d = RationalMatrix::from_constant(p_unitary, var);
        let diag = SylvesterDiagnostics {
            x: DMatrix::zeros(0, 0),
            m_matrix: DMatrix::zeros(0, m_out),
            residual: 0.0,
            smallest_singular_value: 0.0,
        };
        return Ok((t_n, t_d, diag));
    }
    let a_u = ss.a_unstable();
    let c_u = ss.c_unstable();
    let sol: SylvesterSolution = match var {
        Variable::Z => solve_stein(&a_u, &c_u)?,
        Variable::S => solve_lyapunov(&a_u, &c_u)?,
    };
    if !sol.invertible {
        return Err(Error::VerificationFailure(format!(
            "Sylvester solution is numerically singular (smallest singular value {:.3e})",
            sol.smallest_singular_value
        )));
    }
    let x_inv = sol.x.clone().try_inverse().ok_or(Error::SingularTransform)?;
    let m_matrix = match var {
        Variable::Z => {
            let iau = DMatrix::<f64>::identity(nu, nu) - &a_u;
            let iau_inv_t = iau
                .transpose()
                .try_inverse()
                .ok_or(Error::SingularTransform)?;
            -(&x_inv) * iau_inv_t * c_u.transpose()
        }
        Variable::S => -(&x_inv) * c_u.transpose(),
    };
    let diag = SylvesterDiagnostics {
        x: sol.x.clone(),
        m_matrix: m_matrix.clone(),
        residual: sol.residual_norm,
        smallest_singular_value: sol.smallest_singular_value,
    };

    let a_us = ss.a_coupling();
    let a_s = ss.a_stable();
    let b_u = ss.b_unstable();
    let b_s = ss.b_stable();
    let c_s = ss.c_stable();
    let d = &ss.d;
    let ns = ss.order() - nu;

    let (t_n, t_d) = match var {
        Variable::S => {
            // standard realizations, nothing affine in s
            let a_cl = &a_u + &m_matrix * &c_u;
            let mut a_n = DMatrix::<f64>::zeros(ss.order(), ss.order());
            a_n.view_mut((0, 0), (nu, nu)).copy_from(&a_cl);
            a_n.view_mut((0, nu), (nu, ns))
                .copy_from(&(&a_us + &m_matrix * &c_s));
            a_n.view_mut((nu, nu), (ns, ns)).copy_from(&a_s);
            let mut b_n = DMatrix::<f64>::zeros(ss.order(), ss.inputs());
            b_n.view_mut((0, 0), (nu, ss.inputs()))
                .copy_from(&(&b_u + &m_matrix * d));
            b_n.view_mut((nu, 0), (ns, ss.inputs())).copy_from(&b_s);
            let mut c_n = DMatrix::<f64>::zeros(m_out, ss.order());
            c_n.view_mut((0, 0), (m_out, nu)).copy_from(&(p_unitary * &c_u));
            c_n.view_mut((0, nu), (m_out, ns)).copy_from(&(p_unitary * &c_s));
            let t_n = StateSpace {
                a: a_n,
                b: b_n,
                c: c_n,
                d: p_unitary * d,
                n_unstable: 0,
                var,
            }
            .transfer();
            let t_d = StateSpace {
                a: a_cl,
                b: m_matrix.clone(),
                c: p_unitary * &c_u,
                d: p_unitary.clone(),
                n_unstable: 0,
                var,
            }
            .transfer();
            (t_n, t_d)
        }
        Variable::Z => {
            let e = DMatrix::<f64>::identity(nu, nu) + &m_matrix * &c_u;
            let f = &a_u + &m_matrix * &c_u;
            let e_inv = e
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::VerificationFailure("I + M C_u is singular".into()))?;
            let a_hat = &e_inv * &f;
            let res_u = resolvent(&a_hat, var);
            let one_mz = RationalMatrix::from_constant(
                &(DMatrix::<f64>::identity(nu, nu) - &a_hat),
                var,
            )
            .mul(&res_u)?
            .sub(&RationalMatrix::identity(nu, var))?;
            let c_u_r = RationalMatrix::from_constant(&c_u, var);
            // T_D = P [ C_u (1-z)(zE-F)^-1 M + I ]
            let t_d_core = c_u_r
                .mul(&one_mz)?
                .const_mul_right(&(&e_inv * &m_matrix))?
                .add(&RationalMatrix::identity(m_out, var))?;
            let t_d = t_d_core.const_mul_left(p_unitary)?;
            // T_N = P [ C_u X^-1 B_u + C_u (1-z)X^-1 M D
            //         + C_u X^-1 A_us Z^-1 B_s + C_u (1-z)X^-1 M C_s Z^-1 B_s
            //         + C_s Z^-1 B_s + D ] with X = zE - F, Z = zI - A_s
            let mut acc = RationalMatrix::from_constant(d, var);
            let x_res = res_u.const_mul_right(&e_inv)?;
            let t1 = c_u_r.mul(&x_res)?.const_mul_right(&b_u)?;
            acc = acc.add(&t1)?;
            let t2 = c_u_r
                .mul(&one_mz)?
                .const_mul_right(&(&e_inv * &m_matrix * d))?;
            acc = acc.add(&t2)?;
            if ns > 0 {
                let res_s = resolvent(&a_s, var);
                let z_b = res_s.const_mul_right(&b_s)?;
                if a_us.iter().any(|v| *v != 0.0) {
                    let t3 = c_u_r.mul(&x_res)?.const_mul_right(&a_us)?.mul(&z_b)?;
                    acc = acc.add(&t3)?;
                }
                let t4 = c_u_r
                    .mul(&one_mz)?
                    .const_mul_right(&(&e_inv * &m_matrix * &c_s))?
                    .mul(&z_b)?;
                acc = acc.add(&t4)?;
                let t5 = RationalMatrix::from_constant(&c_s, var).mul(&z_b)?;
                acc = acc.add(&t5)?;
            }
            let t_n = acc.const_mul_left(p_unitary)?;
            (t_n, t_d)
        }
    };
    Ok((t_n, t_d, diag))
}

/// (xI - A)^-1 as a rational matrix.
fn resolvent(a: &DMatrix<f64>, var: Variable) -> RationalMatrix {
    let n = a.nrows();
    StateSpace {
        a: a.clone(),
        b: DMatrix::identity(n, n),
        c: DMatrix::identity(n, n),
        d: DMatrix::zeros(n, n),
        n_unstable: 0,
        var,
    }
    .transfer()
}

/// Max-abs entry of phi - w w^* over the boundary grid, evaluated in
/// parallel chunks for large grids.
pub fn factorization_residual(phi: &RationalMatrix, w: &RationalMatrix, points: usize) -> f64 {
    let grid = boundary_grid(phi.var(), points.max(16));
    let eval_one = |p: Complex64| -> f64 {
        let vp = phi.evaluate_unchecked(p);
        let vw = w.evaluate_unchecked(p);
        let diff = &vp - &vw * vw.adjoint();
        if diff.iter().any(|c| !c.is_finite()) {
            return 0.0; // grid point collided with a pole; skip
        }
        diff.iter().fold(0.0_f64, |m, c| m.max(c.norm()))
    };
    if grid.len() < 64 {
        return grid.iter().map(|&p| eval_one(p)).fold(0.0, f64::max);
    }
    let threads = 4;
    let chunk = grid.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|&p| eval_one(p)).fold(0.0, f64::max)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("grid worker"))
            .fold(0.0, f64::max)
    })
}

/// Outcome of a unitary-equivalence comparison between two factors.
#[derive(Debug, Clone)]
pub struct UnitaryEquivalence {
    pub equivalent: bool,
    pub u: Option<DMatrix<f64>>,
    pub max_deviation: f64,
}

/// Checks wb = wa * U for a constant unitary U, recovered from evaluations
/// at real probe points (real-coefficient factors admit a real U).
pub fn unitary_equivalence_check(
    wa: &RationalMatrix,
    wb: &RationalMatrix,
    tolerance: f64,
) -> UnitaryEquivalence {
    if wa.rows() != wb.rows() || wa.cols() != wb.cols() || wa.var() != wb.var() {
        return UnitaryEquivalence { equivalent: false, u: None, max_deviation: f64::INFINITY };
    }
    let m = wa.cols();
    if wa.normal_rank() < m || wb.normal_rank() < m {
        return UnitaryEquivalence { equivalent: false, u: None, max_deviation: f64::INFINITY };
    }
    let points = [1.3719, -1.8311, 0.5213, 2.4111, -0.7317, 3.1171];
    let mut u_est: Option<DMatrix<f64>> = None;
    let mut max_dev: f64 = 0.0;
    let mut used = 0;
    for &x in &points {
        if used >= 4 {
            break;
        }
        let p = Complex64::new(x, 0.0);
        let near_pole = |mat: &RationalMatrix| {
            mat.entries().iter().any(|e| {
                e.den()
                    .roots()
                    .iter()
                    .any(|r| (p - r).norm() < 1e-4 * (1.0 + r.norm()))
            })
        };
        if near_pole(wa) || near_pole(wb) {
            continue;
        }
        let va = real_part(&wa.evaluate_unchecked(p));
        let vb = real_part(&wb.evaluate_unchecked(p));
        let pinv = match pseudo_inverse(&va) {
            Some(pi) => pi,
            None => continue,
        };
        let u = pinv * &vb;
        match &u_est {
            None => u_est = Some(u),
            Some(u0) => max_dev = max_dev.max((&u - u0).norm()),
        }
        used += 1;
    }
    let Some(u) = u_est else {
        return UnitaryEquivalence { equivalent: false, u: None, max_deviation: f64::INFINITY };
    };
    let unitary_dev = (u.transpose() * &u - DMatrix::<f64>::identity(m, m)).norm();
    max_dev = max_dev.max(unitary_dev);
    if unitary_dev > 1e-7 {
        return UnitaryEquivalence { equivalent: false, u: Some(u), max_deviation: max_dev };
    }
    let wa_u = match wa.const_mul_right(&u) {
        Ok(x) => x,
        Err(_) => {
            return UnitaryEquivalence { equivalent: false, u: Some(u), max_deviation: max_dev }
        }
    };
    let equivalent = wa_u.approx_eq(wb, tolerance);
    if !equivalent {
        max_dev = max_dev.max(identity_residual(&wa_u, wb));
    }
    UnitaryEquivalence { equivalent, u: Some(u), max_deviation: max_dev }
}

fn real_part(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re)
}

fn pseudo_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().svd(true, true).pseudo_inverse(1e-10).ok()
}

/// Re-checks all invariants of a produced factor against its density; used
/// by the CLI `verify` command.
pub fn verify_factor(
    density: &PartitionedSpectralDensity,
    w: &RationalMatrix,
    grid_points: usize,
    residual_tol: f64,
) -> Result<f64> {
    if w.rows() != density.phi().rows() || w.cols() != density.m() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} factor", density.phi().rows(), density.m()),
            found: format!("{}x{}", w.rows(), w.cols()),
        });
    }
    if !w.is_stable() {
        return Err(Error::VerificationFailure("factor is not stable".into()));
    }
    let residual = factorization_residual(density.phi(), w, grid_points);
    let scale = density.boundary_scale(grid_points.min(64));
    if residual > residual_tol * (1.0 + scale) {
        return Err(Error::VerificationFailure(format!(
            "density residual {residual:.3e} exceeds tolerance {residual_tol:.3e}"
        )));
    }
    if !w.is_minimum_phase()? {
        return Err(Error::VerificationFailure("factor is not minimum-phase".into()));
    }
    Ok(residual)
}

/// Greedy row-reordering proposal: picks m rows maximizing the smallest
/// singular value of the leading block at a boundary probe point.
pub fn propose_partition(phi: &RationalMatrix, m: usize) -> Result<Vec<usize>> {
    let n = phi.rows();
    if phi.cols() != n || m == 0 || m > n {
        return Err(Error::InvalidInput(
            "partition proposal needs a square density and 0 < m <= size".into(),
        ));
    }
    let p = phi.var().boundary_point(0.1234);
    let v = phi.evaluate_unchecked(p);
    let mut chosen: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..n).collect();
    for _ in 0..m {
        let mut best: Option<(usize, f64)> = None;
        for (pos, &cand) in remaining.iter().enumerate() {
            let mut rows = chosen.clone();
            rows.push(cand);
            let sub =
                DMatrix::<Complex64>::from_fn(rows.len(), rows.len(), |i, j| v[(rows[i], rows[j])]);
            let sv = sub.svd(false, false).singular_values;
            let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            if best.map_or(true, |(_, b)| smin > b) {
                best = Some((pos, smin));
            }
        }
        let (pos, _) = best.expect("nonempty candidates");
        chosen.push(remaining.remove(pos));
    }
    chosen.extend(remaining);
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use crate::rational::RationalFunction;
    use approx::assert_relative_eq;

    fn rf(num: &[f64], den: &[f64], var: Variable) -> RationalFunction {
        RationalFunction::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()), var)
    }

    fn example3_inputs() -> (RationalMatrix, RationalMatrix) {
        let g1 = RationalMatrix::new(
            1,
            1,
            vec![rf(&[0.528, 1.0], &[-0.255, 1.0], Variable::Z)],
            Variable::Z,
        )
        .unwrap();
        let h = RationalMatrix::new(
            2,
            1,
            vec![
                rf(&[-2.0, 1.0], &[2.0, 1.0], Variable::Z),
                rf(&[-1.0, 1.0], &[2.0, 1.0], Variable::Z),
            ],
            Variable::Z,
        )
        .unwrap();
        (g1, h)
    }

    #[test]
    fn discrete_general_path_matches_displayed_factor() {
        let (g1, h) = example3_inputs();
        let res = factor_from_relation(&g1, &h, &FactorOptions::default()).unwrap();
        assert!(!res.special_case);
        assert_eq!(res.diagnostics.n_unstable, 1);
        // Q1 = (z+2)/(2z+1), canonically (0.5 z + 1)/(z + 0.5)
        let q = res.q1.entry(0, 0);
        assert_relative_eq!(q.den().coeff(0), 0.5, epsilon = 1e-9);
        assert_relative_eq!(q.num().coeff(1), 0.5, epsilon = 1e-9);
        assert_relative_eq!(q.num().coeff(0), 1.0, epsilon = 1e-9);
        // W = (z+0.528)/((2z+1)(z-0.255)) [z+2; z-2; z-1]
        let den = Polynomial::new(vec![1.0, 2.0]).mul(&Polynomial::new(vec![-0.255, 1.0]));
        let g = Polynomial::new(vec![0.528, 1.0]);
        let expect = RationalMatrix::new(
            3,
            1,
            vec![
                RationalFunction::new(
                    g.mul(&Polynomial::new(vec![2.0, 1.0])),
                    den.clone(),
                    Variable::Z,
                ),
                RationalFunction::new(
                    g.mul(&Polynomial::new(vec![-2.0, 1.0])),
                    den.clone(),
                    Variable::Z,
                ),
                RationalFunction::new(g.mul(&Polynomial::new(vec![-1.0, 1.0])), den, Variable::Z),
            ],
            Variable::Z,
        )
        .unwrap();
        assert!(res.w.approx_eq(&expect, 1e-8));
        let sylv = res.diagnostics.sylvester.as_ref().unwrap();
        assert!(sylv.residual < 1e-10);
    }

    #[test]
    fn special_case_example1() {
        let g1 = RationalMatrix::new(
            2,
            2,
            vec![
                rf(&[0.12, 0.7, 1.0], &[0.02, 0.3, 1.0], Variable::Z),
                RationalFunction::zero(Variable::Z),
                RationalFunction::zero(Variable::Z),
                rf(&[0.3, 1.0], &[0.5, 1.0], Variable::Z),
            ],
            Variable::Z,
        )
        .unwrap();
        let h = RationalMatrix::new(
            1,
            2,
            vec![
                rf(&[0.1, 1.0], &[0.3, 1.0], Variable::Z),
                RationalFunction::one(Variable::Z),
            ],
            Variable::Z,
        )
        .unwrap();
        let res = special_case_factor(&g1, &h, None).unwrap();
        assert!(res.special_case);
        // third row: [(z+0.4)/(z+0.2), (z+0.3)/(z+0.5)]
        let expect_31 = rf(&[0.4, 1.0], &[0.2, 1.0], Variable::Z);
        let d = res.w.entry(2, 0).sub(&expect_31).unwrap();
        assert!(d.is_zero() || d.num().coeffs().iter().all(|c| c.abs() < 1e-9));
        assert!(res.diagnostics.w_minimum_phase);
    }

    #[test]
    fn density_pipeline_round_trip_scalar() {
        // W_o = [(z+2); (z-2); (z-1)] / (5z-1), density from it, scalar G1
        let den = Polynomial::new(vec![-1.0, 5.0]);
        let w_o = RationalMatrix::new(
            3,
            1,
            vec![
                RationalFunction::new(Polynomial::new(vec![2.0, 1.0]), den.clone(), Variable::Z),
                RationalFunction::new(Polynomial::new(vec![-2.0, 1.0]), den.clone(), Variable::Z),
                RationalFunction::new(Polynomial::new(vec![-1.0, 1.0]), den, Variable::Z),
            ],
            Variable::Z,
        )
        .unwrap();
        let density = PartitionedSpectralDensity::from_factor(&w_o, 1).unwrap();
        let res =
            spectral_factor(&density, &G1Source::ScalarDensity, &FactorOptions::default()).unwrap();
        assert!(res.diagnostics.grid_residual.unwrap() < 1e-7);
        assert!(res.diagnostics.w_minimum_phase);
        // w_o is already minimum-phase (no common numerator root), so the
        // exact pipeline recovers it up to sign and the inner factor cancels
        assert_eq!(res.diagnostics.poles_w.len(), 1);
        assert_relative_eq!(res.diagnostics.poles_w[0].re, 0.2, epsilon = 1e-9);
        let eq = unitary_equivalence_check(&res.w, &w_o, 1e-7);
        assert!(eq.equivalent);
    }

    #[test]
    fn unitary_equivalence_detects_sign_flip() {
        let (g1, h) = example3_inputs();
        let res_a = factor_from_relation(&g1, &h, &FactorOptions::default()).unwrap();
        let res_b = factor_from_relation(
            &g1,
            &h,
            &FactorOptions {
                unitary_p: Some(DMatrix::from_element(1, 1, -1.0)),
                ..FactorOptions::default()
            },
        )
        .unwrap();
        let eq = unitary_equivalence_check(&res_a.w, &res_b.w, 1e-6);
        assert!(eq.equivalent);
        assert_relative_eq!(eq.u.unwrap()[(0, 0)], -1.0, epsilon = 1e-9);
        // an all-pass-shifted factor is not unitary-equivalent
        let shifted = res_a
            .w
            .scale_rational(&rf(&[1.0, 0.3], &[0.3, 1.0], Variable::Z))
            .unwrap();
        let eq2 = unitary_equivalence_check(&res_a.w, &shifted, 1e-6);
        assert!(!eq2.equivalent);
    }

    #[test]
    fn h_extraction_matches_construction() {
        let (g1, h) = example3_inputs();
        let w_unstable = RationalMatrix::vstack(&g1, &h.mul(&g1).unwrap()).unwrap();
        let density = PartitionedSpectralDensity::from_factor(&w_unstable, 1).unwrap();
        let h_ext = density.compute_h().unwrap();
        assert!(h_ext.approx_eq(&h, 1e-7));
    }

    #[test]
    fn trivial_partition_p_zero() {
        let g1 = RationalMatrix::new(
            1,
            1,
            vec![rf(&[0.4, 1.0], &[0.2, 1.0], Variable::Z)],
            Variable::Z,
        )
        .unwrap();
        let density = PartitionedSpectralDensity::from_factor(&g1, 1).unwrap();
        let h = density.compute_h().unwrap();
        assert!(h.is_empty());
        let res =
            spectral_factor(&density, &G1Source::Given(g1.clone()), &FactorOptions::default())
                .unwrap();
        assert!(res.special_case);
        assert!(res.w.approx_eq(&g1, 1e-9));
    }
}

//! Serializable diagnostic reports emitted next to computed factors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::factor::{Diagnostics, FactorizationResult};
use crate::rational::Variable;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub variable: Variable,
    pub m: usize,
    pub p: usize,
    pub n_u: usize,
    pub special_case: bool,
    /// [re, im] pairs.
    pub poles_w: Vec<[f64; 2]>,
    pub zeros_w: Vec<[f64; 2]>,
    pub grid_residual: Option<f64>,
    pub inner_residual: f64,
    pub w2_identity_residual: f64,
    pub w1_identity_residual: f64,
    pub h_stable: bool,
    pub w1_minimum_phase: bool,
    pub w_minimum_phase: bool,
    pub sylvester: Option<SylvesterReport>,
    pub tolerances: ToleranceReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SylvesterReport {
    pub x: Vec<Vec<f64>>,
    pub m_matrix: Vec<Vec<f64>>,
    pub residual: f64,
    pub smallest_singular_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToleranceReport {
    pub residual: f64,
    pub cancellation: f64,
    pub grid_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WienerReport {
    pub variable: Variable,
    pub strictly_causal: bool,
    pub reconstruction_residual: f64,
    pub f_poles: Vec<[f64; 2]>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub residual: f64,
    pub residual_tolerance: f64,
    pub minimum_phase: bool,
    pub stable: bool,
    pub pass: bool,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifyReport {
    pub samples: usize,
    pub h_coefficients: Vec<Vec<f64>>,
    pub arma_converged: bool,
    pub innovation_variance: f64,
    pub poles_w: Vec<[f64; 2]>,
    pub zeros_w: Vec<[f64; 2]>,
    pub special_case: bool,
    pub warnings: Vec<String>,
}

pub fn complex_pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

impl FactorizationReport {
    pub fn from_result(
        res: &FactorizationResult,
        residual_tol: f64,
        cancellation_tol: f64,
        grid_points: usize,
    ) -> Self {
        let d: &Diagnostics = &res.diagnostics;
        FactorizationReport {
            variable: res.w.var(),
            m: res.w1.cols(),
            p: res.w2.rows(),
            n_u: d.n_unstable,
            special_case: res.special_case,
            poles_w: complex_pairs(&d.poles_w),
            zeros_w: complex_pairs(&d.zeros_w),
            grid_residual: d.grid_residual,
            inner_residual: d.inner_residual,
            w2_identity_residual: d.w2_identity_residual,
            w1_identity_residual: d.w1_identity_residual,
            h_stable: d.h_stable,
            w1_minimum_phase: d.w1_minimum_phase,
            w_minimum_phase: d.w_minimum_phase,
            sylvester: d.sylvester.as_ref().map(|s| SylvesterReport {
                x: matrix_rows(&s.x),
                m_matrix: matrix_rows(&s.m_matrix),
                residual: s.residual,
                smallest_singular_value: s.smallest_singular_value,
            }),
            tolerances: ToleranceReport {
                residual: residual_tol,
                cancellation: cancellation_tol,
                grid_points,
            },
            warnings: d.warnings.clone(),
        }
    }

    /// One-paragraph human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}-domain factorization: {}x{} factor, n_u = {}, {} path.\n",
            self.variable,
            self.m + self.p,
            self.m,
            self.n_u,
            if self.special_case { "special-case" } else { "general" }
        );
        s.push_str(&format!(
            "poles: {}\nzeros: {}\n",
            fmt_pairs(&self.poles_w),
            fmt_pairs(&self.zeros_w)
        ));
        if let Some(r) = self.grid_residual {
            s.push_str(&format!("density residual: {r:.3e}\n"));
        }
        s.push_str(&format!(
            "inner residual: {:.3e}; minimum-phase: {}\n",
            self.inner_residual, self.w_minimum_phase
        ));
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

fn fmt_pairs(v: &[[f64; 2]]) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|p| {
            if p[1].abs() < 1e-9 {
                format!("{:.6}", p[0])
            } else {
                format!("{:.6}{:+.6}i", p[0], p[1])
            }
        })
        .collect();
    format!("[{}]", parts.join(", "))
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

//! Rational transfer-function matrices with entrywise canonical arithmetic.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::rational::{RationalFunction, Variable};
use crate::tol;

#[derive(Debug)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<RationalFunction>,
    var: Variable,
    rank_cache: OnceLock<usize>,
}

impl Clone for RationalMatrix {
    fn clone(&self) -> Self {
        let cache = OnceLock::new();
        if let Some(&r) = self.rank_cache.get() {
            let _ = cache.set(r);
        }
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.clone(),
            var: self.var,
            rank_cache: cache,
        }
    }
}

impl PartialEq for RationalMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.var == other.var
            && self.entries == other.entries
    }
}

impl RationalMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<RationalFunction>, var: Variable) -> Result<Self> {
        if rows == 0 && cols == 0 {
            return Err(Error::InvalidInput("empty matrix must have one nonzero dimension".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                found: format!("{}", entries.len()),
            });
        }
        if entries.iter().any(|e| e.var() != var) {
            return Err(Error::VariableMismatch);
        }
        Ok(RationalMatrix { rows, cols, entries, var, rank_cache: OnceLock::new() })
    }

    pub fn from_fn<F>(rows: usize, cols: usize, var: Variable, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> RationalFunction,
    {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self::new(rows, cols, entries, var)
    }

    pub fn identity(n: usize, var: Variable) -> Self {
        Self::from_fn(n, n, var, |i, j| {
            if i == j {
                RationalFunction::one(var)
            } else {
                RationalFunction::zero(var)
            }
        })
        .expect("identity construction")
    }

    pub fn zeros_matrix(rows: usize, cols: usize, var: Variable) -> Self {
        RationalMatrix {
            rows,
            cols,
            entries: vec![RationalFunction::zero(var); rows * cols],
            var,
            rank_cache: OnceLock::new(),
        }
    }

    /// Embeds a constant real matrix.
    pub fn from_constant(m: &DMatrix<f64>, var: Variable) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), var, |i, j| {
            RationalFunction::constant(m[(i, j)], var)
        })
        .expect("constant embedding")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn var(&self) -> Variable {
        self.var
    }

    pub fn entry(&self, i: usize, j: usize) -> &RationalFunction {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[RationalFunction] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, self.var, |i, j| self.entry(j, i).clone())
            .expect("transpose")
    }

    pub fn block(&self, row0: usize, col0: usize, nrows: usize, ncols: usize) -> Self {
        assert!(row0 + nrows <= self.rows && col0 + ncols <= self.cols, "block out of range");
        RationalMatrix {
            rows: nrows,
            cols: ncols,
            entries: (0..nrows)
                .flat_map(|i| (0..ncols).map(move |j| (i, j)))
                .map(|(i, j)| self.entry(row0 + i, col0 + j).clone())
                .collect(),
            var: self.var,
            rank_cache: OnceLock::new(),
        }
    }

    pub fn vstack(top: &Self, bottom: &Self) -> Result<Self> {
        if top.is_empty() {
            return Ok(bottom.clone());
        }
        if bottom.is_empty() {
            return Ok(top.clone());
        }
        if top.cols != bottom.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} cols", top.cols),
                found: format!("{} cols", bottom.cols),
            });
        }
        if top.var != bottom.var {
            return Err(Error::VariableMismatch);
        }
        let mut entries = top.entries.clone();
        entries.extend(bottom.entries.iter().cloned());
        Self::new(top.rows + bottom.rows, top.cols, entries, top.var)
    }

    pub fn map<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&RationalFunction) -> RationalFunction,
    {
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| f(e)).collect(),
            var: self.var,
            rank_cache: OnceLock::new(),
        }
    }

    pub fn neg(&self) -> Self {
        self.map(|e| e.neg())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.rows, self.cols, entries, self.var)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.var != other.var {
            return Err(Error::VariableMismatch);
        }
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows", self.cols),
                found: format!("{} rows", other.rows),
            });
        }
        if self.is_empty() || other.is_empty() {
            return Ok(Self::zeros_matrix(self.rows, other.cols, self.var));
        }
        Self::from_fn(self.rows, other.cols, self.var, |i, j| {
            let mut acc = RationalFunction::zero(self.var);
            for k in 0..self.cols {
                let term = self.entry(i, k).mul(other.entry(k, j)).expect("var checked");
                acc = acc.add(&term).expect("var checked");
            }
            acc
        })
    }

    /// Multiplies by a scalar rational function.
    pub fn scale_rational(&self, s: &RationalFunction) -> Result<Self> {
        if s.var() != self.var {
            return Err(Error::VariableMismatch);
        }
        Ok(self.map(|e| e.mul(s).expect("var checked")))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|e| e.scale(s))
    }

    /// Left multiplication by a constant matrix.
    pub fn const_mul_left(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} cols", self.rows),
                found: format!("{}", m.ncols()),
            });
        }
        Self::from_fn(m.nrows(), self.cols, self.var, |i, j| {
            let mut acc = RationalFunction::zero(self.var);
            for k in 0..self.rows {
                if m[(i, k)] != 0.0 {
                    acc = acc.add(&self.entry(k, j).scale(m[(i, k)])).expect("var checked");
                }
            }
            acc
        })
    }

    /// Right multiplication by a constant matrix.
    pub fn const_mul_right(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows", self.cols),
                found: format!("{}", m.nrows()),
            });
        }
        Self::from_fn(self.rows, m.ncols(), self.var, |i, j| {
            let mut acc = RationalFunction::zero(self.var);
            for k in 0..self.cols {
                if m[(k, j)] != 0.0 {
                    acc = acc.add(&self.entry(i, k).scale(m[(k, j)])).expect("var checked");
                }
            }
            acc
        })
    }

    /// Para-conjugate: transpose composed with z -> 1/z (discrete) or
    /// s -> -s (continuous).
    pub fn para_conjugate(&self) -> Self {
        Self::from_fn(self.cols, self.rows, self.var, |i, j| {
            self.entry(j, i).para_conjugate()
        })
        .expect("para conjugate")
    }

    /// Entrywise evaluation, rejecting points within tolerance of any pole.
    pub fn evaluate(&self, p: Complex64) -> Result<DMatrix<Complex64>> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self.entry(i, j).eval(p)?;
            }
        }
        Ok(out)
    }

    /// Evaluation without the pole-distance check.
    pub fn evaluate_unchecked(&self, p: Complex64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entry(i, j).eval_unchecked(p))
    }

    /// Deterministic off-boundary probe points that avoid all entry poles.
    fn probe_points(&self, count: usize) -> Vec<Complex64> {
        let candidates = [
            Complex64::new(0.8373, 0.4129),
            Complex64::new(1.3117, -0.7026),
            Complex64::new(-0.5721, 0.9384),
            Complex64::new(2.0913, 0.3571),
            Complex64::new(-1.7438, -0.6192),
            Complex64::new(0.4412, -1.5278),
            Complex64::new(3.1077, 1.2093),
            Complex64::new(-0.2558, 2.4431),
            Complex64::new(1.9341, -2.2917),
            Complex64::new(-2.8655, 0.1473),
            Complex64::new(0.6899, 0.8812),
            Complex64::new(-1.1234, -1.3345),
        ];
        let mut out = Vec::with_capacity(count);
        for &c in candidates.iter().cycle().take(4 * count) {
            if out.len() == count {
                break;
            }
            let mut p = c;
            // nudge duplicates from cycling
            p += Complex64::new(0.0317, 0.0191) * out.len() as f64;
            let clear = self.entries.iter().all(|e| {
                e.den()
                    .roots()
                    .iter()
                    .all(|r| (p - r).norm() > 1e-6 * (1.0 + r.norm()))
            });
            if clear {
                out.push(p);
            }
        }
        assert!(out.len() == count, "could not find pole-free probe points");
        out
    }

    /// Normal rank: the rank at generic points, computed once at two probe
    /// points (which must agree) and cached.
    pub fn normal_rank(&self) -> usize {
        *self.rank_cache.get_or_init(|| {
            if self.is_empty() {
                return 0;
            }
            let pts = self.probe_points(2);
            let r0 = complex_rank(&self.evaluate_unchecked(pts[0]));
            let r1 = complex_rank(&self.evaluate_unchecked(pts[1]));
            r0.max(r1)
        })
    }

    /// Determinant by cofactor expansion (square matrices at desk scale).
    pub fn determinant(&self) -> Result<RationalFunction> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", self.rows, self.cols),
            });
        }
        Ok(self.det_inner(&(0..self.cols).collect::<Vec<_>>(), 0))
    }

    fn det_inner(&self, cols: &[usize], row: usize) -> RationalFunction {
        if cols.is_empty() {
            return RationalFunction::one(self.var);
        }
        if cols.len() == 1 {
            return self.entry(row, cols[0]).clone();
        }
        let mut acc = RationalFunction::zero(self.var);
        for (k, &j) in cols.iter().enumerate() {
            let e = self.entry(row, j);
            if e.is_zero() {
                continue;
            }
            let rest: Vec<usize> = cols.iter().copied().filter(|&c| c != j).collect();
            let minor = self.det_inner(&rest, row + 1);
            let term = e.mul(&minor).expect("var checked");
            acc = if k % 2 == 0 {
                acc.add(&term).expect("var checked")
            } else {
                acc.sub(&term).expect("var checked")
            };
        }
        acc
    }

    /// Inverse by adjugate over determinant.
    pub fn inverse(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", self.rows, self.cols),
            });
        }
        let det = self.determinant()?;
        if det.is_zero() {
            return Err(Error::SingularMatrix);
        }
        let n = self.rows;
        if n == 1 {
            return Self::new(
                1,
                1,
                vec![RationalFunction::one(self.var).div(self.entry(0, 0))?],
                self.var,
            );
        }
        Self::from_fn(n, n, self.var, |i, j| {
            // cofactor C_ji / det
            let rows: Vec<usize> = (0..n).filter(|&r| r != j).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| c != i).collect();
            let minor = self.minor_det(&rows, &cols);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            minor.scale(sign).div(&det).expect("nonzero determinant")
        })
    }

    fn minor_det(&self, rows: &[usize], cols: &[usize]) -> RationalFunction {
        if rows.is_empty() {
            return RationalFunction::one(self.var);
        }
        if rows.len() == 1 {
            return self.entry(rows[0], cols[0]).clone();
        }
        let mut acc = RationalFunction::zero(self.var);
        for (k, &j) in cols.iter().enumerate() {
            let e = self.entry(rows[0], j);
            if e.is_zero() {
                continue;
            }
            let sub_cols: Vec<usize> = cols.iter().copied().filter(|&c| c != j).collect();
            let minor = self.minor_det(&rows[1..], &sub_cols);
            let term = e.mul(&minor).expect("var checked");
            acc = if k % 2 == 0 {
                acc.add(&term).expect("var checked")
            } else {
                acc.sub(&term).expect("var checked")
            };
        }
        acc
    }

    /// All entry denominators strictly stable.
    pub fn is_stable(&self) -> bool {
        self.entries.iter().all(|e| e.is_stable())
    }

    /// McMillan pole multiset via the minimal realization.
    pub fn poles(&self) -> Vec<Complex64> {
        crate::realization::mcmillan_poles(self)
    }

    /// Transmission zeros via the system-matrix pencil of a minimal
    /// realization.
    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        crate::analysis::transmission_zeros(self)
    }

    /// Poles strictly inside the stability region and zeros in its closure.
    pub fn is_minimum_phase(&self) -> Result<bool> {
        if !self.is_stable() {
            return Ok(false);
        }
        let zeros = self.zeros()?;
        Ok(zeros.iter().all(|z| self.var.is_in_closed_region(*z)))
    }

    /// Equality as rational functions, decided by sampling at probe points.
    pub fn approx_eq(&self, other: &Self, tolerance: f64) -> bool {
        if self.rows != other.rows || self.cols != other.cols || self.var != other.var {
            return false;
        }
        if self.is_empty() {
            return true;
        }
        let diff = match self.sub(other) {
            Ok(d) => d,
            Err(_) => return false,
        };
        let pts = [self.probe_points(4), other.probe_points(4)].concat();
        pts.iter().all(|&p| {
            let d = diff.evaluate_unchecked(p);
            let a = self.evaluate_unchecked(p);
            let b = other.evaluate_unchecked(p);
            let scale = 1.0 + a.norm().max(b.norm());
            d.norm() <= tolerance * scale
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.var != other.var {
            return Err(Error::VariableMismatch);
        }
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                found: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    pub fn to_document(&self) -> RationalMatrixDoc {
        RationalMatrixDoc {
            variable: self.var,
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .map(|e| EntryDoc {
                    num: e.num().coeffs().to_vec(),
                    den: e.den().coeffs().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &RationalMatrixDoc) -> Result<Self> {
        if doc.entries.len() != doc.rows * doc.cols {
            return Err(Error::InvalidInput(format!(
                "entries length {} does not match {}x{}",
                doc.entries.len(),
                doc.rows,
                doc.cols
            )));
        }
        let mut entries = Vec::with_capacity(doc.entries.len());
        for (k, e) in doc.entries.iter().enumerate() {
            if e.num.iter().chain(e.den.iter()).any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!("entries[{k}]: non-finite coefficient")));
            }
            let den = Polynomial::new(e.den.clone());
            if den.is_zero() {
                return Err(Error::InvalidInput(format!("entries[{k}].den: zero denominator")));
            }
            entries.push(RationalFunction::try_new(
                Polynomial::new(e.num.clone()),
                den,
                doc.variable,
            )?);
        }
        Self::new(doc.rows, doc.cols, entries, doc.variable)
    }
}

/// Text serialization schema for a rational matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RationalMatrixDoc {
    pub variable: Variable,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<EntryDoc>,
}

/// One rational entry; coefficients in ascending degree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryDoc {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

/// Rank of a complex matrix by singular values at the shared relative
/// threshold.
pub fn complex_rank(m: &DMatrix<Complex64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol::RANK_REL * smax).count()
}

/// Evenly spaced points on the stability boundary.
pub fn boundary_grid(var: Variable, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| var.boundary_point((k as f64 + 0.5) / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rf_z(num: &[f64], den: &[f64]) -> RationalFunction {
        RationalFunction::new(
            Polynomial::new(num.to_vec()),
            Polynomial::new(den.to_vec()),
            Variable::Z,
        )
    }

    #[test]
    fn identity_evaluates_to_identity() {
        let m = RationalMatrix::identity(2, Variable::Z);
        let v = m.evaluate(Complex64::new(0.3, 0.9)).unwrap();
        assert_relative_eq!(v[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(v[(1, 1)].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(v[(0, 1)].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn mul_by_identity_is_noop() {
        let g = RationalMatrix::new(
            1,
            2,
            vec![rf_z(&[0.4, 1.0], &[0.2, 1.0]), rf_z(&[0.3, 1.0], &[0.5, 1.0])],
            Variable::Z,
        )
        .unwrap();
        let prod = g.mul(&RationalMatrix::identity(2, Variable::Z)).unwrap();
        assert!(prod.approx_eq(&g, 1e-12));
    }

    #[test]
    fn inverse_of_diagonal_is_reciprocal() {
        let g = RationalMatrix::new(
            2,
            2,
            vec![
                rf_z(&[0.4, 1.0], &[0.2, 1.0]),
                RationalFunction::zero(Variable::Z),
                RationalFunction::zero(Variable::Z),
                rf_z(&[0.3, 1.0], &[0.5, 1.0]),
            ],
            Variable::Z,
        )
        .unwrap();
        let inv = g.inverse().unwrap();
        let prod = g.mul(&inv).unwrap();
        assert!(prod.approx_eq(&RationalMatrix::identity(2, Variable::Z), 1e-9));
    }

    #[test]
    fn scalar_inverse_is_reciprocal() {
        // (z+2)/(5z-1) -> (5z-1)/(z+2), canonically (z-0.2)/(0.2 z+0.4)
        let g = RationalMatrix::new(1, 1, vec![rf_z(&[2.0, 1.0], &[-1.0, 5.0])], Variable::Z).unwrap();
        let inv = g.inverse().unwrap();
        let p = Complex64::new(1.0, 0.5);
        let a = g.evaluate(p).unwrap()[(0, 0)];
        let b = inv.evaluate(p).unwrap()[(0, 0)];
        assert!((a * b - Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn normal_rank_detects_dependency() {
        let row = vec![rf_z(&[0.4, 1.0], &[0.2, 1.0]), rf_z(&[0.3, 1.0], &[0.5, 1.0])];
        let mut entries = row.clone();
        entries.extend(row.iter().map(|e| e.scale(2.0)));
        let m = RationalMatrix::new(2, 2, entries, Variable::Z).unwrap();
        assert_eq!(m.normal_rank(), 1);
        let id = RationalMatrix::identity(3, Variable::Z);
        assert_eq!(id.normal_rank(), 3);
    }

    #[test]
    fn document_round_trip_is_bit_exact() {
        let m = RationalMatrix::new(
            1,
            2,
            vec![rf_z(&[0.528, 1.0], &[-0.255, 1.0]), rf_z(&[-2.0, 1.0], &[2.0, 1.0])],
            Variable::Z,
        )
        .unwrap();
        let doc = m.to_document();
        let json = serde_json::to_string(&doc).unwrap();
        let doc2: RationalMatrixDoc = serde_json::from_str(&json).unwrap();
        let m2 = RationalMatrix::from_document(&doc2).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn para_conjugate_matches_conjugate_transpose_on_boundary() {
        let m = RationalMatrix::new(
            2,
            1,
            vec![rf_z(&[0.4, 1.0], &[0.2, 1.0]), rf_z(&[-2.0, 1.0], &[0.5, 1.0])],
            Variable::Z,
        )
        .unwrap();
        let pc = m.para_conjugate();
        for k in 0..8 {
            let p = Variable::Z.boundary_point(k as f64 / 8.0 + 0.03);
            let lhs = pc.evaluate(p).unwrap();
            let rhs = m.evaluate(p).unwrap().adjoint();
            assert!((lhs - rhs).norm() < 1e-9);
        }
    }
}

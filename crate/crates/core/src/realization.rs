//! Minimal state-space realizations with stable/unstable block ordering.
//!
//! Construction follows the classical summation form: the strictly proper
//! part is split over its pole clusters, each cluster gets a Gilbert block
//! (simple real pole), per-column Jordan chains (repeated real pole) or
//! per-column real companion blocks (complex-conjugate pairs), and the
//! parallel composition is reduced to minimality per cluster. Clusters with
//! disjoint spectra compose without losing minimality, so the final A is
//! block diagonal with the unstable clusters ordered first.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cpoly;
use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::rational::{RationalFunction, Variable};
use crate::rmatrix::RationalMatrix;
use crate::tol;

/// State-space quadruple with block upper-triangular A: the leading
/// `n_unstable` states carry the unstable poles.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub n_unstable: usize,
    pub var: Variable,
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn a_unstable(&self) -> DMatrix<f64> {
        let nu = self.n_unstable;
        self.a.view((0, 0), (nu, nu)).into()
    }

    pub fn a_stable(&self) -> DMatrix<f64> {
        let nu = self.n_unstable;
        let ns = self.order() - nu;
        self.a.view((nu, nu), (ns, ns)).into()
    }

    pub fn a_coupling(&self) -> DMatrix<f64> {
        let nu = self.n_unstable;
        let ns = self.order() - nu;
        self.a.view((0, nu), (nu, ns)).into()
    }

    pub fn b_unstable(&self) -> DMatrix<f64> {
        self.b.view((0, 0), (self.n_unstable, self.inputs())).into()
    }

    pub fn b_stable(&self) -> DMatrix<f64> {
        let nu = self.n_unstable;
        self.b.view((nu, 0), (self.order() - nu, self.inputs())).into()
    }

    pub fn c_unstable(&self) -> DMatrix<f64> {
        self.c.view((0, 0), (self.outputs(), self.n_unstable)).into()
    }

    pub fn c_stable(&self) -> DMatrix<f64> {
        let nu = self.n_unstable;
        self.c.view((0, nu), (self.outputs(), self.order() - nu)).into()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        if self.order() == 0 {
            return Vec::new();
        }
        let mut e: Vec<Complex64> = self.a.complex_eigenvalues().iter().copied().collect();
        sort_complex(&mut e);
        e
    }

    /// Exact rational reconstruction of C (xI - A)^-1 B + D by the
    /// Leverrier-Faddeev recursion.
    pub fn transfer(&self) -> RationalMatrix {
        let n = self.order();
        let p = self.outputs();
        let m = self.inputs();
        if n == 0 {
            return RationalMatrix::from_constant(&self.d, self.var);
        }
        // charpoly x^n + c[n-1] x^(n-1) + ... + c[0] and adjugate coefficients
        let mut nmats: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        let mut cpoly = vec![0.0; n + 1];
        cpoly[n] = 1.0;
        let mut nk = DMatrix::<f64>::identity(n, n);
        for k in 1..=n {
            nmats.push(nk.clone());
            let mk = &self.a * &nk;
            let ck = -mk.trace() / k as f64;
            cpoly[n - k] = ck;
            nk = mk + DMatrix::identity(n, n) * ck;
        }
        let den = Polynomial::new(cpoly.clone());
        // numerators: C (sum_k N_k x^(n-1-k)) B + D * charpoly
        let mut coeff_mats: Vec<DMatrix<f64>> = Vec::with_capacity(n);
        for nm in &nmats {
            coeff_mats.push(&self.c * nm * &self.b);
        }
        RationalMatrix::from_fn(p, m, self.var, |i, j| {
            let mut num = vec![0.0; n + 1];
            for (k, cm) in coeff_mats.iter().enumerate() {
                num[n - 1 - k] += cm[(i, j)];
            }
            let dij = self.d[(i, j)];
            if dij != 0.0 {
                for (t, slot) in num.iter_mut().enumerate() {
                    *slot += dij * cpoly[t];
                }
            }
            RationalFunction::new(Polynomial::new(num), den.clone(), self.var)
        })
        .expect("transfer construction")
    }

    /// State transformation (PAP^-1, PB, CP^-1, D); the stable/unstable
    /// split index is re-audited on the transformed matrices.
    pub fn similarity(&self, p: &DMatrix<f64>) -> Result<StateSpace> {
        let n = self.order();
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n}"),
                found: format!("{}x{}", p.nrows(), p.ncols()),
            });
        }
        if n == 0 {
            return Ok(self.clone());
        }
        let lu = p.clone().lu();
        let det = lu.determinant();
        if !det.is_finite() || det.abs() < 1e-13 * p.norm().powi(n as i32).max(1e-300) {
            return Err(Error::SingularTransform);
        }
        let pinv = lu.try_inverse().ok_or(Error::SingularTransform)?;
        let a = p * &self.a * &pinv;
        let b = p * &self.b;
        let c = &self.c * &pinv;
        let mut out = StateSpace {
            a,
            b,
            c,
            d: self.d.clone(),
            n_unstable: 0,
            var: self.var,
        };
        out.n_unstable = audit_split(&out.a, self.var)?;
        // zero the lower-left block exactly
        let nu = out.n_unstable;
        for i in nu..n {
            for j in 0..nu {
                out.a[(i, j)] = 0.0;
            }
        }
        Ok(out)
    }

    /// Checks the structural invariants: block triangular form, spectral
    /// classification of the diagonal blocks and minimality.
    pub fn validate(&self) -> Result<()> {
        let n = self.order();
        let nu = self.n_unstable;
        if nu > n {
            return Err(Error::InvalidInput("n_unstable exceeds state dimension".into()));
        }
        let scale = self.a.norm().max(1.0);
        for i in nu..n {
            for j in 0..nu {
                if self.a[(i, j)].abs() > 1e-12 * scale {
                    return Err(Error::PreconditionViolated(
                        "lower-left block of A is not zero".into(),
                    ));
                }
            }
        }
        if nu > 0 {
            for ev in self.a_unstable().complex_eigenvalues().iter() {
                if !self.var.is_strictly_unstable(*ev) {
                    return Err(Error::PreconditionViolated(format!(
                        "A_u eigenvalue {ev} is not outside the closed stability region"
                    )));
                }
            }
        }
        if n > nu {
            for ev in self.a_stable().complex_eigenvalues().iter() {
                if self.var.is_strictly_unstable(*ev) {
                    return Err(Error::PreconditionViolated(format!(
                        "A_s eigenvalue {ev} is outside the closed stability region"
                    )));
                }
            }
        }
        if n > 0 {
            let (rc, ro) = (controllable_rank(&self.a, &self.b), observable_rank(&self.a, &self.c));
            if rc < n || ro < n {
                return Err(Error::PreconditionViolated(format!(
                    "realization is not minimal (controllable rank {rc}, observable rank {ro}, n {n})"
                )));
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> StateSpaceDoc {
        StateSpaceDoc {
            variable: self.var,
            n_u: self.n_unstable,
            a: matrix_rows(&self.a),
            b: matrix_rows(&self.b),
            c: matrix_rows(&self.c),
            d: matrix_rows(&self.d),
        }
    }

    pub fn from_document(doc: &StateSpaceDoc) -> Result<StateSpace> {
        let a = rows_matrix(&doc.a, "a")?;
        let b = rows_matrix(&doc.b, "b")?;
        let c = rows_matrix(&doc.c, "c")?;
        let d = rows_matrix(&doc.d, "d")?;
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::InvalidInput("inconsistent realization dimensions".into()));
        }
        if doc.n_u > n {
            return Err(Error::InvalidInput("n_u exceeds state dimension".into()));
        }
        Ok(StateSpace { a, b, c, d, n_unstable: doc.n_u, var: doc.variable })
    }
}

/// Serialization schema for a realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSpaceDoc {
    pub variable: Variable,
    pub n_u: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::InvalidInput(format!("{name}: ragged rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{name}: non-finite value")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|x, y| {
        (x.norm(), x.arg(), x.re)
            .partial_cmp(&(y.norm(), y.arg(), y.re))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// Finds the split index for a block-triangular A, or fails when the
/// spectra cannot be separated along the current state ordering.
fn audit_split(a: &DMatrix<f64>, var: Variable) -> Result<usize> {
    let n = a.nrows();
    let eigs = a.complex_eigenvalues();
    let nu = eigs.iter().filter(|e| var.is_strictly_unstable(**e)).count();
    let scale = a.norm().max(1.0);
    let mut ok = true;
    for i in nu..n {
        for j in 0..nu {
            if a[(i, j)].abs() > 1e-9 * scale {
                ok = false;
            }
        }
    }
    if ok && nu > 0 && nu < n {
        let au: DMatrix<f64> = a.view((0, 0), (nu, nu)).into();
        ok = au
            .complex_eigenvalues()
            .iter()
            .all(|e| var.is_strictly_unstable(*e));
    }
    if !ok {
        return Err(Error::PreconditionViolated(
            "transformed state matrix does not retain the stable/unstable block-triangular form"
                .into(),
        ));
    }
    Ok(nu)
}

// ---------------------------------------------------------------------------
// minimal realization construction
// ---------------------------------------------------------------------------

struct PoleCluster {
    /// Representative location (Im >= 0).
    center: Complex64,
    /// Per-entry member roots (entry index -> that entry's roots in the
    /// cluster, conjugates excluded for complex clusters).
    members: Vec<(usize, Vec<Complex64>)>,
    real: bool,
}

struct Block {
    a: DMatrix<f64>,
    /// column index the chain feeds from, or None for a Gilbert block with
    /// a full-width B.
    input_col: Option<usize>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

/// Builds a minimal realization of a proper rational matrix with the
/// unstable block ordered first.
pub fn minimal_realization(t: &RationalMatrix) -> Result<StateSpace> {
    let p = t.rows();
    let m = t.cols();
    let var = t.var();
    // feedthrough
    let mut d = DMatrix::<f64>::zeros(p, m);
    for i in 0..p {
        for j in 0..m {
            match t.entry(i, j).value_at_infinity() {
                Some(v) => d[(i, j)] = v,
                None => return Err(Error::NotProper { row: i, col: j }),
            }
        }
    }
    if t.is_empty() {
        return Ok(StateSpace {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d,
            n_unstable: 0,
            var,
        });
    }

    let clusters = cluster_poles(t);
    let mut unstable_blocks: Vec<(Complex64, Vec<Block>)> = Vec::new();
    let mut stable_blocks: Vec<(Complex64, Vec<Block>)> = Vec::new();
    for cl in &clusters {
        let blocks = realize_cluster(t, cl, p, m)?;
        let blocks = reduce_cluster(blocks, p, m);
        if blocks.is_empty() {
            continue;
        }
        if var.is_strictly_unstable(cl.center) {
            unstable_blocks.push((cl.center, blocks));
        } else {
            stable_blocks.push((cl.center, blocks));
        }
    }
    let order_key = |c: &Complex64| (c.norm(), c.arg().abs(), c.re);
    unstable_blocks.sort_by(|x, y| {
        order_key(&x.0)
            .partial_cmp(&order_key(&y.0))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    stable_blocks.sort_by(|x, y| {
        order_key(&x.0)
            .partial_cmp(&order_key(&y.0))
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let n_u: usize = unstable_blocks
        .iter()
        .flat_map(|(_, bs)| bs.iter())
        .map(|b| b.a.nrows())
        .sum();
    let all: Vec<&Block> = unstable_blocks
        .iter()
        .chain(stable_blocks.iter())
        .flat_map(|(_, bs)| bs.iter())
        .collect();
    let n: usize = all.iter().map(|b| b.a.nrows()).sum();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, m);
    let mut c = DMatrix::<f64>::zeros(p, n);
    let mut at = 0;
    for blk in &all {
        let k = blk.a.nrows();
        a.view_mut((at, at), (k, k)).copy_from(&blk.a);
        match blk.input_col {
            Some(col) => {
                for i in 0..k {
                    b[(at + i, col)] = blk.b[(i, 0)];
                }
            }
            None => {
                b.view_mut((at, 0), (k, m)).copy_from(&blk.b);
            }
        }
        c.view_mut((0, at), (p, k)).copy_from(&blk.c);
        at += k;
    }
    let ss = StateSpace { a, b, c, d, n_unstable: n_u, var };
    ss.validate()?;
    Ok(ss)
}

/// McMillan pole multiset: eigenvalues of the minimal realization of the
/// proper part (the polynomial part only contributes poles at infinity).
pub fn mcmillan_poles(t: &RationalMatrix) -> Vec<Complex64> {
    let proper = strip_polynomial_part(t).1;
    let ss = minimal_realization(&proper).expect("proper part realization");
    ss.eigenvalues()
}

/// Splits T = P + T_sp with P a polynomial matrix and T_sp strictly...
/// proper entries bounded at infinity (each entry keeps its own direct
/// term, so T_sp is proper and P carries only the excess degrees).
pub fn strip_polynomial_part(t: &RationalMatrix) -> (RationalMatrix, RationalMatrix) {
    let var = t.var();
    let mut poly_part = Vec::with_capacity(t.rows() * t.cols());
    let mut proper_part = Vec::with_capacity(t.rows() * t.cols());
    for e in t.entries() {
        if e.is_proper() {
            poly_part.push(RationalFunction::zero(var));
            proper_part.push(e.clone());
        } else {
            let (q, r) = e.num().divmod(e.den());
            // keep the constant term with the proper part
            let q_const = Polynomial::constant(q.coeff(0));
            let q_rest = q.sub(&q_const);
            poly_part.push(RationalFunction::new(q_rest, Polynomial::one(), var));
            let rem = RationalFunction::new(r, e.den().clone(), var)
                .add(&RationalFunction::new(q_const, Polynomial::one(), var))
                .expect("var checked");
            proper_part.push(rem);
        }
    }
    (
        RationalMatrix::new(t.rows(), t.cols(), poly_part, var).expect("shape"),
        RationalMatrix::new(t.rows(), t.cols(), proper_part, var).expect("shape"),
    )
}

fn cluster_poles(t: &RationalMatrix) -> Vec<PoleCluster> {
    struct Raw {
        center: Complex64,
        weight: usize,
        members: Vec<(usize, Complex64)>,
    }
    let mut raw: Vec<Raw> = Vec::new();
    for (idx, e) in t.entries().iter().enumerate() {
        for r in e.den().roots() {
            let mut placed = false;
            for cl in raw.iter_mut() {
                if (r - cl.center).norm() <= tol::POLE_CLUSTER * (1.0 + cl.center.norm()) {
                    cl.members.push((idx, r));
                    cl.center = (cl.center * cl.weight as f64 + r) / (cl.weight + 1) as f64;
                    cl.weight += 1;
                    placed = true;
                    break;
                }
            }
            if !placed {
                raw.push(Raw { center: r, weight: 1, members: vec![(idx, r)] });
            }
        }
    }
    // realify centers and fold conjugate clusters onto the Im >= 0 member
    let mut out: Vec<PoleCluster> = Vec::new();
    let mut consumed = vec![false; raw.len()];
    for i in 0..raw.len() {
        if consumed[i] {
            continue;
        }
        let ci = raw[i].center;
        if ci.im.abs() <= tol::POLE_CLUSTER * (1.0 + ci.norm()) {
            consumed[i] = true;
            let mut members: Vec<(usize, Vec<Complex64>)> = Vec::new();
            for (idx, r) in &raw[i].members {
                match members.iter_mut().find(|(e, _)| e == idx) {
                    Some((_, v)) => v.push(*r),
                    None => members.push((*idx, vec![*r])),
                }
            }
            out.push(PoleCluster {
                center: Complex64::new(ci.re, 0.0),
                members,
                real: true,
            });
        } else {
            // find the conjugate cluster
            let mut partner = None;
            for (j, rj) in raw.iter().enumerate() {
                if j != i && !consumed[j]
                    && (rj.center - ci.conj()).norm() <= 10.0 * tol::POLE_CLUSTER * (1.0 + ci.norm())
                {
                    partner = Some(j);
                    break;
                }
            }
            consumed[i] = true;
            if let Some(j) = partner {
                consumed[j] = true;
            }
            let rep = if ci.im > 0.0 { ci } else { ci.conj() };
            // keep only the Im > 0 member roots per entry
            let source = &raw[i];
            let mut members: Vec<(usize, Vec<Complex64>)> = Vec::new();
            for (idx, r) in &source.members {
                let rr = if r.im >= 0.0 { *r } else { r.conj() };
                match members.iter_mut().find(|(e, _)| e == idx) {
                    Some((_, v)) => v.push(rr),
                    None => members.push((*idx, vec![rr])),
                }
            }
            out.push(PoleCluster { center: rep, members, real: false });
        }
    }
    out.sort_by(|a, b| {
        (a.center.re, a.center.im)
            .partial_cmp(&(b.center.re, b.center.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Partial-fraction coefficients [c_1, ..., c_k] of num/(den_rest * (x-rho)^k)
/// at rho, via derivatives of h = num/den_rest in complex arithmetic.
fn pf_coefficients(num: &[Complex64], den_rest: &[Complex64], rho: Complex64, k: usize) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::ZERO; k];
    let mut n = num.to_vec();
    let mut d = den_rest.to_vec();
    let mut factorial = 1.0;
    for j in 0..k {
        if j > 0 {
            factorial *= j as f64;
            let nd = cpoly::sub(&cpoly::mul(&cpoly::derivative(&n), &d), &cpoly::mul(&n, &cpoly::derivative(&d)));
            d = cpoly::mul(&d, &d);
            n = nd;
        }
        let val = cpoly::eval(&n, rho) / cpoly::eval(&d, rho);
        // c_{k-j} = h^{(j)}(rho)/j!
        coeffs[k - 1 - j] = val / factorial;
    }
    coeffs
}





/// Deflates an entry denominator by its member roots of one cluster,
/// returning (rest, multiplicity at the representative root).
fn deflate_members(den: &Polynomial, members: &[Complex64], real_cluster: bool) -> (Polynomial, usize) {
    let mut rest = den.clone();
    let mut mult = 0;
    if real_cluster {
        // members may arrive as perturbed conjugate pairs of a real root
        let mut pending = members.to_vec();
        while let Some(r) = pending.pop() {
            if r.im.abs() <= 1e-12 * (1.0 + r.norm()) {
                rest = rest.deflate_real(r.re);
                mult += 1;
            } else if let Some(pos) = pending
                .iter()
                .position(|q| (q - r.conj()).norm() <= 1e-3 * (1.0 + r.norm()))
            {
                pending.remove(pos);
                rest = rest.deflate_pair(r);
                mult += 2;
            } else {
                // lone near-real root: treat its real part as the root
                rest = rest.deflate_real(r.re);
                mult += 1;
            }
        }
    } else {
        for r in members {
            rest = rest.deflate_pair(*r);
            mult += 1;
        }
    }
    (rest, mult)
}

fn realize_cluster(t: &RationalMatrix, cl: &PoleCluster, p: usize, m: usize) -> Result<Vec<Block>> {
    // per-entry coefficients and the cluster order
    let mut coeff: Vec<Vec<Complex64>> = vec![Vec::new(); p * m];
    let mut order = 0usize;
    for (idx, members) in &cl.members {
        let e = t.entry(idx / m, idx % m);
        let (rest, mult) = deflate_members(e.den(), members, cl.real);
        if mult == 0 {
            continue;
        }
        // for a complex pair only (x - rho)^mult is the singular factor; the
        // conjugate factor stays in the denominator of h
        let mut den_rest = cpoly::from_real(&rest);
        if !cl.real {
            let conj_factor = cpoly::pow(&[-cl.center.conj(), Complex64::ONE], mult);
            den_rest = cpoly::mul(&den_rest, &conj_factor);
        }
        let c = pf_coefficients(&cpoly::from_real(e.num()), &den_rest, cl.center, mult);
        if std::env::var("SPECFACT_DEBUG_CLUSTER").is_ok() && (cl.center.re - 0.4432).abs() < 1e-3 {
            eprintln!("cluster {} entry {idx}: mult {mult} rest deg {:?} c = {:?}", cl.center, rest.degree(), c);
            eprintln!("   members: {:?}", members);
        }
        order = order.max(mult);
        coeff[*idx] = c;
    }
    if order == 0 {
        return Ok(Vec::new());
    }

    if cl.real && order == 1 {
        // Gilbert block: rank factorization of the residue matrix
        let mut r1 = DMatrix::<f64>::zeros(p, m);
        for i in 0..p {
            for j in 0..m {
                if let Some(c) = coeff[i * m + j].first() {
                    r1[(i, j)] = c.re;
                }
            }
        }
        let svd = r1.clone().svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > tol::RANK_REL * smax && smax > 0.0)
            .count();
        if rank == 0 {
            return Ok(Vec::new());
        }
        let u = svd.u.as_ref().expect("svd u");
        let vt = svd.v_t.as_ref().expect("svd vt");
        let mut cb = DMatrix::<f64>::zeros(p, rank);
        let mut bb = DMatrix::<f64>::zeros(rank, m);
        for r in 0..rank {
            let s = svd.singular_values[r].sqrt();
            for i in 0..p {
                cb[(i, r)] = u[(i, r)] * s;
            }
            for j in 0..m {
                bb[(r, j)] = vt[(r, j)] * s;
            }
        }
        let a = DMatrix::from_diagonal(&DVector::from_element(rank, cl.center.re));
        return Ok(vec![Block { a, input_col: None, b: bb, c: cb }]);
    }

    let mut blocks = Vec::new();
    if cl.real {
        // repeated real pole: one Jordan chain per column
        for j in 0..m {
            let kj = (0..p).map(|i| coeff[i * m + j].len()).max().unwrap_or(0);
            if kj == 0 {
                continue;
            }
            let mut a = DMatrix::<f64>::zeros(kj, kj);
            for i in 0..kj {
                a[(i, i)] = cl.center.re;
                if i + 1 < kj {
                    a[(i, i + 1)] = 1.0;
                }
            }
            let mut bb = DMatrix::<f64>::zeros(kj, 1);
            bb[(kj - 1, 0)] = 1.0;
            // column l of C holds the residue of order kj - l
            let mut cb = DMatrix::<f64>::zeros(p, kj);
            for i in 0..p {
                for (ord, cval) in coeff[i * m + j].iter().enumerate() {
                    // ord is 0-based for c_{ord+1}
                    cb[(i, kj - 1 - ord)] = cval.re;
                }
            }
            blocks.push(Block { a, input_col: Some(j), b: bb, c: cb });
        }
    } else {
        // complex pair: per-column real companion block of (x^2-2ax+r^2)^k
        let rho = cl.center;
        let psi = Polynomial::new(vec![rho.norm_sqr(), -2.0 * rho.re, 1.0]);
        for j in 0..m {
            let kj = (0..p).map(|i| coeff[i * m + j].len()).max().unwrap_or(0);
            if kj == 0 {
                continue;
            }
            let mut den = Polynomial::one();
            for _ in 0..kj {
                den = den.mul(&psi);
            }
            let nstates = 2 * kj;
            let mut a = DMatrix::<f64>::zeros(nstates, nstates);
            for i in 0..nstates - 1 {
                a[(i, i + 1)] = 1.0;
            }
            for i in 0..nstates {
                a[(nstates - 1, i)] = -den.coeff(i);
            }
            let mut bb = DMatrix::<f64>::zeros(nstates, 1);
            bb[(nstates - 1, 0)] = 1.0;
            let mut cb = DMatrix::<f64>::zeros(p, nstates);
            for i in 0..p {
                let cs = &coeff[i * m + j];
                if cs.is_empty() {
                    continue;
                }
                // numerator over psi^kj from the conjugate pair of terms
                let mut num = vec![Complex64::ZERO; nstates];
                for (ord0, cval) in cs.iter().enumerate() {
                    let k = ord0 + 1;
                    let t1 = cpoly::mul(
                        &cpoly::pow(&[-rho, Complex64::ONE], kj - k),
                        &cpoly::pow(&[-rho.conj(), Complex64::ONE], kj),
                    );
                    let t2 = cpoly::mul(
                        &cpoly::pow(&[-rho.conj(), Complex64::ONE], kj - k),
                        &cpoly::pow(&[-rho, Complex64::ONE], kj),
                    );
                    for (t, v) in t1.iter().enumerate() {
                        num[t] += cval * v;
                    }
                    for (t, v) in t2.iter().enumerate() {
                        num[t] += cval.conj() * v;
                    }
                }
                for (t, v) in num.iter().enumerate() {
                    debug_assert!(v.im.abs() < 1e-6 * (1.0 + v.norm()), "non-real pair numerator");
                    cb[(i, t)] = v.re;
                }
            }
            blocks.push(Block { a, input_col: Some(j), b: bb, c: cb });
        }
    }
    Ok(blocks)
}



/// Reduces the parallel composition of one cluster's blocks to minimality.
fn reduce_cluster(blocks: Vec<Block>, p: usize, m: usize) -> Vec<Block> {
    if blocks.is_empty() {
        return blocks;
    }
    let single_minimal = blocks.len() == 1 && blocks[0].input_col.is_none();
    if single_minimal {
        return blocks; // Gilbert blocks are minimal by construction
    }
    let n: usize = blocks.iter().map(|b| b.a.nrows()).sum();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, m);
    let mut c = DMatrix::<f64>::zeros(p, n);
    let mut at = 0;
    for blk in &blocks {
        let k = blk.a.nrows();
        a.view_mut((at, at), (k, k)).copy_from(&blk.a);
        match blk.input_col {
            Some(col) => {
                for i in 0..k {
                    b[(at + i, col)] = blk.b[(i, 0)];
                }
            }
            None => b.view_mut((at, 0), (k, m)).copy_from(&blk.b),
        }
        c.view_mut((0, at), (p, k)).copy_from(&blk.c);
        at += k;
    }
    let (a, b, c) = kalman_minimal(a, b, c);
    if a.nrows() == 0 {
        return Vec::new();
    }
    vec![Block { a, input_col: None, b, c }]
}

fn staircase_basis(powers: &DMatrix<f64>) -> (usize, DMatrix<f64>) {
    let svd = powers.clone().svd(true, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let rank = if smax == 0.0 {
        0
    } else {
        svd.singular_values
            .iter()
            .filter(|&&s| s > tol::RANK_REL * smax)
            .count()
    };
    let u = svd.u.expect("svd u");
    (rank, u.view((0, 0), (u.nrows(), rank)).into())
}

/// Controllability-then-observability reduction; the quotient of a
/// controllable pair stays controllable, so the result is minimal.
pub fn kalman_minimal(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (a, b, c);
    }
    // controllable subspace = range [B, AB, ..., A^(n-1)B]
    let mut ctrb = DMatrix::<f64>::zeros(n, n * b.ncols());
    let mut blk = b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * b.ncols()), (n, b.ncols())).copy_from(&blk);
        blk = &a * &blk;
    }
    let (rc, q) = staircase_basis(&ctrb);
    let (a1, b1, c1) = if rc < n {
        (q.transpose() * &a * &q, q.transpose() * &b, &c * &q)
    } else {
        (a, b, c)
    };
    let n1 = a1.nrows();
    if n1 == 0 {
        return (a1, b1, c1);
    }
    // observable co-subspace = range [C; CA; ...]^T
    let mut obsv = DMatrix::<f64>::zeros(n1, n1 * c1.nrows());
    let mut blk = c1.transpose();
    let at = a1.transpose();
    for k in 0..n1 {
        obsv.view_mut((0, k * c1.nrows()), (n1, c1.nrows())).copy_from(&blk);
        blk = &at * &blk;
    }
    let (ro, q) = staircase_basis(&obsv);
    if ro < n1 {
        (q.transpose() * &a1 * &q, q.transpose() * &b1, &c1 * &q)
    } else {
        (a1, b1, c1)
    }
}

pub fn controllable_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    if n == 0 {
        return 0;
    }
    let mut ctrb = DMatrix::<f64>::zeros(n, n * b.ncols());
    let mut blk = b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * b.ncols()), (n, b.ncols())).copy_from(&blk);
        blk = a * &blk;
    }
    staircase_basis(&ctrb).0
}

pub fn observable_rank(a: &DMatrix<f64>, c: &DMatrix<f64>) -> usize {
    controllable_rank(&a.transpose(), &c.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rf(num: &[f64], den: &[f64], var: Variable) -> RationalFunction {
        RationalFunction::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()), var)
    }

    #[test]
    fn constant_matrix_has_empty_state() {
        let t = RationalMatrix::from_constant(
            &DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            Variable::S,
        );
        let ss = minimal_realization(&t).unwrap();
        assert_eq!(ss.order(), 0);
        assert!(ss.transfer().approx_eq(&t, 1e-12));
    }

    #[test]
    fn one_state_round_trip() {
        // 1-state A = 0.255, B = 1, C = 0.783, D = 1 -> (z + 0.528)/(z - 0.255)
        let ss = StateSpace {
            a: DMatrix::from_element(1, 1, 0.255),
            b: DMatrix::from_element(1, 1, 1.0),
            c: DMatrix::from_element(1, 1, 0.783),
            d: DMatrix::from_element(1, 1, 1.0),
            n_unstable: 0,
            var: Variable::Z,
        };
        let t = ss.transfer();
        let expect = RationalMatrix::new(
            1,
            1,
            vec![rf(&[0.528, 1.0], &[-0.255, 1.0], Variable::Z)],
            Variable::Z,
        )
        .unwrap();
        assert!(t.approx_eq(&expect, 1e-10));
        for k in 0..5 {
            let pt = Complex64::new(1.3 + 0.2 * k as f64, 0.7);
            let a = t.evaluate(pt).unwrap()[(0, 0)];
            let b = expect.evaluate(pt).unwrap()[(0, 0)];
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn example_discrete_two_state_split() {
        // [ (z+0.528)(z-2)/((z-0.255)(z+2)), (z+0.528)(z-1)/((z-0.255)(z+2)) ]
        let n1 = Polynomial::new(vec![0.528, 1.0]).mul(&Polynomial::new(vec![-2.0, 1.0]));
        let n2 = Polynomial::new(vec![0.528, 1.0]).mul(&Polynomial::new(vec![-1.0, 1.0]));
        let den = Polynomial::new(vec![-0.255, 1.0]).mul(&Polynomial::new(vec![2.0, 1.0]));
        let t = RationalMatrix::new(
            1,
            2,
            vec![
                RationalFunction::new(n1, den.clone(), Variable::Z),
                RationalFunction::new(n2, den, Variable::Z),
            ],
            Variable::Z,
        )
        .unwrap();
        let ss = minimal_realization(&t).unwrap();
        assert_eq!(ss.order(), 2);
        assert_eq!(ss.n_unstable, 1);
        let eigs = ss.eigenvalues();
        let mut res: Vec<f64> = eigs.iter().map(|e| e.re).collect();
        res.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(res[0], -2.0, epsilon = 1e-9);
        assert_relative_eq!(res[1], 0.255, epsilon = 1e-9);
        assert!(ss.transfer().approx_eq(&t, 1e-9));
    }

    #[test]
    fn similarity_preserves_transfer() {
        let t = RationalMatrix::new(
            1,
            1,
            vec![rf(&[0.4, 1.0], &[0.2, 0.3, 1.0], Variable::Z)],
            Variable::Z,
        )
        .unwrap();
        let ss = minimal_realization(&t).unwrap();
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let ss2 = ss.similarity(&p).unwrap();
        assert!(ss2.transfer().approx_eq(&t, 1e-9));
        assert!(ss.similarity(&DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn repeated_pole_uses_jordan_chain() {
        // 1/(s+4)^2 and 1/(s+4) stacked: McMillan degree 2
        let t = RationalMatrix::new(
            2,
            1,
            vec![
                rf(&[1.0], &[16.0, 8.0, 1.0], Variable::S),
                rf(&[1.0], &[4.0, 1.0], Variable::S),
            ],
            Variable::S,
        )
        .unwrap();
        let ss = minimal_realization(&t).unwrap();
        assert_eq!(ss.order(), 2);
        assert_eq!(ss.n_unstable, 0);
        assert!(ss.transfer().approx_eq(&t, 1e-9));
    }

    #[test]
    fn complex_pair_stays_real() {
        // 25(12s-7)/169 / (s^2-2s+2)
        let t = RationalMatrix::new(
            1,
            1,
            vec![rf(&[-175.0 / 169.0, 300.0 / 169.0], &[2.0, -2.0, 1.0], Variable::S)],
            Variable::S,
        )
        .unwrap();
        let ss = minimal_realization(&t).unwrap();
        assert_eq!(ss.order(), 2);
        assert_eq!(ss.n_unstable, 2);
        assert!(ss.transfer().approx_eq(&t, 1e-9));
    }

    #[test]
    fn shared_dynamics_across_columns_reduced() {
        // both columns share the pole -0.5; minimal degree is 1
        let t = RationalMatrix::new(
            1,
            2,
            vec![
                rf(&[1.0], &[0.5, 1.0], Variable::Z),
                rf(&[2.0], &[0.5, 1.0], Variable::Z),
            ],
            Variable::Z,
        )
        .unwrap();
        let ss = minimal_realization(&t).unwrap();
        assert_eq!(ss.order(), 1);
        assert!(ss.transfer().approx_eq(&t, 1e-10));
    }
}

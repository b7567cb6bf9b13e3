//! Scalar rational functions in the transform variable z or s.
//!
//! Canonical form: monic denominator, no common numerator/denominator roots
//! within the cancellation tolerance. Cancellation works by root matching
//! followed by synthetic deflation, so untouched coefficients are not
//! perturbed by a rebuild.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::tol;

/// Transform variable tag: `Z` for discrete time, `S` for continuous time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variable {
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "s")]
    S,
}

impl Variable {
    /// Strictly stable: inside the stability region by the boundary margin.
    pub fn is_strictly_stable(self, p: Complex64) -> bool {
        match self {
            Variable::Z => p.norm() < 1.0 - tol::BOUNDARY,
            Variable::S => p.re < -tol::BOUNDARY,
        }
    }

    /// Closed-region membership used for zeros of minimum-phase functions.
    pub fn is_in_closed_region(self, p: Complex64) -> bool {
        match self {
            Variable::Z => p.norm() <= 1.0 + tol::BOUNDARY,
            Variable::S => p.re <= tol::BOUNDARY,
        }
    }

    /// Strictly outside the closed region: the unstable side of the split.
    pub fn is_strictly_unstable(self, p: Complex64) -> bool {
        !self.is_in_closed_region(p)
    }

    /// Within the boundary band of width `tol::BOUNDARY` on either side.
    pub fn is_on_boundary(self, p: Complex64) -> bool {
        match self {
            Variable::Z => (p.norm() - 1.0).abs() <= tol::BOUNDARY,
            Variable::S => p.re.abs() <= tol::BOUNDARY,
        }
    }

    /// A point on the stability boundary parameterized by t in [0, 1).
    pub fn boundary_point(self, t: f64) -> Complex64 {
        match self {
            Variable::Z => Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t),
            // map (0,1) onto the imaginary axis through tan
            Variable::S => Complex64::new(0.0, (std::f64::consts::PI * (t - 0.5)).tan()),
        }
    }

    /// Mirror of a point across the stability boundary (1/p or -p).
    pub fn mirror(self, p: Complex64) -> Complex64 {
        match self {
            Variable::Z => 1.0 / p,
            Variable::S => -p,
        }
    }
}

impl std::fmt::Display for Variable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variable::Z => write!(f, "z"),
            Variable::S => write!(f, "s"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
    var: Variable,
}

impl RationalFunction {
    /// Builds and canonicalizes a rational function.
    ///
    /// Panics if the denominator is the zero polynomial; use
    /// [`RationalFunction::try_new`] for fallible construction.
    pub fn new(num: Polynomial, den: Polynomial, var: Variable) -> Self {
        Self::try_new(num, den, var).expect("zero denominator")
    }

    pub fn try_new(num: Polynomial, den: Polynomial, var: Variable) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        let mut rf = RationalFunction { num, den, var };
        rf.canonicalize();
        Ok(rf)
    }

    pub fn zero(var: Variable) -> Self {
        RationalFunction { num: Polynomial::zero(), den: Polynomial::one(), var }
    }

    pub fn one(var: Variable) -> Self {
        RationalFunction { num: Polynomial::one(), den: Polynomial::one(), var }
    }

    pub fn constant(c: f64, var: Variable) -> Self {
        RationalFunction { num: Polynomial::constant(c), den: Polynomial::one(), var }
    }

    /// The identity map in the transform variable.
    pub fn identity_var(var: Variable) -> Self {
        RationalFunction { num: Polynomial::x(), den: Polynomial::one(), var }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn var(&self) -> Variable {
        self.var
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_constant(&self) -> bool {
        self.num.degree().map_or(true, |d| d == 0) && self.den.degree() == Some(0)
    }

    /// Numerator degree <= denominator degree.
    pub fn is_proper(&self) -> bool {
        match (self.num.degree(), self.den.degree()) {
            (None, _) => true,
            (Some(n), Some(d)) => n <= d,
            (Some(_), None) => unreachable!("canonical denominator is nonzero"),
        }
    }

    pub fn is_strictly_proper(&self) -> bool {
        match (self.num.degree(), self.den.degree()) {
            (None, _) => true,
            (Some(n), Some(d)) => n < d,
            (Some(_), None) => unreachable!(),
        }
    }

    /// Limit at infinity; `None` when improper.
    pub fn value_at_infinity(&self) -> Option<f64> {
        match (self.num.degree(), self.den.degree()) {
            (None, _) => Some(0.0),
            (Some(n), Some(d)) if n < d => Some(0.0),
            (Some(n), Some(d)) if n == d => Some(self.num.leading() / self.den.leading()),
            _ => None,
        }
    }

    /// Canonical form: matched numerator/denominator roots deflated,
    /// denominator made monic.
    fn canonicalize(&mut self) {
        if self.num.is_zero() {
            self.den = Polynomial::one();
            return;
        }
        let (num, den) = cancel_common_roots(&self.num, &self.den);
        self.num = num;
        self.den = den;
        let lead = self.den.leading();
        if (lead - 1.0).abs() > 0.0 {
            self.num = self.num.scale(1.0 / lead);
            self.den = self.den.scale(1.0 / lead);
            // force exact monic leading coefficient
            let mut c = self.den.coeffs().to_vec();
            if let Some(last) = c.last_mut() {
                *last = 1.0;
            }
            self.den = Polynomial::new(c);
        }
        if self.num.is_zero() {
            self.den = Polynomial::one();
        }
    }

    pub(crate) fn conjugate_consistent(roots: &[Complex64]) -> bool {
        let mut claimed = vec![false; roots.len()];
        for i in 0..roots.len() {
            if claimed[i] || roots[i].im.abs() <= 1e-12 * (1.0 + roots[i].norm()) {
                continue;
            }
            let mut found = false;
            for j in 0..roots.len() {
                if i != j
                    && !claimed[j]
                    && (roots[j] - roots[i].conj()).norm() <= 1e-6 * (1.0 + roots[i].norm())
                {
                    claimed[i] = true;
                    claimed[j] = true;
                    found = true;
                    break;
                }
            }
            if !found {
                return false;
            }
        }
        true
    }

    pub(crate) fn deflate_set(p: &Polynomial, roots: &[Complex64]) -> Polynomial {
        let mut out = p.clone();
        let mut pending = roots.to_vec();
        // largest magnitude first for deflation stability
        pending.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
        while let Some(r) = pending.pop() {
            if r.im.abs() <= 1e-12 * (1.0 + r.norm()) {
                out = out.deflate_real(r.re);
            } else {
                // remove the conjugate partner from the pending list
                if let Some(pos) = pending
                    .iter()
                    .position(|q| (q - r.conj()).norm() <= 1e-6 * (1.0 + r.norm()))
                {
                    pending.remove(pos);
                }
                out = out.deflate_pair(r);
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        RationalFunction {
            num: self.num.neg(),
            den: self.den.clone(),
            var: self.var,
        }
    }

    /// Addition over the least common denominator: shared denominator roots
    /// are matched and not duplicated, which keeps cancellations between
    /// sums single-multiplicity.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_var(other)?;
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        let (quot_self, quot_other, lcm) = den_lcm(&self.den, &other.den);
        let num = self.num.mul(&quot_self).add(&other.num.mul(&quot_other));
        Self::try_new(num, lcm, self.var)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Multiplication with cross-cancellation before forming the products:
    /// the operands are canonical with accurately resolved low-degree roots,
    /// so cancelling num/den pairs here keeps degrees from inflating.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_var(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.var));
        }
        let (n1, d2) = cancel_common_roots(&self.num, &other.den);
        let (n2, d1) = cancel_common_roots(&other.num, &self.den);
        Self::try_new(n1.mul(&n2), d1.mul(&d2), self.var)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.check_var(other)?;
        if other.is_zero() {
            return Err(Error::SingularMatrix);
        }
        let inv = RationalFunction {
            num: other.den.clone(),
            den: other.num.clone(),
            var: other.var,
        };
        self.mul(&inv)
    }

    pub fn scale(&self, s: f64) -> Self {
        RationalFunction {
            num: self.num.scale(s),
            den: self.den.clone(),
            var: self.var,
        }
    }

    fn check_var(&self, other: &Self) -> Result<()> {
        if self.var != other.var {
            return Err(Error::VariableMismatch);
        }
        Ok(())
    }

    /// Para-conjugate of a real-coefficient scalar: substitutes z -> 1/z in
    /// discrete time and s -> -s in continuous time.
    pub fn para_conjugate(&self) -> Self {
        match self.var {
            Variable::Z => {
                if self.num.is_zero() {
                    return self.clone();
                }
                let k = self
                    .num
                    .degree()
                    .unwrap_or(0)
                    .max(self.den.degree().unwrap_or(0));
                let num = self.num.reversed_padded(k);
                let den = self.den.reversed_padded(k);
                Self::new(num, den, self.var)
            }
            Variable::S => Self::new(self.num.compose_neg(), self.den.compose_neg(), self.var),
        }
    }

    /// Evaluates at a complex point, rejecting points within tolerance of a
    /// pole.
    pub fn eval(&self, p: Complex64) -> Result<Complex64> {
        for root in self.den.roots() {
            if (p - root).norm() < 1e-9 * (1.0 + root.norm()) {
                return Err(Error::PoleProximity {
                    point: (p.re, p.im),
                    root: (root.re, root.im),
                });
            }
        }
        Ok(self.eval_unchecked(p))
    }

    /// Evaluates without the pole-distance check; the caller guards against
    /// tiny denominators.
    pub fn eval_unchecked(&self, p: Complex64) -> Complex64 {
        self.num.eval_complex(p) / self.den.eval_complex(p)
    }

    /// Denominator roots (the poles of the canonical scalar).
    pub fn poles(&self) -> Vec<Complex64> {
        self.den.roots()
    }

    /// Numerator roots.
    pub fn zeros(&self) -> Vec<Complex64> {
        self.num.roots()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| self.var.is_strictly_stable(*p))
    }
}

/// Deflates root pairs shared (within the cancellation tolerance) between a
/// numerator and a denominator, keeping conjugate pairs intact. Roots that
/// miss the tolerance only because of root-finding noise are re-checked
/// after a Newton refinement on both polynomials.
fn cancel_common_roots(num: &Polynomial, den: &Polynomial) -> (Polynomial, Polynomial) {
    if num.degree().map_or(true, |d| d == 0) || den.degree().map_or(true, |d| d == 0) {
        return (num.clone(), den.clone());
    }
    let nroots = num.roots();
    let droots = den.roots();
    let ctol = tol::cancel();
    let mut num_cancel: Vec<Complex64> = Vec::new();
    let mut den_cancel: Vec<Complex64> = Vec::new();
    let mut num_used = vec![false; nroots.len()];
    let mut den_used = vec![false; droots.len()];
    for (i, rn) in nroots.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, rd) in droots.iter().enumerate() {
            if den_used[j] {
                continue;
            }
            let d = (rn - rd).norm();
            if d < ctol * (1.0 + rn.norm()) && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            den_used[j] = true;
            num_used[i] = true;
            num_cancel.push(*rn);
            den_cancel.push(droots[j]);
        }
    }
    // second pass: candidate pairs within a loose window are accepted when
    // Newton-polished roots land within the tight tolerance. A mu-fold root
    // is polished on the (mu-1)-th derivative, where it is simple.
    let refine = |p: &Polynomial, start: Complex64, mult: usize| -> Option<Complex64> {
        let mut d = p.clone();
        for _ in 1..mult {
            d = d.derivative();
        }
        let dd = d.derivative();
        let mut x = start;
        for _ in 0..4 {
            let dv = dd.eval_complex(x);
            if dv.norm() < 1e-14 * (1.0 + d.eval_complex(x).norm()) {
                return None;
            }
            x -= d.eval_complex(x) / dv;
        }
        if (x - start).norm() > 1e-3 * (1.0 + start.norm()) {
            None // ran away; not a genuine refinement
        } else if x.im.abs() <= 1e-12 * (1.0 + x.norm()) {
            Some(Complex64::new(x.re, 0.0))
        } else {
            Some(x)
        }
    };
    let count_near = |roots: &[Complex64], at: Complex64| {
        roots
            .iter()
            .filter(|r| (*r - at).norm() <= 1e-4 * (1.0 + at.norm()))
            .count()
            .max(1)
    };
    for (i, rn) in nroots.iter().enumerate() {
        if num_used[i] {
            continue;
        }
        for (j, rd) in droots.iter().enumerate() {
            if den_used[j] || (rn - rd).norm() >= 1e-4 * (1.0 + rn.norm()) {
                continue;
            }
            let rn_ref = refine(num, *rn, count_near(&nroots, *rn));
            let rd_ref = refine(den, *rd, count_near(&droots, *rd));
            let (Some(rn_ref), Some(rd_ref)) = (rn_ref, rd_ref) else {
                continue;
            };
            if (rn_ref - rd_ref).norm() < ctol * (1.0 + rn_ref.norm()) {
                den_used[j] = true;
                num_used[i] = true;
                num_cancel.push(rn_ref);
                den_cancel.push(rd_ref);
                break;
            }
        }
    }
    if num_cancel.is_empty() {
        return (num.clone(), den.clone());
    }
    if !RationalFunction::conjugate_consistent(&num_cancel)
        || !RationalFunction::conjugate_consistent(&den_cancel)
    {
        return (num.clone(), den.clone());
    }
    (
        RationalFunction::deflate_set(num, &num_cancel),
        RationalFunction::deflate_set(den, &den_cancel),
    )
}

/// Returns (lcm/d1, lcm/d2, lcm) for two denominators, matching common
/// roots within the cancellation tolerance.
fn den_lcm(d1: &Polynomial, d2: &Polynomial) -> (Polynomial, Polynomial, Polynomial) {
    if d1.degree().map_or(true, |d| d == 0) || d2.degree().map_or(true, |d| d == 0) {
        return (d2.clone(), d1.clone(), d1.mul(d2));
    }
    let r1 = d1.roots();
    let r2 = d2.roots();
    let ctol = tol::cancel();
    let mut matched1: Vec<Complex64> = Vec::new();
    let mut matched2: Vec<Complex64> = Vec::new();
    let mut used2 = vec![false; r2.len()];
    for a in &r1 {
        let mut best: Option<(usize, f64)> = None;
        for (j, b) in r2.iter().enumerate() {
            if used2[j] {
                continue;
            }
            let d = (a - b).norm();
            if d < ctol * (1.0 + a.norm()) && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            used2[j] = true;
            matched1.push(*a);
            matched2.push(r2[j]);
        }
    }
    if matched1.is_empty() {
        return (d2.clone(), d1.clone(), d1.mul(d2));
    }
    // conjugate-consistency: only deflate full pairs
    if !RationalFunction::conjugate_consistent(&matched1)
        || !RationalFunction::conjugate_consistent(&matched2)
    {
        return (d2.clone(), d1.clone(), d1.mul(d2));
    }
    // lcm = d1 * (d2 / matched part); lcm/d1 uses d2's root values,
    // lcm/d2 uses d1's own root values
    let d2_rest = RationalFunction::deflate_set(d2, &matched2);
    let d1_rest = RationalFunction::deflate_set(d1, &matched1);
    let lcm = d1.mul(&d2_rest);
    (d2_rest, d1_rest, lcm)
}

impl std::fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

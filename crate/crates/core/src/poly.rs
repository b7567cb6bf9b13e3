//! Real-coefficient polynomials in ascending-degree representation.
//!
//! The zero polynomial has an empty coefficient list. Trailing coefficients
//! below the trim tolerance (relative to the largest coefficient) are
//! removed on construction. Roots are computed from the companion matrix;
//! degrees one and two use closed forms.

use num_complex::Complex64;

use crate::tol;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending-degree coefficients, trimming
    /// trailing near-zero terms.
    pub fn new(coeffs: Vec<f64>) -> Self {
        debug_assert!(coeffs.iter().all(|c| c.is_finite()), "non-finite coefficient");
        let mut p = Polynomial { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Polynomial { coeffs: vec![1.0] }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `x`.
    pub fn x() -> Self {
        Polynomial { coeffs: vec![0.0, 1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of degree `k` (zero when absent).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    fn trim(&mut self) {
        let scale = self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            self.coeffs.clear();
            return;
        }
        let cut = tol::COEFF_TRIM * scale.max(1.0);
        while let Some(&last) = self.coeffs.last() {
            if last.abs() <= cut {
                self.coeffs.pop();
            } else {
                break;
            }
        }
        if self.coeffs.iter().all(|c| c.abs() <= cut) {
            self.coeffs.clear();
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::ZERO, |acc, &c| acc * x + c)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.coeff(k) + other.coeff(k);
        }
        Self::new(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Long division: returns (quotient, remainder).
    pub fn divmod(&self, divisor: &Self) -> (Self, Self) {
        assert!(!divisor.is_zero(), "division by zero polynomial");
        let dd = divisor.degree().unwrap();
        if self.degree().map_or(true, |dn| dn < dd) {
            return (Self::zero(), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let dn = rem.len() - 1;
        let lead = divisor.leading();
        let mut quot = vec![0.0; dn - dd + 1];
        for k in (0..=dn - dd).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, &c) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * c;
            }
        }
        (Self::new(quot), Self::new(rem))
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Substitutes `x -> -x`.
    pub fn compose_neg(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 0 { c } else { -c })
                .collect(),
        )
    }

    /// Coefficient list reversed and zero-padded to length `len + 1`;
    /// realizes `x^len * p(1/x)`.
    pub fn reversed_padded(&self, len: usize) -> Self {
        let mut out = vec![0.0; len + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            debug_assert!(k <= len);
            out[len - k] = c;
        }
        Self::new(out)
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        self.scale(1.0 / self.leading())
    }

    /// Builds a real polynomial `gain * prod (x - r_i)` from a
    /// conjugate-symmetric root list.
    pub fn from_roots(roots: &[Complex64], gain: f64) -> Self {
        let mut p = Polynomial::constant(gain);
        let mut used = vec![false; roots.len()];
        for i in 0..roots.len() {
            if used[i] {
                continue;
            }
            let r = roots[i];
            if r.im.abs() <= 1e-12 * (1.0 + r.norm()) {
                used[i] = true;
                p = p.mul(&Polynomial::new(vec![-r.re, 1.0]));
            } else {
                // find the conjugate partner
                let mut partner = None;
                for (j, rj) in roots.iter().enumerate().skip(i + 1) {
                    if !used[j] && (rj.conj() - r).norm() <= 1e-6 * (1.0 + r.norm()) {
                        partner = Some(j);
                        break;
                    }
                }
                let j = partner.expect("complex root without conjugate partner");
                used[i] = true;
                used[j] = true;
                p = p.mul(&Polynomial::new(vec![r.norm_sqr(), -2.0 * r.re, 1.0]));
            }
        }
        p
    }

    /// Deflates a single real root by synthetic division.
    pub fn deflate_real(&self, root: f64) -> Self {
        let (q, _r) = self.divmod(&Polynomial::new(vec![-root, 1.0]));
        q
    }

    /// Deflates a conjugate pair by dividing out `x^2 - 2 Re(r) x + |r|^2`.
    pub fn deflate_pair(&self, root: Complex64) -> Self {
        let quad = Polynomial::new(vec![root.norm_sqr(), -2.0 * root.re, 1.0]);
        let (q, _r) = self.divmod(&quad);
        q
    }

    /// All complex roots, conjugate-symmetric for real input.
    ///
    /// Degrees one and two use closed forms; higher degrees run the
    /// Aberth-Ehrlich simultaneous iteration. The companion-matrix
    /// eigenvalue route stalls on the para-symmetric (even/palindromic)
    /// polynomials this crate constantly produces, because plain QR shifts
    /// stagnate on their mirrored spectra; Aberth has no such failure mode
    /// and is deterministic.
    pub fn roots(&self) -> Vec<Complex64> {
        let n = match self.degree() {
            None | Some(0) => return Vec::new(),
            Some(n) => n,
        };
        let a = &self.coeffs;
        let lead = self.leading();
        let mut roots = match n {
            1 => vec![Complex64::new(-a[0] / a[1], 0.0)],
            2 => {
                let (c, b) = (a[0] / lead, a[1] / lead);
                let disc = b * b - 4.0 * c;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    // avoid cancellation on the small root
                    let r1 = if b >= 0.0 { (-b - sq) / 2.0 } else { (-b + sq) / 2.0 };
                    let r2 = if r1 != 0.0 { c / r1 } else { -b - r1 };
                    vec![Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)]
                } else {
                    let re = -b / 2.0;
                    let im = (-disc).sqrt() / 2.0;
                    vec![Complex64::new(re, im), Complex64::new(re, -im)]
                }
            }
            _ => self.aberth_roots(),
        };
        self.sharpen_clusters(&mut roots);
        enforce_conjugate_symmetry(&mut roots);
        roots.sort_by(|x, y| {
            (x.re, x.im)
                .partial_cmp(&(y.re, y.im))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        roots
    }

    /// Aberth-Ehrlich iteration with deterministic asymmetric starting
    /// points on a Cauchy-bound circle.
    fn aberth_roots(&self) -> Vec<Complex64> {
        let lead = self.leading();
        let monic: Vec<f64> = self.coeffs.iter().map(|c| c / lead).collect();
        // strip exact zero roots first: they are common (powers of x) and
        // speed convergence of the rest
        let zero_count = monic.iter().take_while(|c| **c == 0.0).count();
        let reduced: Vec<f64> = monic[zero_count..].to_vec();
        let m = reduced.len() - 1;
        let mut roots = vec![Complex64::new(0.0, 0.0); zero_count];
        if m == 0 {
            return roots;
        }
        let radius = 1.0 + reduced.iter().take(m).fold(0.0_f64, |s, c| s.max(c.abs()));
        let golden = 0.618_033_988_749_894_8_f64;
        let mut x: Vec<Complex64> = (0..m)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * ((k as f64 * golden).fract()) + 0.1337;
                Complex64::from_polar(radius * (1.0 + 0.05 * (k as f64 / m as f64)), angle)
            })
            .collect();
        let eval = |p: &[f64], v: Complex64| -> Complex64 {
            p.iter().rev().fold(Complex64::ZERO, |acc, &c| acc * v + c)
        };
        let deriv: Vec<f64> = reduced
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        let mut frozen = vec![false; m];
        for _ in 0..500 {
            let mut moved = 0.0_f64;
            for k in 0..m {
                if frozen[k] {
                    continue;
                }
                let pv = eval(&reduced, x[k]);
                let dv = eval(&deriv, x[k]);
                let newton = if dv.norm() > 1e-300 { pv / dv } else { pv };
                let mut repulse = Complex64::ZERO;
                for (j, xj) in x.iter().enumerate() {
                    if j != k {
                        let d = x[k] - xj;
                        if d.norm() > 1e-300 {
                            repulse += 1.0 / d;
                        }
                    }
                }
                let denom = Complex64::ONE - newton * repulse;
                let step = if denom.norm() > 1e-12 { newton / denom } else { newton };
                x[k] -= step;
                let rel = step.norm() / (1.0 + x[k].norm());
                moved = moved.max(rel);
                if rel < 1e-15 {
                    frozen[k] = true;
                }
            }
            if moved < 1e-15 {
                break;
            }
        }
        roots.extend(x);
        roots
    }

    /// Collapses root clusters that are numerically a single multiple root
    /// onto their mean. A mu-fold root perturbs into a symmetric star, so
    /// the mean cancels the first-order error; the merge is accepted only
    /// when |p(mean)| is consistent with a mu-fold root within the cluster
    /// radius (genuinely distinct close roots fail that bound and are kept).
    fn sharpen_clusters(&self, roots: &mut [Complex64]) {
        let n = roots.len();
        if n < 2 {
            return;
        }
        let mut assigned = vec![false; n];
        for i in 0..n {
            if assigned[i] {
                continue;
            }
            let mut members = vec![i];
            for j in i + 1..n {
                if !assigned[j]
                    && (roots[j] - roots[i]).norm() <= 1e-4 * (1.0 + roots[i].norm())
                {
                    members.push(j);
                }
            }
            if members.len() < 2 {
                continue;
            }
            let mu = members.len();
            let mut mean = members.iter().map(|&k| roots[k]).sum::<Complex64>() / mu as f64;
            let radius = members
                .iter()
                .map(|&k| (roots[k] - mean).norm())
                .fold(0.0_f64, f64::max)
                .max(1e-15 * (1.0 + mean.norm()));
            // a cluster of a real polynomial straddling the axis is real
            if mean.im.abs() <= radius {
                mean = Complex64::new(mean.re, 0.0);
            }
            // p(mean) against the mu-th derivative bound
            let mut derivs = Vec::with_capacity(mu + 1);
            let mut cur = self.clone();
            for _ in 0..=mu {
                derivs.push(cur.eval_complex(mean));
                cur = cur.derivative();
            }
            let mut factorial = 1.0;
            for k in 1..=mu {
                factorial *= k as f64;
            }
            // evaluation noise floor: below this |p(mean)| says nothing
            let floor = 100.0
                * f64::EPSILON
                * self
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c.abs() * mean.norm().max(1.0).powi(k as i32))
                    .sum::<f64>();
            let bound = (0.05 * radius.powi(mu as i32) * derivs[mu].norm() / factorial).max(floor);
            if derivs[0].norm() <= bound {
                for &k in &members {
                    roots[k] = mean;
                    assigned[k] = true;
                }
            } else {
                assigned[i] = true;
            }
        }
    }
}

/// Pairs near-conjugate roots and symmetrizes them exactly; isolated
/// near-real roots collapse onto the axis.
fn enforce_conjugate_symmetry(roots: &mut [Complex64]) {
    let n = roots.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] {
            continue;
        }
        let r = roots[i];
        if r.im == 0.0 {
            used[i] = true;
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, q) in roots.iter().enumerate() {
            if j == i || used[j] {
                continue;
            }
            let d = (q.conj() - r).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        match best {
            Some((j, d)) if d <= 1e-8 * (1.0 + r.norm()) => {
                let re = 0.5 * (roots[i].re + roots[j].re);
                let im = 0.5 * (roots[i].im - roots[j].im);
                roots[i] = Complex64::new(re, im);
                roots[j] = Complex64::new(re, -im);
                used[i] = true;
                used[j] = true;
            }
            _ => {
                if r.im.abs() <= 1e-10 * (1.0 + r.norm()) {
                    roots[i] = Complex64::new(r.re, 0.0);
                }
                used[i] = true;
            }
        }
    }
}

impl std::fmt::Display for Polynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { "-" } else { "+" })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let mag = c.abs();
            match k {
                0 => write!(f, "{mag}")?,
                1 => {
                    if (mag - 1.0).abs() > 1e-15 {
                        write!(f, "{mag}*")?;
                    }
                    write!(f, "x")?;
                }
                _ => {
                    if (mag - 1.0).abs() > 1e-15 {
                        write!(f, "{mag}*")?;
                    }
                    write!(f, "x^{k}")?;
                }
            }
            first = false;
        }
        Ok(())
    }
}

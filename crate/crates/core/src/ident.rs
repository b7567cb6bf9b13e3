//! Identification of low-rank vector processes: simulation of an innovation
//! model, least-squares fit of the deterministic relation, a simplified
//! scalar prediction-error ARMA fit, and the combined recovery of the
//! minimum-phase factor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::factor::{factor_from_relation, FactorOptions, FactorizationResult};
use crate::poly::Polynomial;
use crate::rational::{RationalFunction, Variable};
use crate::realization::minimal_realization;
use crate::rmatrix::RationalMatrix;

/// Sampled vector process with its partition index.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    /// N samples of dimension m + p, row per time step.
    pub data: Vec<Vec<f64>>,
    /// Partition: the first m channels form y1.
    pub m: usize,
    /// Seed used to generate the series, when simulated.
    pub seed: Option<u64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.first().map_or(0, |r| r.len())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.iter().map(|r| r[j]).collect()
    }

    /// CSV with a header row (y1, y2, ...), one sample per line.
    pub fn to_csv(&self) -> String {
        let dim = self.dim();
        let mut out = String::new();
        let header: Vec<String> = (1..=dim).map(|k| format!("y{k}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.data {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, m: usize) -> Result<TimeSeries> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty CSV".into()))?;
        let dim = header.split(',').count();
        if m == 0 || m >= dim {
            return Err(Error::InvalidInput(format!(
                "partition m = {m} out of range for {dim} channels"
            )));
        }
        let mut data = Vec::new();
        for (ln, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidInput(format!("line {}: bad number '{tok}'", ln + 2))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "line {}: expected {dim} values, found {}",
                    ln + 2,
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("line {}: non-finite value", ln + 2)));
            }
            data.push(row);
        }
        if data.is_empty() {
            return Err(Error::InvalidInput("CSV has no samples".into()));
        }
        Ok(TimeSeries { data, m, seed: None })
    }
}

/// Drives a state-space realization of a stable discrete-time factor with
/// unit-variance Gaussian innovations; a burn-in prefix is discarded.
pub fn simulate_lowrank_process(
    w: &RationalMatrix,
    n: usize,
    seed: u64,
    m: usize,
    burn_in: usize,
) -> Result<TimeSeries> {
    if w.var() != Variable::Z {
        return Err(Error::Unsupported("simulation is discrete-time only".into()));
    }
    if !w.is_stable() {
        return Err(Error::UnstableFilter);
    }
    let ss = minimal_realization(w)?;
    if ss.n_unstable != 0 {
        return Err(Error::UnstableFilter);
    }
    let inputs = ss.inputs();
    let outputs = ss.outputs();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut state = DVector::<f64>::zeros(ss.order());
    let mut data = Vec::with_capacity(n);
    for t in 0..burn_in + n {
        let e = DVector::<f64>::from_fn(inputs, |_, _| StandardNormal.sample(&mut rng));
        let y = &ss.c * &state + &ss.d * &e;
        state = &ss.a * state + &ss.b * &e;
        if t >= burn_in {
            data.push((0..outputs).map(|i| y[i]).collect());
        }
    }
    Ok(TimeSeries { data, m, seed: Some(seed) })
}

/// Least-squares fit of the deterministic relation den(z) y2_i = num(z) y1:
/// one monic-denominator rational row per y2 channel.
pub fn estimate_h_ls(y: &TimeSeries, num_order: usize, den_order: usize) -> Result<RationalMatrix> {
    let m = y.m;
    let p = y.dim() - m;
    let nsamp = y.len();
    let d = den_order;
    let q = num_order;
    if q > d {
        return Err(Error::InvalidInput(
            "numerator order above denominator order makes the relation improper".into(),
        ));
    }
    let unknowns = d + m * (q + 1);
    if nsamp <= d + unknowns {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let rows = nsamp - d;
    let mut entries: Vec<RationalFunction> = Vec::with_capacity(p * m);
    for i in 0..p {
        let y2 = y.column(m + i);
        let mut a = DMatrix::<f64>::zeros(rows, unknowns);
        let mut b = DVector::<f64>::zeros(rows);
        for t in 0..rows {
            b[t] = y2[t + d];
            // denominator coefficients a_0..a_{d-1} (negated regressors)
            for k in 0..d {
                a[(t, k)] = -y2[t + k];
            }
            // numerator row-coefficient matrices N_0..N_q
            for k in 0..=q {
                for j in 0..m {
                    a[(t, d + k * m + j)] = y.data[t + k][j];
                }
            }
        }
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        let smin = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if condition > 1e12 {
            return Err(Error::IllConditioned { condition });
        }
        let sol = svd
            .solve(&b, 1e-14)
            .map_err(|e| Error::VerificationFailure(format!("least squares failed: {e}")))?;
        let mut den = vec![0.0; d + 1];
        den[d] = 1.0;
        den[..d].copy_from_slice(&sol.as_slice()[..d]);
        let den_poly = Polynomial::new(den);
        for j in 0..m {
            let mut num = vec![0.0; q + 1];
            for (k, slot) in num.iter_mut().enumerate() {
                *slot = sol[d + k * m + j];
            }
            entries.push(RationalFunction::try_new(
                Polynomial::new(num),
                den_poly.clone(),
                Variable::Z,
            )?);
        }
    }
    RationalMatrix::new(p, m, entries, Variable::Z)
}

/// Result of the scalar prediction-error ARMA fit.
#[derive(Debug, Clone)]
pub struct ArmaFit {
    /// Monic innovation form z^(p-q)(z^q + c1 z^(q-1) + ...)/(z^p + a1 ...),
    /// zeros reflected into the closed unit disk.
    pub model: RationalFunction,
    /// Innovation variance at the returned parameters.
    pub innovation_variance: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Gauss-Newton prediction-error fit of a scalar ARMA(p, q) model with known
/// orders, initialized by a long-AR / Hannan-Rissanen regression.
pub fn estimate_arma_pem(y: &[f64], ar_order: usize, ma_order: usize) -> Result<ArmaFit> {
    let n = y.len();
    let np = ar_order;
    let nq = ma_order;
    let nparams = np + nq;
    if n < 10 * nparams.max(1) {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    let spread = series_spread(y);
    if spread < 1e-12 {
        return Err(Error::IllConditioned { condition: f64::INFINITY });
    }
    if nparams == 0 {
        // gain-only model
        let var = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        return Ok(ArmaFit {
            model: RationalFunction::one(Variable::Z),
            innovation_variance: var,
            converged: true,
            iterations: 0,
        });
    }

    let mut theta = hannan_rissanen_init(y, np, nq)?;
    project_stable(&mut theta[..np]);
    project_stable_tail(&mut theta, np);
    let mut cost = prediction_error_cost(y, &theta, np, nq).0;
    let mut converged = false;
    let mut iterations = 0;
    let cap = 200;
    for it in 0..cap {
        iterations = it + 1;
        let (residuals, jac) = prediction_error_jacobian(y, &theta, np, nq);
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let rhs = &jt * &residuals;
        let step = match normal.clone().lu().solve(&rhs) {
            Some(s) => s,
            None => break,
        };
        // line search with stability projection
        let mut accepted = false;
        let mut scale = 1.0;
        for _ in 0..12 {
            let mut cand: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(t, s)| t - scale * s)
                .collect();
            project_stable(&mut cand[..np]);
            project_stable_tail(&mut cand, np);
            let c = prediction_error_cost(y, &cand, np, nq).0;
            if c < cost {
                let delta = theta
                    .iter()
                    .zip(cand.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0_f64, f64::max);
                let rel_drop = (cost - c) / cost.max(1e-300);
                theta = cand;
                cost = c;
                accepted = true;
                if delta < 1e-10 || rel_drop < 1e-12 {
                    converged = true;
                }
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            converged = true; // no descent direction left
            break;
        }
        if converged {
            break;
        }
    }
    // reflect any non-minimum-phase zeros, then re-measure the variance
    let mut ar: Vec<f64> = theta[..np].to_vec();
    let mut ma: Vec<f64> = theta[np..].to_vec();
    project_stable(&mut ar);
    reflect_into_disk(&mut ma);
    let final_theta: Vec<f64> = ar.iter().chain(ma.iter()).copied().collect();
    let (final_cost, count) = prediction_error_cost(y, &final_theta, np, nq);
    let variance = final_cost / count as f64;
    let model = arma_to_transfer(&final_theta, np, nq);
    if !converged && iterations >= cap {
        return Ok(ArmaFit { model, innovation_variance: variance, converged: false, iterations });
    }
    Ok(ArmaFit { model, innovation_variance: variance, converged: true, iterations })
}

fn series_spread(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64).sqrt()
}

/// Long-AR residuals then joint regression on lagged outputs and residuals.
fn hannan_rissanen_init(y: &[f64], np: usize, nq: usize) -> Result<Vec<f64>> {
    let n = y.len();
    let long = (2 * (np + nq)).max(8).min(n / 4);
    // AR(long) by least squares
    let rows = n - long;
    let mut a = DMatrix::<f64>::zeros(rows, long);
    let mut b = DVector::<f64>::zeros(rows);
    for t in 0..rows {
        b[t] = y[t + long];
        for k in 0..long {
            a[(t, k)] = -y[t + long - 1 - k];
        }
    }
    let coeffs = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::VerificationFailure(format!("long AR failed: {e}")))?;
    let mut resid = vec![0.0; n];
    for t in long..n {
        let mut pred = 0.0;
        for k in 0..long {
            pred -= coeffs[k] * y[t - 1 - k];
        }
        resid[t] = y[t] - pred;
    }
    // regression of y(t) on -y(t-i) and resid(t-j)
    let start = long + nq;
    let rows = n - start;
    let cols = np + nq;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);
    for t in 0..rows {
        let at = t + start;
        b[t] = y[at] - resid[at];
        for i in 0..np {
            a[(t, i)] = -y[at - 1 - i];
        }
        for j in 0..nq {
            a[(t, np + j)] = resid[at - 1 - j];
        }
    }
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::VerificationFailure(format!("init regression failed: {e}")))?;
    Ok(sol.as_slice().to_vec())
}

/// One-step prediction errors for delay-form parameters
/// (a_1..a_p, c_1..c_q): eps(t) = y(t) + sum a_i y(t-i) - sum c_j eps(t-j).
fn prediction_errors(y: &[f64], theta: &[f64], np: usize, nq: usize) -> Vec<f64> {
    let n = y.len();
    let mut eps = vec![0.0; n];
    let start = np.max(nq);
    for t in start..n {
        let mut v = y[t];
        for i in 0..np {
            v += theta[i] * y[t - 1 - i];
        }
        for j in 0..nq {
            v -= theta[np + j] * eps[t - 1 - j];
        }
        eps[t] = v;
    }
    eps
}

fn prediction_error_cost(y: &[f64], theta: &[f64], np: usize, nq: usize) -> (f64, usize) {
    let eps = prediction_errors(y, theta, np, nq);
    let start = np.max(nq);
    let cost = eps[start..].iter().map(|e| e * e).sum::<f64>();
    (cost, y.len() - start)
}

fn prediction_error_jacobian(
    y: &[f64],
    theta: &[f64],
    np: usize,
    nq: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = y.len();
    let eps = prediction_errors(y, theta, np, nq);
    let start = np.max(nq);
    let rows = n - start;
    let mut jac = DMatrix::<f64>::zeros(rows, np + nq);
    // psi columns by filtering the relevant lagged signal through 1/C
    let c = &theta[np..];
    let filter = |src: &dyn Fn(usize) -> f64, col: usize, jac: &mut DMatrix<f64>| {
        let mut psi = vec![0.0; n];
        for t in start..n {
            let mut v = src(t);
            for (j, &cj) in c.iter().enumerate() {
                v -= cj * psi[t - 1 - j];
            }
            psi[t] = v;
        }
        for t in start..n {
            jac[(t - start, col)] = psi[t];
        }
    };
    for i in 0..np {
        let yy = y;
        filter(&move |t: usize| yy[t - 1 - i], i, &mut jac);
    }
    for j in 0..nq {
        let ee = &eps;
        filter(&move |t: usize| -ee[t - 1 - j], np + j, &mut jac);
    }
    let r = DVector::from_fn(rows, |t, _| eps[t + start]);
    (r, jac)
}

/// Projects delay-form coefficients so the monic forward polynomial has all
/// roots strictly inside the unit disk (reflect + shrink).
fn project_stable(coeffs: &mut [f64]) {
    reflect_into_disk(coeffs);
    // shrink marginally stable roots slightly inward
    let k = coeffs.len();
    if k == 0 {
        return;
    }
    let mut poly = vec![0.0; k + 1];
    poly[k] = 1.0;
    for (i, &c) in coeffs.iter().enumerate() {
        poly[k - 1 - i] = c;
    }
    let roots = Polynomial::new(poly).roots();
    if roots.iter().any(|r| r.norm() > 1.0 - 1e-6) {
        let scaled: Vec<Complex64> = roots
            .iter()
            .map(|r| {
                if r.norm() > 1.0 - 1e-6 {
                    r * (1.0 - 1e-4) / r.norm().max(1.0)
                } else {
                    *r
                }
            })
            .collect();
        write_back(coeffs, &scaled);
    }
}

/// Reflects roots outside the closed unit disk to their mirrors.
fn reflect_into_disk(coeffs: &mut [f64]) {
    let k = coeffs.len();
    if k == 0 {
        return;
    }
    let mut poly = vec![0.0; k + 1];
    poly[k] = 1.0;
    for (i, &c) in coeffs.iter().enumerate() {
        poly[k - 1 - i] = c;
    }
    let roots = Polynomial::new(poly).roots();
    if roots.iter().all(|r| r.norm() <= 1.0) {
        return;
    }
    let reflected: Vec<Complex64> = roots
        .iter()
        .map(|r| if r.norm() > 1.0 { 1.0 / r.conj() } else { *r })
        .collect();
    write_back(coeffs, &reflected);
}

fn write_back(coeffs: &mut [f64], roots: &[Complex64]) {
    let k = coeffs.len();
    let poly = Polynomial::from_roots(roots, 1.0);
    for i in 0..k {
        coeffs[i] = poly.coeff(k - 1 - i);
    }
}

fn project_stable_tail(theta: &mut [f64], np: usize) {
    let (_, ma) = theta.split_at_mut(np);
    // the gradient filters 1/C(z) must stay stable during iteration
    project_stable(ma);
}

/// Monic forward-form transfer from delay-form parameters.
fn arma_to_transfer(theta: &[f64], np: usize, nq: usize) -> RationalFunction {
    let mut a = vec![0.0; np + 1];
    a[np] = 1.0;
    for i in 0..np {
        a[np - 1 - i] = theta[i];
    }
    let mut c = vec![0.0; nq + 1];
    c[nq] = 1.0;
    for j in 0..nq {
        c[nq - 1 - j] = theta[np + j];
    }
    let mut num = Polynomial::new(c);
    let mut den = Polynomial::new(a);
    if np > nq {
        num = num.mul(&Polynomial::new(
            std::iter::repeat(0.0)
                .take(np - nq)
                .chain(std::iter::once(1.0))
                .collect(),
        ));
    } else if nq > np {
        den = den.mul(&Polynomial::new(
            std::iter::repeat(0.0)
                .take(nq - np)
                .chain(std::iter::once(1.0))
                .collect(),
        ));
    }
    RationalFunction::new(num, den, Variable::Z)
}

/// Orders for the identification pipeline.
#[derive(Debug, Clone, Copy)]
pub struct IdentOrders {
    pub h_num: usize,
    pub h_den: usize,
    pub arma_ar: usize,
    pub arma_ma: usize,
}

/// End-to-end identification: fit H by least squares, fit a scalar ARMA
/// innovation model of y1, then recover the minimum-phase factor. The
/// scalar prediction-error scope requires m = 1.
pub fn identify_innovation_model(y: &TimeSeries, orders: IdentOrders) -> Result<FactorizationResult> {
    if y.m != 1 {
        return Err(Error::Unsupported(
            "identification pipeline covers scalar leading processes (m = 1)".into(),
        ));
    }
    let h = estimate_h_ls(y, orders.h_num, orders.h_den)?;
    let fit = estimate_arma_pem(&y.column(0), orders.arma_ar, orders.arma_ma)?;
    let g1 = RationalMatrix::new(1, 1, vec![fit.model.clone()], Variable::Z)?;
    let mut result = factor_from_relation(&g1, &h, &FactorOptions::default())?;
    if !fit.converged {
        result
            .diagnostics
            .warnings
            .push(format!("ARMA fit hit the iteration cap ({})", fit.iterations));
    }
    Ok(result)
}

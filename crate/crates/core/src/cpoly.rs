//! Complex-coefficient polynomial helpers (ascending degree), used where a
//! conjugate pair has to be manipulated one member at a time before the
//! result is realified.

use num_complex::Complex64;

use crate::poly::Polynomial;

pub(crate) fn from_real(p: &Polynomial) -> Vec<Complex64> {
    if p.is_zero() {
        return vec![Complex64::ZERO];
    }
    p.coeffs().iter().map(|&c| Complex64::new(c, 0.0)).collect()
}

pub(crate) fn eval(p: &[Complex64], x: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::ZERO, |acc, &c| acc * x + c)
}

pub(crate) fn mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn pow(base: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::ONE];
    for _ in 0..k {
        out = mul(&out, base);
    }
    out
}

pub(crate) fn add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| {
            a.get(k).copied().unwrap_or(Complex64::ZERO)
                + b.get(k).copied().unwrap_or(Complex64::ZERO)
        })
        .collect()
}

pub(crate) fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| {
            a.get(k).copied().unwrap_or(Complex64::ZERO)
                - b.get(k).copied().unwrap_or(Complex64::ZERO)
        })
        .collect()
}

pub(crate) fn scale(a: &[Complex64], s: Complex64) -> Vec<Complex64> {
    a.iter().map(|&c| c * s).collect()
}

pub(crate) fn derivative(p: &[Complex64]) -> Vec<Complex64> {
    if p.len() <= 1 {
        return vec![Complex64::ZERO];
    }
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

/// Converts back to a real polynomial; returns the largest imaginary
/// magnitude seen so the caller can assert the result was real.
pub(crate) fn to_real(p: &[Complex64]) -> (Polynomial, f64) {
    let imag = p.iter().fold(0.0_f64, |m, c| m.max(c.im.abs()));
    (Polynomial::new(p.iter().map(|c| c.re).collect()), imag)
}

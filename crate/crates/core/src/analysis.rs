//! Transmission-zero computation.
//!
//! Proper matrices go through the system-matrix pencil of a minimal
//! realization: the finite generalized eigenvalues of
//! [A - xI, B; C, D] against diag(I, 0) are the invariant zeros. Non-square
//! (tall) pencils are row-compressed with two fixed-seed random matrices and
//! the two eigenvalue multisets are intersected, which removes the generic
//! spurious eigenvalues a single compression introduces. Improper matrices
//! fall back to the Smith-McMillan minor gcd.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::realization::minimal_realization;
use crate::rmatrix::RationalMatrix;
use crate::poly::Polynomial;

/// Transmission zeros (with multiplicity) of a full-column-normal-rank
/// rational matrix. Zeros are reported only where the matrix is analytic;
/// Smith-McMillan zeros coinciding with a pole are returned separately by
/// [`transmission_zeros_with_warnings`].
pub fn transmission_zeros(m: &RationalMatrix) -> Result<Vec<Complex64>> {
    Ok(transmission_zeros_with_warnings(m)?.0)
}

/// Zeros plus the pole-coincident Smith-McMillan zeros that were filtered
/// out (unresolved pole/zero coincidences, reported as warnings).
pub fn transmission_zeros_with_warnings(
    m: &RationalMatrix,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let rank = m.normal_rank();
    if rank < m.cols() {
        return Err(Error::RankDeficientInput { rank, cols: m.cols() });
    }
    let improper = m.entries().iter().any(|e| !e.is_proper());
    let raw = if improper { minors_zeros(m) } else { pencil_zeros(m)? };
    // keep only zeros at analytic points: entrywise pole locations
    let poles: Vec<Complex64> = m
        .entries()
        .iter()
        .flat_map(|e| e.den().roots())
        .collect();
    // typical magnitude away from zeros, for the rank-drop confirmation
    let scale = m
        .evaluate_unchecked(Complex64::new(0.9173, 1.2377))
        .norm()
        .max(m.evaluate_unchecked(Complex64::new(-1.3317, 0.4141)).norm());
    let mut zeros = Vec::new();
    let mut coincident = Vec::new();
    for z in raw {
        if poles.iter().any(|p| (z - p).norm() <= 1e-6 * (1.0 + p.norm())) {
            coincident.push(z);
        } else {
            // confirm the column-rank drop at the candidate; the compressed
            // pencil can keep a stray eigenvalue in degenerate geometries
            let sv = m.evaluate_unchecked(z).svd(false, false).singular_values;
            let smin = sv[sv.len() - 1];
            if smin <= 1e-5 * (1.0 + scale) {
                zeros.push(z);
            }
        }
    }
    let key = |x: &Complex64| (x.re, x.im);
    zeros.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap_or(std::cmp::Ordering::Equal));
    coincident.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap_or(std::cmp::Ordering::Equal));
    Ok((zeros, coincident))
}

fn pencil_zeros(m: &RationalMatrix) -> Result<Vec<Complex64>> {
    let ss = minimal_realization(m)?;
    let n = ss.order();
    let p = ss.outputs();
    let mi = ss.inputs();
    let mut f0 = DMatrix::<f64>::zeros(n + p, n + mi);
    f0.view_mut((0, 0), (n, n)).copy_from(&ss.a);
    f0.view_mut((0, n), (n, mi)).copy_from(&ss.b);
    f0.view_mut((n, 0), (p, n)).copy_from(&ss.c);
    f0.view_mut((n, n), (p, mi)).copy_from(&ss.d);
    let mut e = DMatrix::<f64>::zeros(n + p, n + mi);
    for i in 0..n {
        e[(i, i)] = 1.0;
    }
    if p == mi {
        return square_pencil_eigenvalues(&f0, &e);
    }
    // tall pencil: intersect two random row compressions
    let set1 = compressed_eigenvalues(&f0, &e, n + mi, 0x5eed_0001)?;
    let set2 = compressed_eigenvalues(&f0, &e, n + mi, 0x5eed_0002)?;
    Ok(intersect_multisets(&set1, &set2, 1e-6))
}

fn compressed_eigenvalues(
    f0: &DMatrix<f64>,
    e: &DMatrix<f64>,
    target_rows: usize,
    seed: u64,
) -> Result<Vec<Complex64>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let r = DMatrix::<f64>::from_fn(target_rows, f0.nrows(), |_, _| {
        StandardNormal.sample(&mut rng)
    });
    square_pencil_eigenvalues(&(&r * f0), &(&r * e))
}

/// Finite generalized eigenvalues of the square pencil F0 - x E through the
/// shift-and-invert reduction to a standard eigenproblem.
fn square_pencil_eigenvalues(f0: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let shifts = [
        0.314_159, 1.772_453, -2.236_067, 0.577_215, -1.414_213, 2.718_281, -0.693_147,
    ];
    let scale = f0.norm().max(e.norm()).max(1.0);
    for &sigma in &shifts {
        let shifted = f0 - e * sigma;
        let lu = shifted.clone().lu();
        let det = lu.determinant();
        if !det.is_finite() || det.abs() < 1e-12 * scale.powi(f0.nrows() as i32).min(1e12) {
            continue;
        }
        let Some(g) = lu.try_inverse() else { continue };
        let g = g * e;
        let mus = g.complex_eigenvalues();
        let mut out = Vec::new();
        for mu in mus.iter() {
            // small mu belongs to the infinite eigenvalues of the singular
            // pencil; finite desk-scale zeros stay well within |x| ~ 1e3
            if mu.norm() > 1e-3 {
                out.push(sigma + 1.0 / mu);
            }
        }
        return Ok(out);
    }
    Err(Error::VerificationFailure(
        "pencil is singular at every probe shift".into(),
    ))
}

fn intersect_multisets(a: &[Complex64], b: &[Complex64], tolerance: f64) -> Vec<Complex64> {
    let mut used = vec![false; b.len()];
    let mut out = Vec::new();
    for x in a {
        let mut best: Option<(usize, f64)> = None;
        for (j, y) in b.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (x - y).norm();
            if d <= tolerance * (1.0 + x.norm()) && best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            used[j] = true;
            out.push((x + b[j]) / 2.0);
        }
    }
    out
}

/// Smith-McMillan zero multiset via the gcd of the maximal minors expressed
/// over the common pole polynomial.
pub fn minors_zeros(m: &RationalMatrix) -> Vec<Complex64> {
    let rows = m.rows();
    let cols = m.cols();
    let mut minors: Vec<(Polynomial, Polynomial)> = Vec::new();
    for subset in combinations(rows, cols) {
        let sub = RationalMatrix::from_fn(cols, cols, m.var(), |i, j| {
            m.entry(subset[i], j).clone()
        })
        .expect("minor shape");
        let det = sub.determinant().expect("square minor");
        if !det.is_zero() {
            minors.push((det.num().clone(), det.den().clone()));
        }
    }
    if minors.is_empty() {
        return Vec::new();
    }
    // common denominator as a root multiset (max multiplicity per root)
    let mut den_lcm: Vec<(Complex64, usize)> = Vec::new();
    for (_, den) in &minors {
        let clusters = cluster_roots(&den.roots());
        for (root, mult) in clusters {
            match den_lcm
                .iter_mut()
                .find(|(r, _)| (*r - root).norm() <= 1e-6 * (1.0 + root.norm()))
            {
                Some((_, m0)) => *m0 = (*m0).max(mult),
                None => den_lcm.push((root, mult)),
            }
        }
    }
    // numerator root multisets after scaling each minor to the lcm
    let mut num_sets: Vec<Vec<(Complex64, usize)>> = Vec::new();
    for (num, den) in &minors {
        let mut set = cluster_roots(&num.roots());
        let den_set = cluster_roots(&den.roots());
        // multiply by lcm/den: add the missing denominator roots
        for (root, mult) in &den_lcm {
            let have = den_set
                .iter()
                .find(|(r, _)| (r - root).norm() <= 1e-6 * (1.0 + root.norm()))
                .map_or(0, |(_, k)| *k);
            if *mult > have {
                match set
                    .iter_mut()
                    .find(|(r, _)| (*r - *root).norm() <= 1e-6 * (1.0 + root.norm()))
                {
                    Some((_, k)) => *k += mult - have,
                    None => set.push((*root, mult - have)),
                }
            }
        }
        num_sets.push(set);
    }
    // gcd: min multiplicity across all minors
    let mut out = Vec::new();
    for (root, mult) in &num_sets[0] {
        let mut k = *mult;
        for set in num_sets.iter().skip(1) {
            let found = set
                .iter()
                .find(|(r, _)| (r - root).norm() <= 1e-6 * (1.0 + root.norm()))
                .map_or(0, |(_, m0)| *m0);
            k = k.min(found);
            if k == 0 {
                break;
            }
        }
        for _ in 0..k {
            out.push(*root);
        }
    }
    out
}

fn cluster_roots(roots: &[Complex64]) -> Vec<(Complex64, usize)> {
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    for r in roots {
        match out
            .iter_mut()
            .find(|(c, _)| (*c - r).norm() <= 1e-6 * (1.0 + r.norm()))
        {
            Some((_, k)) => *k += 1,
            None => out.push((*r, 1)),
        }
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

//! Realization round-trip tests against golden values and an independent
//! Hankel-rank oracle for the McMillan degree.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use specfact::poly::Polynomial;
use specfact::rational::{RationalFunction, Variable};
use specfact::realization::minimal_realization;
use specfact::rmatrix::RationalMatrix;

fn pm(a: &[f64], b: &[f64]) -> Polynomial {
    Polynomial::new(a.to_vec()).mul(&Polynomial::new(b.to_vec()))
}

/// Independent McMillan-degree oracle: rank of the block Hankel matrix of
/// the Markov coefficients, computed by series expansion per entry (no
/// realization code involved).
fn hankel_mcmillan_degree(t: &RationalMatrix, terms: usize) -> usize {
    let p = t.rows();
    let m = t.cols();
    // entry series in w = 1/x: num(1/w)/den(1/w) expanded at w = 0
    let series: Vec<Vec<f64>> = t
        .entries()
        .iter()
        .map(|e| {
            let dn = e.num().degree().map_or(0, |d| d);
            let dd = e.den().degree().map_or(0, |d| d);
            let k = dn.max(dd);
            let n = e.num().reversed_padded(k);
            let d = e.den().reversed_padded(k);
            // c_j = (n_j - sum_{i>=1} d_i c_{j-i}) / d_0
            let d0 = d.coeff(0);
            assert!(d0.abs() > 1e-12, "entry not proper");
            let mut c = vec![0.0; 2 * terms + 1];
            for j in 0..c.len() {
                let mut v = n.coeff(j);
                for i in 1..=j.min(k) {
                    v -= d.coeff(i) * c[j - i];
                }
                c[j] = v / d0;
            }
            c
        })
        .collect();
    // scale by the spectral radius so fast and slow modes are balanced
    let rho = t
        .entries()
        .iter()
        .flat_map(|e| e.den().roots())
        .map(|r| r.norm())
        .fold(1.0_f64, f64::max);
    // block Hankel of Markov parameters M_1.. (skip the direct term)
    let rows = terms * p;
    let cols = terms * m;
    let h = DMatrix::<f64>::from_fn(rows, cols, |r, c| {
        let (bi, i) = (r / p, r % p);
        let (bj, j) = (c / m, c % m);
        let k = bi + bj + 1;
        series[i * m + j][k] / rho.powi(k as i32)
    });
    let sv = h.svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-8 * smax).count()
}

#[test]
fn five_state_golden_round_trip() {
    // [ (s+1)^2(s+2)^2 / ((s+4)^2(s^2-2s+2)), (s+1)(s+3)/((s-1)(s+4)) ]^T
    let n1 = pm(&[1.0, 1.0], &[1.0, 1.0]).mul(&pm(&[2.0, 1.0], &[2.0, 1.0]));
    let d1 = pm(&[4.0, 1.0], &[4.0, 1.0]).mul(&Polynomial::new(vec![2.0, -2.0, 1.0]));
    let n2 = pm(&[1.0, 1.0], &[3.0, 1.0]);
    let d2 = pm(&[-1.0, 1.0], &[4.0, 1.0]);
    let t = RationalMatrix::new(
        2,
        1,
        vec![
            RationalFunction::new(n1, d1, Variable::S),
            RationalFunction::new(n2, d2, Variable::S),
        ],
        Variable::S,
    )
    .unwrap();
    let ss = minimal_realization(&t).unwrap();
    assert_eq!(ss.order(), 5);
    assert_eq!(ss.n_unstable, 3);
    ss.validate().unwrap();
    // block split spectra: unstable {1, 1 +/- i}, stable {-4, -4}
    let mut unstable: Vec<Complex64> = ss.a_unstable().complex_eigenvalues().iter().copied().collect();
    unstable.sort_by(|a, b| (a.im, a.re).partial_cmp(&(b.im, b.re)).unwrap());
    assert!((unstable[0] - Complex64::new(1.0, -1.0)).norm() < 1e-9);
    assert!((unstable[1] - Complex64::new(1.0, 0.0)).norm() < 1e-9);
    assert!((unstable[2] - Complex64::new(1.0, 1.0)).norm() < 1e-9);
    for ev in ss.a_stable().complex_eigenvalues().iter() {
        assert!((ev - Complex64::new(-4.0, 0.0)).norm() < 1e-6);
    }
    // transfer round-trip
    assert!(ss.transfer().approx_eq(&t, 1e-8));
    // the independent Hankel oracle agrees on the McMillan degree
    assert_eq!(hankel_mcmillan_degree(&t, 8), 5);
}

fn random_proper_matrix(rng: &mut StdRng, var: Variable, rows: usize, cols: usize) -> RationalMatrix {
    // per-column denominators with well-separated poles off the boundary
    let mut col_dens: Vec<Polynomial> = Vec::new();
    let mut all_poles: Vec<Complex64> = Vec::new();
    for _ in 0..cols {
        loop {
            let deg = rng.random_range(1..=2);
            let mut roots: Vec<Complex64> = Vec::new();
            if deg == 2 && rng.random_bool(0.4) {
                let (re, im) = match var {
                    Variable::Z => {
                        let r = rng.random_range(0.15..0.85);
                        let th = rng.random_range(0.4..2.7);
                        (r * f64::cos(th), r * f64::sin(th))
                    }
                    Variable::S => (rng.random_range(-2.5..-0.3), rng.random_range(0.3..2.0)),
                };
                roots.push(Complex64::new(re, im));
                roots.push(Complex64::new(re, -im));
            } else {
                for _ in 0..deg {
                    let v = match var {
                        Variable::Z => {
                            let r = rng.random_range(0.15..0.85);
                            if rng.random_bool(0.5) {
                                r
                            } else {
                                -r
                            }
                        }
                        Variable::S => rng.random_range(-2.5..-0.3),
                    };
                    roots.push(Complex64::new(v, 0.0));
                }
            }
            let separated = roots.iter().all(|r| {
                all_poles
                    .iter()
                    .all(|q| (r - q).norm() > 0.05 || (r - q).norm() < 1e-12)
            }) && (roots.len() < 2 || (roots[0] - roots[1]).norm() > 0.05 || roots[0].im != 0.0);
            if separated {
                all_poles.extend(roots.iter().copied());
                col_dens.push(Polynomial::from_roots(&roots, 1.0));
                break;
            }
        }
    }
    RationalMatrix::from_fn(rows, cols, var, |_, j| {
        let den = col_dens[j].clone();
        let deg = den.degree().unwrap();
        let num = Polynomial::new((0..=deg).map(|_| rng.random_range(-1.0..1.0)).collect());
        RationalFunction::new(num, den, var)
    })
    .unwrap()
}

#[test]
fn random_round_trips_and_mcmillan_degree() {
    let mut rng = StdRng::seed_from_u64(0xA11CE);
    for case in 0..50 {
        let var = if case % 2 == 0 { Variable::Z } else { Variable::S };
        let rows = rng.random_range(1..=3);
        let cols = rng.random_range(1..=2);
        let t = random_proper_matrix(&mut rng, var, rows, cols);
        let ss = minimal_realization(&t).unwrap();
        ss.validate().unwrap();
        assert!(
            ss.transfer().approx_eq(&t, 1e-8),
            "round trip failed on case {case} ({rows}x{cols} {var})"
        );
        let oracle = hankel_mcmillan_degree(&t, 10);
        assert_eq!(
            ss.order(),
            oracle,
            "McMillan degree mismatch on case {case}: realization {} vs Hankel {}",
            ss.order(),
            oracle
        );
    }
}

#[test]
fn similarity_reorders_and_keeps_split() {
    let t = RationalMatrix::new(
        1,
        2,
        vec![
            RationalFunction::new(
                Polynomial::new(vec![0.3, 1.0]),
                pm(&[-2.0, 1.0], &[0.4, 1.0]),
                Variable::Z,
            ),
            RationalFunction::new(
                Polynomial::new(vec![1.0]),
                Polynomial::new(vec![-0.6, 1.0]),
                Variable::Z,
            ),
        ],
        Variable::Z,
    )
    .unwrap();
    let ss = minimal_realization(&t).unwrap();
    assert_eq!(ss.n_unstable, 1);
    let n = ss.order();
    // a permutation that keeps the block-diagonal split re-audits cleanly
    let mut perm = DMatrix::<f64>::zeros(n, n);
    perm[(0, 0)] = 1.0;
    perm[(1, 2)] = 1.0;
    perm[(2, 1)] = 1.0;
    let moved = ss.similarity(&perm).unwrap();
    assert_eq!(moved.n_unstable, 1);
    moved.validate().unwrap();
    assert!(moved.transfer().approx_eq(&t, 1e-9));
}

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use specfact::factor::*;
use specfact::poly::Polynomial;
use specfact::rational::{RationalFunction, Variable};
use specfact::rmatrix::RationalMatrix;

fn random_pole(rng: &mut StdRng, var: Variable) -> Vec<Complex64> {
    if rng.random_bool(0.35) {
        let (re, im) = match var {
            Variable::Z => { let r = rng.random_range(0.15..0.85); let th = rng.random_range(0.4..2.7); (r*f64::cos(th), r*f64::sin(th)) }
            Variable::S => (rng.random_range(-2.2..-0.3), rng.random_range(0.3..1.8)),
        };
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    } else {
        let v = match var {
            Variable::Z => { let r = rng.random_range(0.15..0.85); if rng.random_bool(0.5) { r } else { -r } }
            Variable::S => rng.random_range(-2.2..-0.3),
        };
        vec![Complex64::new(v, 0.0)]
    }
}

fn random_w(rng: &mut StdRng, var: Variable) -> RationalMatrix {
    loop {
        let m = rng.random_range(1..=2usize);
        let p = rng.random_range(1..=2usize);
        let mut all: Vec<Complex64> = Vec::new();
        let mut dens: Vec<Polynomial> = Vec::new();
        'cols: for _ in 0..m {
            for _ in 0..40 {
                let roots = if rng.random_bool(0.4) { random_pole(rng, var) } else {
                    let mut r = random_pole(rng, var);
                    if r.len() == 1 { let more = random_pole(rng, var); if more.len() == 1 { r.extend(more); } }
                    r
                };
                let ok = roots.iter().all(|r| {
                    all.iter().all(|q| (r - q).norm() > 0.05)
                        && roots.iter().filter(|s| (*s - r).norm() < 0.03).count() == 1
                });
                if ok { all.extend(roots.iter().copied()); dens.push(Polynomial::from_roots(&roots, 1.0)); continue 'cols; }
            }
            dens.push(Polynomial::from_roots(&[Complex64::new(0.5, 0.0)], 1.0));
        }
        let w = RationalMatrix::from_fn(m + p, m, var, |_, j| {
            let deg = dens[j].degree().unwrap();
            let num = Polynomial::new((0..=deg).map(|_| rng.random_range(-1.2..1.2)).collect());
            RationalFunction::new(num, dens[j].clone(), var)
        }).unwrap();
        let leading = w.block(0, 0, m, m);
        if w.normal_rank() != m || leading.normal_rank() != m { continue; }
        let det = leading.determinant().unwrap();
        let margin_ok = det.num().roots().iter().all(|z| match var {
            Variable::Z => (z.norm() - 1.0).abs() > 0.08,
            Variable::S => z.re.abs() > 0.08,
        });
        if margin_ok && w.is_minimum_phase().unwrap_or(false) {
            return w;
        }
    }
}

fn trace_case(seed: u64, var: Variable) {
    use specfact::outer_inner::outer_inner;
    use specfact::realization::minimal_realization;
    let mut rng = StdRng::seed_from_u64(seed);
    let w_true = random_w(&mut rng, var);
    let m = w_true.cols();
    println!("=== seed {seed:x} var {var} m {m} rows {}", w_true.rows());
    let density = PartitionedSpectralDensity::from_factor(&w_true, m).unwrap();
    let h = density.compute_h().unwrap();
    for i in 0..h.rows() { for j in 0..m {
        println!("H[{i}{j}]: {:?}/{:?}", h.entry(i,j).num().degree(), h.entry(i,j).den().degree());
    }}
    let w_o1 = w_true.block(0, 0, m, m);
    let oi = outer_inner(&w_o1).unwrap();
    for i in 0..m { for j in 0..m {
        println!("G1[{i}{j}]: {:?}/{:?}", oi.outer.entry(i,j).num().degree(), oi.outer.entry(i,j).den().degree());
    }}
    let t = h.mul(&oi.outer).unwrap().transpose();
    for i in 0..m { for j in 0..t.cols() {
        println!("T[{i}{j}]: {:?}/{:?}  den roots {:?}", t.entry(i,j).num().degree(), t.entry(i,j).den().degree(), t.entry(i,j).den().roots().iter().map(|r| format!("{:.4}{:+.4}i", r.re, r.im)).collect::<Vec<_>>());
    }}
    std::fs::write("/tmp/smoke/t_fail.json", serde_json::to_string(&t.to_document()).unwrap()).unwrap();
    match minimal_realization(&t) {
        Ok(ss) => {
            println!("T realization order {} n_u {}", ss.order(), ss.n_unstable);
            let rt = ss.transfer();
            for k in 0..4 {
                let pt = num_complex::Complex64::new(0.9 + 0.31*k as f64, 0.4 - 0.17*k as f64);
                let a = rt.evaluate_unchecked(pt);
                let b = t.evaluate_unchecked(pt);
                println!("  realization round-trip dev at {pt}: {:.3e}", (a.clone()-b.clone()).norm());
            }
            let (t_n, t_d, _) = specfact::factor::coprime_inner_factorization(&ss, &nalgebra::DMatrix::identity(m, m)).unwrap();
            let lhs = t_d.mul(&t).unwrap();
            println!("T_D T vs T_N approx_eq: {}", lhs.approx_eq(&t_n, 1e-6));
            for k in 0..6 {
                let pt = num_complex::Complex64::new(0.9 + 0.31*k as f64, 0.4 - 0.17*k as f64);
                let a = lhs.evaluate_unchecked(pt);
                let b = t_n.evaluate_unchecked(pt);
                println!("  dev at {pt}: {:.3e} scale {:.3e}", (a.clone()-b.clone()).norm(), b.norm());
            }
            println!("T_D inner residual {:.3e}", specfact::outer_inner::inner_residual(&t_d.transpose()));
            for i in 0..m { for j in 0..t.cols() {
                println!("T_N[{i}{j}]: {:?}/{:?}", t_n.entry(i,j).num().degree(), t_n.entry(i,j).den().degree());
            }}
        }
        Err(e) => println!("realization error: {e}"),
    }
}

fn main() {
    trace_case(0xFAC0 + 18, Variable::Z);
    for k in 0..50u64 {
        let var = if k % 2 == 0 { Variable::Z } else { Variable::S };
        let mut rng = StdRng::seed_from_u64(0xFAC0 + k);
        let w_true = random_w(&mut rng, var);
        let m = w_true.cols();
        let density = PartitionedSpectralDensity::from_factor(&w_true, m).unwrap();
        let res = spectral_factor(&density, &G1Source::StableFactor(w_true.clone()), &FactorOptions::default());
        match res {
            Ok(r) => {
                let eq = unitary_equivalence_check(&r.w, &w_true, 1e-6);
                if !eq.equivalent { println!("case {k} var {var}: NOT equivalent, dev {}", eq.max_deviation); }
            }
            Err(e) => {
                println!("case {k} var {var} m {} rows {}: ERROR {e}", m, w_true.rows());
                for i in 0..w_true.rows() { for j in 0..m {
                    println!("   w[{i}{j}] = {}", w_true.entry(i, j));
                }}
            }
        }
    }
    println!("done");
}

#[allow(dead_code)]
fn diag_case(seed: u64, var: Variable) {
    let mut rng = StdRng::seed_from_u64(seed);
    let w_true = random_w(&mut rng, var);
    let m = w_true.cols();
    println!("=== case seed {seed:x} m {} rows {}", m, w_true.rows());
    let phi = w_true.mul(&w_true.para_conjugate()).unwrap();
    for i in 0..m { for j in 0..m {
        let e = phi.entry(i, j);
        println!("phi11[{i}{j}]: {:?}/{:?}", e.num().degree(), e.den().degree());
    }}
    let phi11 = phi.block(0, 0, m, m);
    let det = phi11.determinant().unwrap();
    println!("det phi11: {:?}/{:?}", det.num().degree(), det.den().degree());
    println!("det num roots: {:?}", det.num().roots().iter().map(|r| format!("{:.6}+{:.6}i", r.re, r.im)).collect::<Vec<_>>());
    let inv = phi11.inverse().unwrap();
    for i in 0..m { for j in 0..m {
        let e = inv.entry(i, j);
        println!("inv[{i}{j}]: {:?}/{:?}", e.num().degree(), e.den().degree());
    }}
    let h = phi.block(m, 0, w_true.rows()-m, m).mul(&inv).unwrap();
    for i in 0..h.rows() { for j in 0..m {
        let e = h.entry(i, j);
        println!("H[{i}{j}]: {:?}/{:?}", e.num().degree(), e.den().degree());
    }}
}

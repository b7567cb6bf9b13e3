use num_complex::Complex64;
use specfact::rmatrix::{RationalMatrix, RationalMatrixDoc};
use specfact::realization::minimal_realization;

fn main() {
    let doc: RationalMatrixDoc =
        serde_json::from_str(&std::fs::read_to_string("/tmp/smoke/t_fail.json").unwrap()).unwrap();
    let t = RationalMatrix::from_document(&doc).unwrap();
    let ss = minimal_realization(&t).unwrap();
    println!("A = {:.6}", ss.a);
    // find the state with eigenvalue 0.443235...
    for k in 0..ss.order() {
        if (ss.a[(k, k)] - 0.443235586663).abs() < 1e-9 {
            let c_col = ss.c.column(k);
            let b_row = ss.b.row(k);
            let r = c_col * b_row;
            println!("state {k}: realized residue = {:.6}", r);
        }
    }
    let rho = Complex64::new(0.443235586663345, 0.0);
    let mut r_true = nalgebra::DMatrix::<Complex64>::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            let e = t.entry(i, j);
            let rest = e.den().deflate_real(rho.re);
            r_true[(i, j)] = e.num().eval_complex(rho) / rest.eval_complex(rho);
        }
    }
    println!("R_true = {:.6}", r_true.map(|c| c.re));
}

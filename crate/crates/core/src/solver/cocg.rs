//! Conjugate orthogonal conjugate gradient for complex symmetric systems,
//! with a Jacobi preconditioner.

use num_complex::Complex64;

use super::sparse::{norm2, CsrMatrix};
use crate::exec::Exec;

pub struct CocgOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dotu(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cocg(exec: Exec, a: &CsrMatrix, b: &[Complex64], x0: Vec<Complex64>, tol: f64, max_iter: usize) -> CocgOutcome {
    let n = b.len();
    let inv_diag: Vec<Complex64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d.norm() > 0.0 {
                d.inv()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut x = x0;
    let ax = a.matvec_with(exec, &x);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let mut rel = norm2(&r) / bnorm;
    if rel <= tol {
        return CocgOutcome { x, iterations: 0, relative_residual: rel };
    }
    let mut z: Vec<Complex64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rho = dotu(&r, &z);
    for it in 1..=max_iter {
        let q = a.matvec_with(exec, &p);
        let pq = dotu(&p, &q);
        if pq.norm() == 0.0 {
            return CocgOutcome { x, iterations: it, relative_residual: rel };
        }
        let alpha = rho / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = norm2(&r) / bnorm;
        if rel <= tol {
            // confirm with a true residual to guard against drift
            let ax = a.matvec_with(exec, &x);
            let tr: Vec<Complex64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
            rel = norm2(&tr) / bnorm;
            if rel <= tol {
                return CocgOutcome { x, iterations: it, relative_residual: rel };
            }
            r = tr;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rho_new = dotu(&r, &z);
        if rho.norm() == 0.0 {
            break;
        }
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CocgOutcome { x, iterations: max_iter, relative_residual: rel }
}

//! Small dense complex LU with partial pivoting, used for the conductor block.

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<Complex64>,
    piv: Vec<usize>,
}

impl DenseLu {
    /// Factors the row-major `n x n` matrix `a`. Returns `None` if singular.
    pub fn factor(n: usize, mut a: Vec<Complex64>) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))?;
            if a[p * n + k].norm() <= scale * 1e-300 || a[p * n + k].norm() == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                for j in k + 1..n {
                    let u = a[k * n + j];
                    a[i * n + j] -= f * u;
                }
            }
        }
        Some(Self { n, lu: a, piv })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[i * n + j];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu[i * n + j];
                x[i] = x[i] - u * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needs_pivoting() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let a = vec![c(0.0, 0.0), c(1.0, 1.0), c(2.0, 0.0), c(1.0, 0.0)];
        let lu = DenseLu::factor(2, a).unwrap();
        let x = lu.solve(&[c(1.0, 1.0), c(3.0, 0.0)]);
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(DenseLu::factor(2, vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]).is_none());
    }
}

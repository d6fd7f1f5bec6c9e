//! Compressed sparse row storage for complex matrices.

use num_complex::Complex64;

use crate::exec::{map_indexed, Exec};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed in their input order, so the result is reproducible.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[s..e].binary_search(&j) {
            Ok(k) => self.values[s + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.matvec_with(Exec::Sequential, x)
    }

    pub fn matvec_with(&self, exec: Exec, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n_cols);
        map_indexed(exec, self.n_rows, |i| self.row(i).map(|(j, v)| v * x[j]).sum())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                t.push((j, i, v));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, t)
    }

    /// Exact structural and numerical symmetry `A == A^T`.
    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols && *self == self.transpose()
    }
}

pub fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(1, 0, c(1.0)), (0, 0, c(2.0)), (1, 0, c(3.0))]);
        assert_eq!(m.get(1, 0), c(4.0));
        assert_eq!(m.get(0, 0), c(2.0));
        assert_eq!(m.get(0, 1), c(0.0));
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.matvec(&[c(1.0), c(1.0)]), vec![c(2.0), c(4.0)]);
    }

    #[test]
    fn symmetry_check() {
        let s = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0)), (1, 0, c(1.0))]);
        assert!(s.is_symmetric());
        let n = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0))]);
        assert!(!n.is_symmetric());
    }
}

//! Envelope LDL^T factorization for complex symmetric matrices.
//!
//! No pivoting is performed. The matrices factored here have a symmetric
//! positive definite real part, so every pivot has a positive real part and
//! elimination cannot break down in exact arithmetic. Rows are renumbered by
//! reverse Cuthill-McKee first to keep the envelope narrow.

use std::collections::VecDeque;

use num_complex::Complex64;

use super::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroPivot {
    pub row: usize,
}

/// Reverse Cuthill-McKee permutation of the graph of `a` (pattern of A + A^T
/// is assumed symmetric). Returns `perm` with `perm[new] = old`.
pub fn rcm(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let adj: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect()).collect();
    let degree: Vec<usize> = adj.iter().map(|v| v.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (Vec<usize>, usize) {
        // returns the last level and the depth
        let mut seen = visited.to_vec();
        seen[start] = true;
        let mut level = vec![start];
        let mut depth = 0;
        loop {
            let mut next = Vec::new();
            for &v in &level {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                return (level, depth);
            }
            level = next;
            depth += 1;
        }
    };

    while order.len() < n {
        // lowest-degree unvisited vertex, then walk to a pseudo-peripheral one
        let mut start = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| (degree[v], v)).expect("unvisited vertex");
        let (mut last, mut depth) = bfs_levels(start, &visited);
        for _ in 0..8 {
            let cand = *last.iter().min_by_key(|&&v| (degree[v], v)).expect("non-empty level");
            let (l2, d2) = bfs_levels(cand, &visited);
            if d2 <= depth {
                break;
            }
            start = cand;
            last = l2;
            depth = d2;
        }

        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope-stored factors: row `i` of L holds columns `first[i]..i`.
#[derive(Debug, Clone)]
pub struct EnvelopeLdl {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    lower: Vec<Complex64>,
    diag: Vec<Complex64>,
}

impl EnvelopeLdl {
    pub fn factor(a: &CsrMatrix) -> Result<Self, ZeroPivot> {
        assert_eq!(a.n_rows, a.n_cols);
        let n = a.n_rows;
        let perm = rcm(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for (j_old, _) in a.row(old) {
                let j = inv[j_old];
                if j < i {
                    first[i] = first[i].min(j);
                } else if i < j {
                    first[j] = first[j].min(i);
                }
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let zero = Complex64::new(0.0, 0.0);
        let mut lower = vec![zero; start[n]];
        let mut diag = vec![zero; n];
        for old in 0..n {
            let i = inv[old];
            for (j_old, v) in a.row(old) {
                let j = inv[j_old];
                if j == i {
                    diag[i] += v;
                } else if j < i {
                    lower[start[i] + (j - first[i])] += v;
                }
            }
        }

        // row-oriented Crout elimination
        let mut w = Vec::new();
        for i in 0..n {
            let fi = first[i];
            let row_len = i - fi;
            w.clear();
            w.resize(row_len, zero);
            for jj in 0..row_len {
                let j = fi + jj;
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut t = lower[start[i] + jj];
                let li = &w[(k0 - fi)..jj];
                let lj = &lower[start[j] + (k0 - fj)..start[j] + (j - fj)];
                for (a, b) in li.iter().zip(lj) {
                    t -= a * b;
                }
                w[jj] = t;
            }
            let mut d = diag[i];
            for jj in 0..row_len {
                let j = fi + jj;
                let l = w[jj] / diag[j];
                d -= w[jj] * l;
                lower[start[i] + jj] = l;
            }
            if d.norm() == 0.0 || !d.is_finite() {
                return Err(ZeroPivot { row: perm[i] });
            }
            diag[i] = d;
        }
        Ok(Self { perm, first, start, lower, diag })
    }

    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.diag.len();
        let mut x: Vec<Complex64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let s: Complex64 = row.iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in 0..n {
            x[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = x[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            for (l, xj) in row.iter().zip(&mut x[fi..i]) {
                *xj -= l * xi;
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

//! Order-preserving data-parallel helpers.
//!
//! Every parallel loop in the crate goes through [`map_indexed`], which
//! collects results in index order, so the output never depends on thread
//! scheduling. Without the `parallel` feature the same calls run sequentially.

/// How element loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Parallel if the crate was built with rayon, sequential otherwise.
    pub fn available() -> Exec {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Fallible variant of [`map_indexed`]; returns the lowest-index error.
pub fn try_map_indexed<T, E, F>(exec: Exec, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(exec, n, f).into_iter().collect()
}

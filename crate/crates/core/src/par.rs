//! Data-parallel map over grid sweeps. The rayon path is compiled in behind
//! the `parallel` feature; without it every mode degrades to the sequential
//! loop. Output order always matches input order, so results are
//! deterministic regardless of thread count.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    #[default]
    Rayon,
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send, F: Fn(usize) -> T + Sync + Send>(
    n: usize,
    par: Parallelism,
    f: F,
) -> Vec<T> {
    use rayon::prelude::*;
    match par {
        Parallelism::Sequential => (0..n).map(f).collect(),
        Parallelism::Rayon => (0..n).into_par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T: Send, F: Fn(usize) -> T + Sync>(
    n: usize,
    _par: Parallelism,
    f: F,
) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Configures the global worker pool; 0 keeps the library default.
/// Without the `parallel` feature this is a no-op.
pub fn init_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        if n > 0 {
            // ignore the error when a pool already exists (tests, repeat calls)
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_indexed(100, Parallelism::Sequential, |i| i * i);
        let par = map_indexed(100, Parallelism::Rayon, |i| i * i);
        assert_eq!(seq, par);
    }
}

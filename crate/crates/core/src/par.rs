//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) batch work runs on the rayon pool;
//! without it, or with [`ExecMode::Sequential`], the same closures run in
//! order on the calling thread. Output order always matches input order, so
//! results do not depend on the mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

pub fn map_range<R, F>(mode: ExecMode, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(ExecMode::Sequential, &xs, |x| x * x + 1);
        let b = map(ExecMode::Parallel, &xs, |x| x * x + 1);
        assert_eq!(a, b);
        assert_eq!(map_range(ExecMode::Parallel, 5, |i| i * 2), vec![0, 2, 4, 6, 8]);
    }
}

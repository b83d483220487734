//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] fans
//! work out over the rayon global pool. Without it, both variants run on the
//! calling thread. Results are always returned in input order, so callers can
//! reduce them deterministically regardless of worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// True when this mode actually uses more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Order-preserving map over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Sums `f` over fixed-size chunks of `data`.
    ///
    /// Integer partial sums make the result independent of how chunks are
    /// scheduled.
    pub fn sum_chunks<T, F>(self, data: &[T], chunk: usize, f: F) -> u64
    where
        T: Sync,
        F: Fn(&[T]) -> u64 + Sync + Send,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return data.par_chunks(chunk).map(f).sum();
        }
        data.chunks(chunk).map(f).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_in_both_modes() {
        let xs: Vec<u32> = (0..1000).collect();
        let seq = Execution::Sequential.map(&xs, |x| x * 3);
        let par = Execution::Parallel.map(&xs, |x| x * 3);
        assert_eq!(seq, par);
        assert_eq!(seq[999], 2997);
    }

    #[test]
    fn chunk_sums_agree() {
        let xs: Vec<u8> = (0..=255).cycle().take(10_007).collect();
        let count = |c: &[u8]| c.iter().filter(|&&v| v > 200).count() as u64;
        assert_eq!(
            Execution::Sequential.sum_chunks(&xs, 64, count),
            Execution::Parallel.sum_chunks(&xs, 64, count)
        );
    }
}

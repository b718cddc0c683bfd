//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers dispatch to rayon;
//! without it they run the same closures in index order. Reductions never
//! depend on the schedule: per-item results are collected in index order
//! and summed sequentially by [`ordered_sum`].

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Fills `out[i] = f(i)`.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
    }
}

/// Applies `f(chunk_index, chunk)` to consecutive chunks of `out`.
pub fn for_each_chunk<T, F>(out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Running Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Neumaier-compensated sum in slice order.
pub fn ordered_sum(values: &[f64]) -> f64 {
    let mut acc = Compensated::default();
    for &v in values {
        acc.add(v);
    }
    acc.total()
}

/// Block length of [`sum_indexed`].
pub const SUM_CHUNK: usize = 4096;

/// Sums `f(i)` over `0..n` with a schedule-independent result: compensated
/// sums over consecutive blocks of [`SUM_CHUNK`] indices, then over blocks.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let blocks = map_indexed(n.div_ceil(SUM_CHUNK), |b| {
        let mut acc = Compensated::default();
        for i in b * SUM_CHUNK..((b + 1) * SUM_CHUNK).min(n) {
            acc.add(f(i));
        }
        acc.total()
    });
    ordered_sum(&blocks)
}

/// Runs `f` on a pool with `threads` workers (ignored without `parallel`).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match threads {
            Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(f),
                Err(_) => f(),
            },
            _ => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_sum_compensates() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(ordered_sum(&v), 2.0);
    }

    #[test]
    fn map_indexed_keeps_order() {
        let v = map_indexed(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn sum_is_schedule_independent() {
        let a = sum_indexed(10_000, |i| ((i as f64) * 0.37).sin());
        let b = with_threads(Some(1), || sum_indexed(10_000, |i| ((i as f64) * 0.37).sin()));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

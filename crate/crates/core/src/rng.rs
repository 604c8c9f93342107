//! Counter-addressed random streams.
//!
//! Every draw is a pure function of `(seed, stream_id, index)`: the ChaCha8 key comes
//! from the seed, the ChaCha stream from `stream_id`, and the block counter is
//! positioned at the draw index. Normal variates are obtained by inverting the
//! standard normal CDF, one uniform per variate, so a Monte Carlo run can be cut into
//! any number of index ranges and still reproduce the single-worker draws exactly.

use std::ops::Range;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngState {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Uniforms starting at draw `index` of this stream.
    pub fn uniforms_at(&self, index: u64) -> UniformStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        // one u64 = two 32-bit words
        rng.set_word_pos(2 * index as u128);
        UniformStream { rng }
    }

    /// Standard normals starting at draw `index` of this stream.
    pub fn normals_at(&self, index: u64) -> NormalStream {
        NormalStream {
            uniforms: self.uniforms_at(index),
            normal: Normal::standard(),
        }
    }
}

pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

pub struct NormalStream {
    uniforms: UniformStream,
    normal: Normal,
}

impl NormalStream {
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        self.normal.inverse_cdf(self.uniforms.next_open01())
    }
}

impl Iterator for NormalStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_normal())
    }
}

/// Runs `job(range)` over `0..n` split into `workers` contiguous ranges on scoped
/// threads and concatenates the results in index order.
pub fn run_ranges<T, F>(n: usize, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<usize>) -> Result<Vec<T>> + Sync,
{
    if workers == 0 {
        return Err(Error::Argument("workers must be at least 1".into()));
    }
    let workers = workers.min(n.max(1));
    if workers == 1 {
        return job(0..n);
    }
    let chunk = n.div_ceil(workers);
    let job = &job;
    let parts: Vec<Result<Vec<T>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let range = (w * chunk).min(n)..((w + 1) * chunk).min(n);
                scope.spawn(move || job(range))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(n);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Runs `job(i)` for every `i in 0..n`; see [`run_ranges`].
pub fn run_indexed<T, F>(n: usize, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    run_ranges(n, workers, |range| range.map(&job).collect())
}

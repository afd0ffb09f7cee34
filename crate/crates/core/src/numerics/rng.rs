//! Counter-based random streams keyed by `(master_seed, chunk_index)`.
//!
//! Every randomized routine splits its work into fixed-size chunks and gives
//! chunk `j` the stream `(seed, base + j)`. Chunks are reduced in index
//! order, so results do not depend on how many worker threads ran them.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Samples drawn per parallel work unit.
pub const CHUNK_SIZE: usize = 1 << 14;

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    chunk_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, chunk_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(chunk_index);
        RngStream {
            master_seed,
            chunk_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn chunk_index(&self) -> u64 {
        self.chunk_index
    }

    /// A stream for sub-chunk `j` of this one. The high 32 bits of the
    /// chunk index carry the caller's cell, the low 32 bits the sub-chunk.
    pub fn child(&self, j: u64) -> RngStream {
        RngStream::new(self.master_seed, self.chunk_index.wrapping_shl(32) ^ j)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Runs `work(stream, count)` over `total` items split into chunks of
/// [`CHUNK_SIZE`], each on `stream.child(j)`, and returns the per-chunk
/// results in chunk order.
pub fn par_chunks<T, F>(stream: &RngStream, total: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream, usize) -> T + Sync,
{
    let n_chunks = total.div_ceil(CHUNK_SIZE);
    (0..n_chunks)
        .into_par_iter()
        .map(|j| {
            let count = CHUNK_SIZE.min(total - j * CHUNK_SIZE);
            let mut s = stream.child(j as u64);
            work(&mut s, count)
        })
        .collect()
}

/// Running first and second moments, merged in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, other: Moments) -> Moments {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sum / self.count as f64
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

pub fn merge_moments(parts: impl IntoIterator<Item = Moments>) -> Moments {
    parts.into_iter().fold(Moments::default(), Moments::merge)
}

//! Counter-based random streams.
//!
//! Every random draw is addressed by `(seed, stream, step)`: the seed keys a
//! ChaCha8 block cipher, the stream id selects one of 2^64 independent
//! sequences and the step is the word position inside it. Replica `i` of an
//! experiment always reads stream `i`, so results do not depend on how the
//! replicas are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const INV_2_53: f64 = 1.0 / 9_007_199_254_740_992.0;

#[derive(Clone, Debug)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Positions the stream so the next `next_u64` is draw number `step`.
    pub fn at(seed: u64, stream: u64, step: u64) -> Self {
        let mut rng = Self::new(seed, stream);
        rng.inner.set_word_pos(2 * step as u128);
        rng
    }

    /// Uniform on `[0, 1)` with 53 random bits; the value is an exact
    /// multiple of 2^-53.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * INV_2_53
    }

    /// 53-bit numerator of [`uniform`](Self::uniform), for exact dyadic points.
    #[inline]
    pub fn dyadic53(&mut self) -> u64 {
        self.inner.next_u64() >> 11
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

//! Seeded, splittable random streams.
//!
//! Every stream is a ChaCha20 generator keyed by a 64-bit seed and
//! positioned on one of 2^64 independent stream indices. Two streams with
//! the same `(seed, stream)` pair produce identical sequences; streams that
//! differ in the index never overlap. Monte-Carlo batches that run in
//! parallel each take their own stream index.
//!
//! Standard normals are produced by `rand_distr::StandardNormal`
//! (ziggurat), which is fixed for a given build of this crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Name of the bit generator, recorded in run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9), seed_from_u64 + set_stream";
/// Name of the normal transform, recorded in run manifests.
pub const NORMAL_METHOD: &str = "ziggurat (rand_distr 0.5 StandardNormal)";

/// Stream index reserved for the per-run generation noise.
pub const GENERATION_STREAM: u64 = 0;
/// Stream index reserved for toy weight initialization.
pub const WEIGHTS_STREAM: u64 = 1;
/// Monte-Carlo batches use `MONTE_CARLO_STREAM_BASE + batch_index`.
pub const MONTE_CARLO_STREAM_BASE: u64 = 1 << 32;
/// Long spectral series use `SERIES_STREAM_BASE + series_index`.
pub const SERIES_STREAM_BASE: u64 = 1 << 33;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh stream on the same seed with a different index.
    pub fn split(&self, stream: u64) -> Self {
        Self::new(self.seed, stream)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.standard_normal();
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn below(&mut self, upper: u64) -> u64 {
        self.rng.random_range(0..upper)
    }
}

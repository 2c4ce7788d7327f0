//! Deterministic, named random-number streams.
//!
//! Every source of randomness in the engine is addressed by a `(seed,
//! stream_id)` pair so that trials, data generation, and meta-training are
//! reproducible run-to-run and independent of each other. Key derivation is
//! pure integer arithmetic (FNV-1a plus SplitMix64), so the same pair yields
//! the same ChaCha8 stream on every platform.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Identifier for one deterministic random stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream_id: String,
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: impl Into<String>) -> Self {
        Self {
            seed,
            stream_id: stream_id.into(),
        }
    }

    /// Child stream with a suffixed id, e.g. per step or per pair index.
    pub fn child(&self, suffix: impl std::fmt::Display) -> Self {
        Self {
            seed: self.seed,
            stream_id: format!("{}.{}", self.stream_id, suffix),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> &str {
        &self.stream_id
    }

    /// Derive the ChaCha8 generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.seed ^ fnv1a(self.stream_id.as_bytes());
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// `n` standard-normal draws.
    pub fn normals(&self, n: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// `n` uniform draws in `[lo, hi]`; a degenerate range yields `lo`.
    pub fn uniforms(&self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        let mut rng = self.rng();
        (0..n).map(|_| rng.random_range(lo..=hi)).collect()
    }
}

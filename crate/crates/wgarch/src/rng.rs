//! Deterministic per-path random number streams.
//!
//! Every simulated path owns an independent ChaCha12 substream keyed from
//! `(seed, path_index)`, so path i draws the same numbers no matter how
//! paths are batched or scheduled across threads.

use core::f64::consts::PI;
use libm::{cos, log, sin, sqrt};
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Expands `(seed, path_index)` into a 32-byte ChaCha key: the seed is
/// scrambled through one splitmix64 finalizer before the path index is
/// mixed in, so no (seed, path) pair collides along a linear relation,
/// then four finalizer outputs form the key.
pub fn substream_key(seed: u64, path_index: u64) -> [u8; 32] {
    let mut state = seed;
    let seed_mix = splitmix64(&mut state);
    let mut state = seed_mix ^ path_index.wrapping_mul(GOLDEN_GAMMA);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Constructs the substream generator for one path.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(substream_key(seed, path_index))
}

/// Standard normal draws from a path substream via Box-Muller, with the
/// paired deviate cached so each uniform pair yields two normals.
pub struct NormalSource {
    rng: ChaCha12Rng,
    cached: Option<f64>,
}

impl NormalSource {
    pub fn new(seed: u64, path_index: u64) -> Self {
        Self { rng: path_rng(seed, path_index), cached: None }
    }

    /// Uniform on (0, 1]: 53 high bits, shifted off zero so log(u) is finite.
    fn next_open_closed(&mut self) -> f64 {
        (((self.rng.next_u64() >> 11) + 1) as f64) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform on [0, 1).
    fn next_closed_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64) * (1.0 / 9_007_199_254_740_992.0)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cached.take() {
            return z;
        }
        let r = sqrt(-2.0 * log(self.next_open_closed()));
        let theta = 2.0 * PI * self.next_closed_open();
        self.cached = Some(r * sin(theta));
        r * cos(theta)
    }
}

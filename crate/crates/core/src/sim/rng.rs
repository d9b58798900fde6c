//! Deterministic RNG substreams.
//!
//! Layout: `master seed → per-path seed → named substream`. The per-path seed
//! is a SplitMix64 mix of `(master, path index)`; each named substream is a
//! separate ChaCha stream under that seed. Two paths, or two substreams of
//! one path, never share state, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named substreams of a single path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Substream {
    W0 = 0,
    W1 = 1,
    W2 = 2,
    W3 = 3,
    Drift = 4,
    /// Randomness consumed by decision rules and diagnostics, never by
    /// the price dynamics.
    Aux = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn path_seed(master: u64, path: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(path.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn substream(master: u64, path: u64, stream: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(path_seed(master, path));
    rng.set_stream(stream as u64);
    rng
}

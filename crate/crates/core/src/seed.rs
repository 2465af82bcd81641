//! Deterministic seed derivation for every random stream in a run.
//!
//! A stream is named by the run seed plus a short tuple of integers (stream
//! tag, iteration, task index, ...). Each value is folded in with SplitMix64
//! so that neighbouring tuples give unrelated generators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_TASKS: u64 = 1;
pub const STREAM_ROLLOUTS: u64 = 2;
pub const STREAM_EVAL: u64 = 3;
pub const STREAM_MINIBATCH: u64 = 4;
pub const STREAM_DEMOS: u64 = 5;
pub const STREAM_INIT: u64 = 6;
pub const STREAM_ASSESS: u64 = 7;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, parts))
}

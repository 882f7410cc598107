//! Seed derivation for reproducible, schedule-independent randomness.
//!
//! Every parallel task derives its own stream from (master seed, task index)
//! before dispatch, so results are identical under any thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

/// SplitMix64 finalizer; decorrelates seeds derived from structured inputs.
#[inline]
pub fn mix_seed(master: u64, salt: u64) -> u64 {
    let mut z = master ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic generator for a (master seed, stream) pair.
pub fn stream_rng(master: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(master, salt))
}

/// Standard normal draw, always generated at f64 so the stream is identical
/// across scalar types.
#[inline]
pub fn draw_standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    let v: f64 = StandardNormal.sample(rng);
    T::from_f64_lossy(v)
}

/// Uniform draw on [0, hi).
#[inline]
pub fn draw_uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, hi: f64) -> T {
    let v: f64 = rng.random::<f64>() * hi;
    T::from_f64_lossy(v)
}

//! Seed derivation and the frozen normal transform used for all simulated
//! quantities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of bootstrap replicate `b`.
pub fn replicate_seed(seed: u64, b: u64) -> u64 {
    seed ^ splitmix64(b)
}

/// Streams that must never share seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Field = 1,
    Bootstrap = 2,
    Trace = 3,
}

/// Child seed for index `j` of `stream`. Nonlinear in both arguments so that
/// `(seed, j)` and `(seed', j')` do not collide when `seed ^ j == seed' ^ j'`.
pub fn derive_seed(seed: u64, stream: Stream, j: u64) -> u64 {
    let tag = splitmix64(stream as u64);
    splitmix64(seed.wrapping_add(splitmix64(j ^ tag)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal pair by Box–Muller on `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)`.
pub fn normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    (r * t.cos(), r * t.sin())
}

/// `n` standard normal variates; pairs are consumed in order and an odd
/// trailing variate discards its partner.
pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let (a, b) = normal_pair(rng);
        out.push(a);
        out.push(b);
    }
    out.truncate(n);
    out
}

//! Counter-based randomness.
//!
//! Every random quantity in the crate is a pure function of a 64-bit key and
//! a small tuple of counters (replica, site, ring index, ...). This makes
//! results independent of worker count and scheduling, and lets two
//! simulations share the exact same underlying uniforms where a coupling
//! requires it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replica `index` derived from a base seed.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(GOLDEN)))
}

/// Hash of a key and up to four counters.
#[inline]
pub fn hash4(key: u64, a: u64, b: u64, c: u64, d: u64) -> u64 {
    let mut h = mix64(key.wrapping_add(GOLDEN));
    h = mix64(h ^ a.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    h = mix64(h ^ b.wrapping_mul(0xA076_1D64_78BD_642F));
    h = mix64(h ^ c.wrapping_mul(0xE703_7ED1_A0B4_28DB));
    mix64(h ^ d.wrapping_mul(0x8EBC_6AF0_9C88_C6E3))
}

/// Uniform in the open interval (0, 1), 52 bits.
#[inline]
pub fn unit_open(h: u64) -> f64 {
    ((h >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Exp(1) variate.
#[inline]
pub fn exp1(h: u64) -> f64 {
    -unit_open(h).ln()
}

/// Standard normal variate via Box-Muller on two hashed uniforms.
#[inline]
pub fn std_normal(h: u64) -> f64 {
    let u1 = unit_open(h);
    let u2 = unit_open(mix64(h ^ GOLDEN));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Fair coin from a hash.
#[inline]
pub fn coin(h: u64) -> bool {
    h >> 63 == 1
}

/// Sequential stream for one replica; used where a long run of draws is
/// consumed in order (dense Gaussian vectors, bootstrap resampling).
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Fair coin attached to lattice point `(i, j)`: the SplitMix64 output at
/// the counter obtained by packing both coordinates. Cheaper than
/// [`hash4`]; used for site colors, which the arm tracer evaluates lazily.
#[inline]
pub fn lattice_bit(key: u64, i: i32, j: i32) -> bool {
    let packed = (i as u32 as u64) | ((j as u32 as u64) << 32);
    coin(mix64(key.wrapping_add(packed.wrapping_add(1).wrapping_mul(GOLDEN))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniforms_stay_in_open_interval() {
        assert!(unit_open(0) > 0.0);
        assert!(unit_open(u64::MAX) < 1.0);
    }

    #[test]
    fn coin_is_balanced() {
        let n = 200_000u64;
        let heads = (0..n).filter(|&k| coin(hash4(7, k, 0, 0, 0))).count() as f64;
        let se = (n as f64 * 0.25).sqrt();
        assert!((heads - n as f64 / 2.0).abs() < 4.0 * se);
    }

    #[test]
    fn normal_moments() {
        let n = 200_000u64;
        let xs: Vec<f64> = (0..n).map(|k| std_normal(hash4(3, k, 1, 2, 3))).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..1000).map(|k| derive_seed(42, k)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
    }
}

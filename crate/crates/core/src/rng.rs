//! Seed derivation.
//!
//! A single master seed is split into independent named streams so that
//! toggling one random component (say array perturbations) never shifts the
//! draws of another (waveforms, noise, jitter).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const STREAM_SOI: &str = "soi-waveform";
pub const STREAM_INTERFERERS: &str = "interferer-waveforms";
pub const STREAM_NOISE: &str = "noise";
pub const STREAM_ARRAY: &str = "array-perturbation";
pub const STREAM_JITTER: &str = "doa-jitter";
pub const STREAM_SCATTER: &str = "local-scattering";

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn derive_seed(master: u64, tag: &str) -> u64 {
    mix64(mix64(master) ^ fnv1a(tag))
}

/// Per-trial seed for Monte Carlo runs.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    mix64(mix64(master).wrapping_add(mix64(trial ^ 0x5851_F42D_4C95_7F2D)))
}

pub fn stream(master: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag))
}

/// Circular complex Gaussian with `E|z|² = variance`.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

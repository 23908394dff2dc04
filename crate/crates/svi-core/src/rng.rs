//! Deterministic, splittable random streams.
//!
//! Every stream is identified by a root seed plus a path of split labels.
//! The generator state is ChaCha8 (a counter-based stream cipher PRNG, so
//! the raw word sequence is bit-identical across platforms), keyed by a
//! SplitMix64 absorption of `(root seed, label path)`. Splitting derives
//! the child key from the path alone; it neither reads nor advances the
//! parent's position, so two streams split under different labels are
//! independent regardless of the order in which they are consumed.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Absorb one 64-bit word into the sponge state.
fn absorb(state: u64, word: u64) -> u64 {
    mix64(state ^ word).wrapping_add(GOLDEN)
}

/// Derive the 256-bit ChaCha key for `(root, path)`. Labels are absorbed
/// with a length prefix so distinct paths never alias (e.g. ["a/b"] vs
/// ["a", "b"]).
fn derive_key(root: u64, path: &[String]) -> [u8; 32] {
    let mut state = absorb(GOLDEN, root);
    for label in path {
        let bytes = label.as_bytes();
        state = absorb(state, bytes.len() as u64);
        for chunk in bytes.chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            state = absorb(state, u64::from_le_bytes(word));
        }
    }
    let mut key = [0u8; 32];
    for i in 0..4 {
        let h = mix64(state.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN)));
        key[i * 8..(i + 1) * 8].copy_from_slice(&h.to_le_bytes());
    }
    key
}

/// A deterministic stream of pseudo-random draws addressed by
/// `(root seed, label path)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    root_seed: u64,
    path: Vec<String>,
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Root stream for a base seed. The same seed always yields the same
    /// stream; any `u64` (including 0) is legal.
    pub fn new_root(seed: u64) -> Self {
        Self {
            root_seed: seed,
            path: Vec::new(),
            rng: ChaCha8Rng::from_seed(derive_key(seed, &[])),
        }
    }

    /// Child stream under `label`. Children with distinct labels are
    /// independent; re-splitting with the same label reproduces the same
    /// child from the start. The parent is not advanced.
    pub fn split(&self, label: &str) -> Result<RngStream> {
        if label.is_empty() {
            return Err(Error::InvalidLabel);
        }
        let mut path = self.path.clone();
        path.push(label.to_string());
        let rng = ChaCha8Rng::from_seed(derive_key(self.root_seed, &path));
        Ok(RngStream { root_seed: self.root_seed, path, rng })
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    /// Label path from the root, joined with '/'.
    pub fn label_path(&self) -> String {
        self.path.join("/")
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in the open interval (0, 1).
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        // 53 significant bits, offset by half an ulp: never 0.0 or 1.0.
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in the open interval (lo, hi).
    pub fn draw_uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidRange(format!("uniform bounds ({lo}, {hi})")));
        }
        Ok(lo + (hi - lo) * self.uniform01())
    }

    /// Normal draw with the given mean and standard deviation (Box-Muller).
    pub fn draw_normal(&mut self, mean: f64, sd: f64) -> Result<f64> {
        if sd < 0.0 || !sd.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidRange(format!("normal parameters ({mean}, {sd})")));
        }
        let u1 = self.uniform01();
        let u2 = self.uniform01();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        Ok(mean + sd * z)
    }

    /// Convenience: a vector of i.i.d. uniform draws.
    pub fn uniform_vec(&mut self, n: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
        (0..n).map(|_| self.draw_uniform(lo, hi)).collect()
    }

    /// Convenience: a vector of i.i.d. standard-normal-family draws.
    pub fn normal_vec(&mut self, n: usize, mean: f64, sd: f64) -> Result<Vec<f64>> {
        (0..n).map(|_| self.draw_normal(mean, sd)).collect()
    }
}

//! Masks and input sequences for the time-multiplexed drive.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::timing::TimingConfig;

/// Uniform in [0, 1) from the top 53 bits of the stream, so the mapping does
/// not depend on any distribution implementation outside this crate.
fn unit_uniform(rng: &mut ChaCha12Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Piecewise-constant input weights, one per virtual node.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    weights: Vec<f64>,
    seed: u64,
}

impl Mask {
    /// Draw `n_v` i.i.d. uniform [0, 1] weights; deterministic for a fixed seed.
    pub fn generate(n_v: usize, seed: u64) -> Self {
        assert!(n_v >= 1, "mask needs at least one weight");
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let weights = (0..n_v).map(|_| unit_uniform(&mut rng)).collect();
        Mask { weights, seed }
    }

    pub fn from_weights(weights: Vec<f64>) -> Self {
        assert!(!weights.is_empty());
        Mask { weights, seed: 0 }
    }

    /// Cyclic rotation by `shift` positions: weight `j` of the result is
    /// weight `(j + shift) mod n_v` of the original.
    pub fn rotated(&self, shift: usize) -> Self {
        let n = self.weights.len();
        let weights = (0..n).map(|j| self.weights[(j + shift) % n]).collect();
        Mask { weights, seed: self.seed }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// A stream of i.i.d. uniform [-1, 1] samples, split into `prehistory` values
/// (logical indices -prehistory..0, consumed during the buffer phase and by
/// recall targets) and `k_train` training values (indices 0..k_train).
#[derive(Debug, Clone, PartialEq)]
pub struct InputSequence {
    values: Vec<f64>,
    prehistory: usize,
    seed: u64,
}

impl InputSequence {
    /// `k` training samples with no prehistory.
    pub fn generate(k: usize, seed: u64) -> Self {
        Self::generate_with_prehistory(k, 0, seed)
    }

    /// `k` training samples preceded by `prehistory` buffer samples drawn from
    /// the same stream.
    pub fn generate_with_prehistory(k: usize, prehistory: usize, seed: u64) -> Self {
        assert!(k >= 1, "need at least one training input");
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let values = (0..prehistory + k)
            .map(|_| 2.0 * unit_uniform(&mut rng) - 1.0)
            .collect();
        InputSequence { values, prehistory, seed }
    }

    /// Sample at logical cycle index `k` (negative indices address prehistory).
    pub fn get(&self, k: i64) -> Result<f64> {
        let idx = k + self.prehistory as i64;
        if idx < 0 || idx as usize >= self.values.len() {
            return Err(Error::InputExhausted(k));
        }
        Ok(self.values[idx as usize])
    }

    pub fn k_train(&self) -> usize {
        self.values.len() - self.prehistory
    }

    pub fn prehistory(&self) -> usize {
        self.prehistory
    }

    /// Training samples u_0..u_{K-1}.
    pub fn training(&self) -> &[f64] {
        &self.values[self.prehistory..]
    }

    /// The raw stream including prehistory.
    pub fn raw(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// The masked, time-multiplexed signal at time `t`:
/// eta * u_{floor(t/T)} * w_{floor((t mod T)/theta)}.
///
/// `t` counts from the start of the stored stream (prehistory included).
pub fn input_signal(
    inputs: &InputSequence,
    mask: &Mask,
    timing: &TimingConfig,
    eta: f64,
    t: f64,
) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InputExhausted(-1));
    }
    let cycle = (t / timing.t()).floor() as i64 - inputs.prehistory() as i64;
    let u = inputs.get(cycle)?;
    let phase = t - (t / timing.t()).floor() * timing.t();
    let node = ((phase / timing.theta()).floor() as usize).min(mask.len() - 1);
    Ok(eta * u * mask.weights()[node])
}

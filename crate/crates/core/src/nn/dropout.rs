use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` during training,
/// inference is the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Per-element multipliers: 0 for dropped elements, `1 / (1 - rate)` otherwise.
    pub fn mask<R: Rng>(&self, len: usize, rng: &mut R) -> Vec<f64> {
        let keep = 1.0 / (1.0 - self.rate);
        (0..len)
            .map(|_| if rng.gen::<f64>() < self.rate { 0.0 } else { keep })
            .collect()
    }

    /// Applies a fresh mask; returns the output and the mask used.
    pub fn apply<R: Rng>(&self, v: &[f64], rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mask = self.mask(v.len(), rng);
        let out = v.iter().zip(&mask).map(|(x, m)| x * m).collect();
        (out, mask)
    }
}

/// Seeded one-shot dropout of a single vector.
pub fn dropout(v: &[f64], rate: f64, seed: u64, training: bool) -> Result<Vec<f64>> {
    let d = Dropout::new(rate)?;
    if !training || rate == 0.0 {
        return Ok(v.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(d.apply(v, &mut rng).0)
}

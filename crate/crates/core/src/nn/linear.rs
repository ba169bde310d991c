use rand::Rng;

use super::param::{ParamTensor, Params};
use super::INIT_RANGE;
use crate::error::{Error, Result};

/// Affine map `y = W x + b` with `W` stored as `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl Linear {
    /// Weights uniform in the shared init range, bias zero.
    pub fn new<R: Rng>(prefix: &str, input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        Self {
            weight: ParamTensor::uniform(
                format!("{prefix}.weight"),
                &[output_dim, input_dim],
                INIT_RANGE,
                rng,
            ),
            bias: ParamTensor::zeros(format!("{prefix}.bias"), &[output_dim]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn zero_weights(&mut self) {
        self.weight.values.fill(0.0);
        self.bias.values.fill(0.0);
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Config(format!(
                "{}: expected input of {} elements, got {}",
                self.weight.name(),
                self.input_dim(),
                x.len()
            )));
        }
        Ok(self.apply(x))
    }

    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n_in = self.input_dim();
        self.weight
            .values
            .chunks_exact(n_in)
            .zip(&self.bias.values)
            .map(|(row, b)| b + dot(row, x))
            .collect()
    }

    /// Accumulates parameter gradients for `dy` at input `x` and, when `dx` is
    /// given, adds the input gradient into it.
    pub fn backward(&mut self, x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
        let n_in = self.input_dim();
        for ((grow, db), &g) in self
            .weight
            .grad
            .chunks_exact_mut(n_in)
            .zip(self.bias.grad.iter_mut())
            .zip(dy)
        {
            if g == 0.0 {
                continue;
            }
            *db += g;
            axpy(g, x, grow);
        }
        if let Some(dx) = dx {
            for (row, &g) in self.weight.values.chunks_exact(n_in).zip(dy) {
                if g != 0.0 {
                    axpy(g, row, dx);
                }
            }
        }
    }
}

impl Params for Linear {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

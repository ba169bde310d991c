//! Task-specific scalar mix of the language model layers:
//! `gamma * (s0 * x + s1 * h1 + s2 * h2)` with `s = softmax(w)`.

use crate::bilm::LayerActivations;
use crate::container::ModelContainer;
use crate::error::{Error, Result};
use crate::nn::{axpy, dot, softmax, ParamTensor, Params};

pub const NUM_MIXED_LAYERS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ElmoMixer {
    /// Raw (pre-softmax) layer weights `elmo.w0..w2`.
    pub weights: [ParamTensor; NUM_MIXED_LAYERS],
    pub gamma: ParamTensor,
}

impl Default for ElmoMixer {
    fn default() -> Self {
        Self::new()
    }
}

impl ElmoMixer {
    /// Equal layer weights and unit scale.
    pub fn new() -> Self {
        Self {
            weights: [0, 1, 2].map(|i| ParamTensor::zeros(format!("elmo.w{i}"), &[1])),
            gamma: ParamTensor::filled("elmo.gamma", &[1], 1.0),
        }
    }

    pub fn with_values(raw: [f64; NUM_MIXED_LAYERS], gamma: f64) -> Self {
        let mut m = Self::new();
        for (p, w) in m.weights.iter_mut().zip(raw) {
            p.values[0] = w;
        }
        m.gamma.values[0] = gamma;
        m
    }

    pub fn raw_weights(&self) -> [f64; NUM_MIXED_LAYERS] {
        [0, 1, 2].map(|i| self.weights[i].values[0])
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.values[0]
    }

    pub fn normalized_weights(&self) -> [f64; NUM_MIXED_LAYERS] {
        let s = softmax(&self.raw_weights());
        [s[0], s[1], s[2]]
    }

    pub fn mix(&self, acts: &LayerActivations) -> Result<Vec<Vec<f64>>> {
        let dim = check_layers(acts)?;
        let s = self.normalized_weights();
        let gamma = self.gamma();
        let coef = s.map(|si| gamma * si);
        Ok((0..acts.len())
            .map(|k| {
                let mut out = vec![0.0; dim];
                for (layer, &c) in acts.layers().iter().zip(&coef) {
                    axpy(c, &layer[k], &mut out);
                }
                out
            })
            .collect())
    }

    /// Accumulates gradients of `w` and `gamma` given `d_out`, the loss
    /// gradient with respect to each mixed vector.
    pub fn backward(&mut self, acts: &LayerActivations, d_out: &[Vec<f64>]) {
        let s = self.normalized_weights();
        let gamma = self.gamma();
        // <d_out, layer_i> summed over positions
        let proj: [f64; NUM_MIXED_LAYERS] = acts
            .layers()
            .map(|layer| layer.iter().zip(d_out).map(|(v, d)| dot(v, d)).sum());
        let d_gamma: f64 = s.iter().zip(&proj).map(|(si, pi)| si * pi).sum();
        let ds = proj.map(|p| gamma * p);
        let mean: f64 = s.iter().zip(&ds).map(|(si, di)| si * di).sum();
        for (i, w) in self.weights.iter_mut().enumerate() {
            w.grad[0] += s[i] * (ds[i] - mean);
        }
        self.gamma.grad[0] += d_gamma;
    }

    pub fn write_to(&self, c: &mut ModelContainer) {
        c.push_params(self.params());
    }

    pub fn read_from(c: &ModelContainer) -> Result<Self> {
        let mut m = Self::new();
        c.load_params(m.params_mut())?;
        Ok(m)
    }
}

fn check_layers(acts: &LayerActivations) -> Result<usize> {
    let n = acts.len();
    let dim = acts.dim();
    let ok = acts
        .layers()
        .iter()
        .all(|layer| layer.len() == n && layer.iter().all(|v| v.len() == dim));
    if !ok {
        return Err(Error::Config("mixed layers must share length and dimension".into()));
    }
    Ok(dim)
}

impl Params for ElmoMixer {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p: Vec<&ParamTensor> = self.weights.iter().collect();
        p.push(&self.gamma);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p: Vec<&mut ParamTensor> = self.weights.iter_mut().collect();
        p.push(&mut self.gamma);
        p
    }
}

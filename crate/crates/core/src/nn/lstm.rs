use rand::Rng;

use super::linear::{axpy, dot};
use super::param::{ParamTensor, Params};
use super::{sigmoid, INIT_RANGE};
use crate::error::{Error, Result};

/// Initial value of the forget-gate bias.
pub const FORGET_BIAS_INIT: f64 = 1.0;

/// A single LSTM cell.
///
/// The four gates share one weight tensor of shape `[4 * hidden, input + hidden]`
/// and one bias of shape `[4 * hidden]`. Row blocks are ordered input, forget,
/// candidate, output; each block maps the concatenation `[x; h_prev]` to the
/// hidden width.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
    input_dim: usize,
    hidden_dim: usize,
}

/// Everything the backward pass needs from one forward step.
#[derive(Clone, Debug)]
pub struct StepCache {
    input: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Gate activations laid out like the weight row blocks: `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// Forward trace of a cell run over a sequence from the zero state.
#[derive(Clone, Debug, Default)]
pub struct LstmTrace {
    pub steps: Vec<StepCache>,
}

impl LstmTrace {
    pub fn outputs(&self) -> impl Iterator<Item = &[f64]> {
        self.steps.iter().map(|s| s.h.as_slice())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl LstmCell {
    pub fn new<R: Rng>(prefix: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let weight = ParamTensor::uniform(
            format!("{prefix}.weight"),
            &[4 * hidden_dim, input_dim + hidden_dim],
            INIT_RANGE,
            rng,
        );
        let mut bias = ParamTensor::zeros(format!("{prefix}.bias"), &[4 * hidden_dim]);
        bias.values[hidden_dim..2 * hidden_dim].fill(FORGET_BIAS_INIT);
        Self {
            weight,
            bias,
            input_dim,
            hidden_dim,
        }
    }

    /// Builds a cell from explicit tensors, checking their shapes.
    pub fn from_tensors(weight: ParamTensor, bias: ParamTensor) -> Result<Self> {
        let (rows, cols) = match weight.shape() {
            [r, c] => (*r, *c),
            s => return Err(Error::Config(format!("LSTM weight must be 2-D, got {s:?}"))),
        };
        if rows % 4 != 0 || cols <= rows / 4 || bias.shape() != [rows] {
            return Err(Error::Config(format!(
                "inconsistent LSTM shapes: weight {:?}, bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        let hidden_dim = rows / 4;
        Ok(Self {
            weight,
            bias,
            input_dim: cols - hidden_dim,
            hidden_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    fn check_dims(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<()> {
        if x.len() != self.input_dim || h.len() != self.hidden_dim || c.len() != self.hidden_dim {
            return Err(Error::Config(format!(
                "{}: expected x/h/c of {}/{}/{} elements, got {}/{}/{}",
                self.weight.name(),
                self.input_dim,
                self.hidden_dim,
                self.hidden_dim,
                x.len(),
                h.len(),
                c.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn step_cached(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let hd = self.hidden_dim;
        let cols = self.input_dim + hd;
        let mut gates = self.bias.values.clone();
        for (z, row) in gates.iter_mut().zip(self.weight.values.chunks_exact(cols)) {
            *z += dot(&row[..self.input_dim], x) + dot(&row[self.input_dim..], h_prev);
        }
        for (k, z) in gates.iter_mut().enumerate() {
            *z = if (2 * hd..3 * hd).contains(&k) {
                z.tanh()
            } else {
                sigmoid(*z)
            };
        }
        let mut c = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        for j in 0..hd {
            let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            c[j] = f * c_prev[j] + i * g;
            tanh_c[j] = c[j].tanh();
            h[j] = o * tanh_c[j];
        }
        StepCache {
            input: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            tanh_c,
            h,
            c,
        }
    }

    /// Runs the cell over `xs` in the given order, starting from zero state.
    pub fn run(&self, xs: &[Vec<f64>]) -> Result<LstmTrace> {
        let hd = self.hidden_dim;
        let mut steps: Vec<StepCache> = Vec::with_capacity(xs.len());
        let zeros = vec![0.0; hd];
        for x in xs {
            if x.len() != self.input_dim {
                return Err(Error::Config(format!(
                    "{}: expected input of {} elements, got {}",
                    self.weight.name(),
                    self.input_dim,
                    x.len()
                )));
            }
            let step = match steps.last() {
                Some(prev) => self.step_cached(x, &prev.h, &prev.c),
                None => self.step_cached(x, &zeros, &zeros),
            };
            steps.push(step);
        }
        Ok(LstmTrace { steps })
    }

    /// Backpropagation through time.
    ///
    /// `dh_out[t]` is the loss gradient with respect to the output at step `t`
    /// of `trace`. Parameter gradients are accumulated; the returned vectors are
    /// the gradients with respect to each step's input.
    pub fn backward(&mut self, trace: &LstmTrace, dh_out: &[Vec<f64>]) -> Vec<Vec<f64>> {
        debug_assert_eq!(trace.len(), dh_out.len());
        let hd = self.hidden_dim;
        let n_in = self.input_dim;
        let cols = n_in + hd;
        let mut dxs = vec![Vec::new(); trace.len()];
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut dz = vec![0.0; 4 * hd];
        for t in (0..trace.len()).rev() {
            let s = &trace.steps[t];
            for j in 0..hd {
                let (i, f, g, o) = (s.gates[j], s.gates[hd + j], s.gates[2 * hd + j], s.gates[3 * hd + j]);
                let dh = dh_out[t][j] + dh_next[j];
                let dc = dc_next[j] + dh * o * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
                dz[j] = dc * g * i * (1.0 - i);
                dz[hd + j] = dc * s.c_prev[j] * f * (1.0 - f);
                dz[2 * hd + j] = dc * i * (1.0 - g * g);
                dz[3 * hd + j] = dh * s.tanh_c[j] * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            let mut dx = vec![0.0; n_in];
            dh_next.fill(0.0);
            for (r, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                self.bias.grad[r] += g;
                let grow = &mut self.weight.grad[r * cols..(r + 1) * cols];
                axpy(g, &s.input, &mut grow[..n_in]);
                axpy(g, &s.h_prev, &mut grow[n_in..]);
                let wrow = &self.weight.values[r * cols..(r + 1) * cols];
                axpy(g, &wrow[..n_in], &mut dx);
                axpy(g, &wrow[n_in..], &mut dh_next);
            }
            dxs[t] = dx;
        }
        dxs
    }
}

impl Params for LstmCell {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// One LSTM step: returns the new hidden and cell state.
pub fn lstm_step(
    cell: &LstmCell,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    cell.check_dims(x, h_prev, c_prev)?;
    if !x.iter().chain(h_prev).chain(c_prev).all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite input to lstm_step".into()));
    }
    let s = cell.step_cached(x, h_prev, c_prev);
    Ok((s.h, s.c))
}

/// A forward and a backward cell over the same sequence. The output at each
/// position is `[forward_h; backward_h]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

#[derive(Clone, Debug, Default)]
pub struct BiLstmTrace {
    pub forward: LstmTrace,
    /// Trace over the reversed sequence.
    pub backward: LstmTrace,
}

impl BiLstm {
    pub fn new<R: Rng>(prefix: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        Self {
            forward: LstmCell::new(&format!("{prefix}.fwd"), input_dim, hidden_dim, rng),
            backward: LstmCell::new(&format!("{prefix}.bwd"), input_dim, hidden_dim, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden_dim() + self.backward.hidden_dim()
    }

    pub fn run(&self, xs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, BiLstmTrace)> {
        let fwd = self.forward.run(xs)?;
        let reversed: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let bwd = self.backward.run(&reversed)?;
        let n = xs.len();
        let outputs = (0..n)
            .map(|k| {
                let mut v = fwd.steps[k].h.clone();
                v.extend_from_slice(&bwd.steps[n - 1 - k].h);
                v
            })
            .collect();
        Ok((
            outputs,
            BiLstmTrace {
                forward: fwd,
                backward: bwd,
            },
        ))
    }

    pub fn backward(&mut self, trace: &BiLstmTrace, d_out: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = d_out.len();
        let hf = self.forward.hidden_dim();
        let d_fwd: Vec<Vec<f64>> = d_out.iter().map(|d| d[..hf].to_vec()).collect();
        let d_bwd: Vec<Vec<f64>> = d_out.iter().rev().map(|d| d[hf..].to_vec()).collect();
        let mut dx = self.forward.backward(&trace.forward, &d_fwd);
        let dx_rev = self.backward.backward(&trace.backward, &d_bwd);
        for (k, d) in dx.iter_mut().enumerate() {
            axpy(1.0, &dx_rev[n - 1 - k], d);
        }
        dx
    }
}

impl Params for BiLstm {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p = self.forward.params();
        p.extend(self.backward.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.forward.params_mut();
        p.extend(self.backward.params_mut());
        p
    }
}

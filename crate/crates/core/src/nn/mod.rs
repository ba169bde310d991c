//! Numeric building blocks shared by every network in the crate: trainable
//! tensors, LSTM cells with hand-derived backward passes, affine layers,
//! softmax cross-entropy, inverted dropout and Adam.

mod adam;
mod dropout;
mod linear;
mod loss;
mod lstm;
mod param;

pub use adam::{clip_grad_norm, Adam, AdamConfig};
pub use dropout::{dropout, Dropout};
pub use linear::Linear;
pub(crate) use linear::{axpy, dot};
pub use loss::{log_softmax, softmax, softmax_xent};
pub use lstm::{lstm_step, BiLstm, BiLstmTrace, LstmCell, LstmTrace, StepCache, FORGET_BIAS_INIT};
pub use param::{ParamTensor, Params};

/// Half-width of the uniform range used for every randomly initialized weight.
pub const INIT_RANGE: f64 = 0.1;

/// Global gradient-norm ceiling applied before each optimizer step.
pub const CLIP_NORM: f64 = 5.0;

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Clips the gradients of `params` to [`CLIP_NORM`] and takes one Adam step.
pub fn clipped_step<P: Params + ?Sized>(model: &mut P, adam: &mut Adam) -> crate::Result<()> {
    let mut params = model.params_mut();
    clip_grad_norm(&mut params, CLIP_NORM);
    adam.step(&mut params)
}

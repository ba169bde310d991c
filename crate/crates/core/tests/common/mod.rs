#![allow(dead_code)]

use charseg::nn::Params;

pub const FD_STEP: f64 = 1e-4;
pub const MAX_REL_ERR: f64 = 1e-3;

/// Relative error with a small absolute floor so that two near-zero
/// gradients compare as equal.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

#[derive(Debug)]
pub struct GradReport {
    pub checked: usize,
    pub worst: f64,
    pub worst_at: String,
}

/// Compares accumulated analytic gradients against central differences for
/// every parameter element.
pub fn check_params<M: Params>(
    model: &mut M,
    loss: impl Fn(&M) -> f64,
    mut loss_and_grad: impl FnMut(&mut M) -> f64,
) -> GradReport {
    model.zero_grad();
    loss_and_grad(model);
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.clone()).collect();
    let names: Vec<String> = model.params().iter().map(|p| p.name().to_string()).collect();
    let mut report = GradReport {
        checked: 0,
        worst: 0.0,
        worst_at: String::new(),
    };
    for (pi, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let orig = model.params_mut()[pi].values[i];
            model.params_mut()[pi].values[i] = orig + FD_STEP;
            let up = loss(model);
            model.params_mut()[pi].values[i] = orig - FD_STEP;
            let down = loss(model);
            model.params_mut()[pi].values[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let e = rel_err(a, numeric);
            report.checked += 1;
            if e > report.worst {
                report.worst = e;
                report.worst_at = format!("{}[{i}]: analytic {a:e}, numeric {numeric:e}", names[pi]);
            }
        }
    }
    report
}

/// Central differences of `f` with respect to each element of `x`.
pub fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub mod cases;

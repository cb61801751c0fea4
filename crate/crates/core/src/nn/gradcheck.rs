//! Central finite-difference gradient checks.

use rand::Rng;

use crate::error::Result;

use super::model::Model;

/// Analytic-vs-numeric comparison over a sample of parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// max over checked entries of `|a − n| / max(|a|, |n|, floor)`.
    pub max_relative_error: f64,
    /// `‖a − n‖ / (‖a‖ + ‖n‖)` over the checked entries.
    pub aggregate_relative_error: f64,
    pub checked: usize,
}

/// Gradients smaller than this are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub fn compare(analytic: &[f64], numeric: &[f64]) -> GradCheck {
    let mut max_rel: f64 = 0.0;
    let (mut diff2, mut a2, mut n2) = (0.0, 0.0, 0.0);
    for (&a, &n) in analytic.iter().zip(numeric) {
        let denom = a.abs().max(n.abs()).max(RELATIVE_FLOOR);
        max_rel = max_rel.max((a - n).abs() / denom);
        diff2 += (a - n).powi(2);
        a2 += a * a;
        n2 += n * n;
    }
    let denom = a2.sqrt() + n2.sqrt();
    GradCheck {
        max_relative_error: max_rel,
        aggregate_relative_error: if denom > 0.0 { diff2.sqrt() / denom } else { 0.0 },
        checked: analytic.len(),
    }
}

/// `(f(x + ε) − f(x − ε)) / 2ε` for coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, eps: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[i] += eps;
    let mut xm = x.to_vec();
    xm[i] -= eps;
    (f(&xp) - f(&xm)) / (2.0 * eps)
}

/// Checks the model's loss gradient on `n_samples` randomly chosen parameters.
pub fn check_model<M: Model + Clone>(
    model: &M,
    inputs: &[M::Input],
    labels: &[usize],
    eps: f64,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<GradCheck> {
    let all: Vec<usize> = (0..model.params().len()).collect();
    check_model_tensors(model, inputs, labels, eps, n_samples, &all, rng)
}

/// Like [`check_model`], sampling only from the listed parameter tensors
/// (indices into `Model::params`).
pub fn check_model_tensors<M: Model + Clone>(
    model: &M,
    inputs: &[M::Input],
    labels: &[usize],
    eps: f64,
    n_samples: usize,
    tensors: &[usize],
    rng: &mut impl Rng,
) -> Result<GradCheck> {
    let refs: Vec<&M::Input> = inputs.iter().collect();
    let (_, grads) = model.loss_and_grad(&refs, labels)?;
    if let Some(&t) = tensors.iter().find(|&&t| t >= grads.len()) {
        return Err(crate::error::Error::Shape(format!("model has no parameter tensor {t}")));
    }
    let sizes: Vec<usize> = tensors.iter().map(|&t| grads[t].len()).collect();
    let total: usize = sizes.iter().sum();
    let mut analytic = Vec::with_capacity(n_samples);
    let mut numeric = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut flat = rng.random_range(0..total);
        let mut slot = 0;
        while flat >= sizes[slot] {
            flat -= sizes[slot];
            slot += 1;
        }
        let tensor = tensors[slot];
        let loss_at = |delta: f64| -> Result<f64> {
            let mut m = model.clone();
            m.params_mut()[tensor][flat] += delta;
            Ok(m.loss_and_grad(&refs, labels)?.0)
        };
        let n = (loss_at(eps)? - loss_at(-eps)?) / (2.0 * eps);
        analytic.push(grads[tensor][flat]);
        numeric.push(n);
    }
    Ok(compare(&analytic, &numeric))
}

//! From-scratch differentiable kernels: a three-layer fully connected
//! classifier, the adaptive frequency filter, a single-block self-attention
//! encoder, Adam, the training loop, metrics and AFF importance curves.
//! Everything runs in `f64`.

mod aff;
mod dense;
mod encoder;
pub mod gradcheck;
mod importance;
mod metrics;
mod model;
mod optim;
mod serialize;
mod train;

pub use aff::{
    aff_apply, aff_backward, aff_init_mfcc, aff_trim, trim_in_place, AffMatrix, DEFAULT_TRIM_HALFWIDTH,
    DEFAULT_TRIM_PERIOD,
};
pub use dense::{Dense, DenseCache, DenseNet3, DEFAULT_HIDDEN};
pub use encoder::{AttentionBlock, EncoderCache, EncoderKind, SeqEncoder};
pub use importance::{aggregate_curves, band_mass, importance_curve, ImportanceAggregate};
pub use metrics::{decide, evaluate, Metrics};
pub use model::{AffModel, Model};
pub use optim::Adam;
pub use serialize::{load_model, model_from_json, model_to_json, save_model, ModelFile, ModelType, MODEL_SCHEMA_VERSION};
pub use train::{train, TrainConfig, TrainReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Index of the first maximum (ties resolve to the lowest index).
pub fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// `dA ⊙ act'(Z)`.
    pub fn backprop(self, pre: &Matrix, upstream: &Matrix) -> Matrix {
        let mut out = upstream.clone();
        for (g, &z) in out.as_mut_slice().iter_mut().zip(pre.as_slice()) {
            *g *= match self {
                Activation::Relu => {
                    if z > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Activation::Tanh => 1.0 - z.tanh().powi(2),
            };
        }
        out
    }
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy of softmax outputs and its gradient w.r.t. the logits.
pub fn cross_entropy_grad(probs: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if probs.rows() != labels.len() {
        return Err(Error::Shape(format!("{} rows, {} labels", probs.rows(), labels.len())));
    }
    let n = labels.len() as f64;
    let mut grad = probs.clone();
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        if y >= probs.cols() {
            return Err(Error::Shape(format!("label {y} out of range")));
        }
        loss -= probs.get(r, y).max(1e-300).ln();
        let row = grad.row_mut(r);
        row[y] -= 1.0;
        row.iter_mut().for_each(|g| *g /= n);
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(values in proptest::collection::vec(-50.0f64..50.0, 2 * 7)) {
            let p = softmax_rows(&Matrix::from_vec(7, 2, values).unwrap());
            for r in 0..7 {
                prop_assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn argmax_ties() {
        assert_eq!(first_argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(first_argmax(&[0.0; 5]), 0);
    }
}

//! Trainable model stacks sharing one interface for the optimizer,
//! training loop, evaluation and gradient checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::aff::{aff_apply, aff_backward, trim_in_place, AffMatrix};
use super::dense::DenseNet3;
use super::encoder::SeqEncoder;
use super::cross_entropy_grad;

/// A differentiable binary classifier trained with mean cross-entropy.
pub trait Model: Sync {
    type Input: Sync;

    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    /// Mean cross-entropy over the batch and its gradient, laid out like [`Model::params`].
    fn loss_and_grad(&self, inputs: &[&Self::Input], labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>)>;

    /// Class probabilities `[p(dry), p(wet)]` for each input.
    fn predict_proba(&self, inputs: &[&Self::Input]) -> Result<Vec<[f64; 2]>>;

    /// The adaptive frequency filter, when the stack has one.
    fn aff_mut(&mut self) -> Option<&mut AffMatrix> {
        None
    }

    fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

fn rows_to_matrix(inputs: &[&Vec<f64>]) -> Result<Matrix> {
    let dim = inputs.first().map_or(0, |v| v.len());
    let mut data = Vec::with_capacity(inputs.len() * dim);
    for v in inputs {
        if v.len() != dim {
            return Err(Error::Shape(format!("ragged batch: {} vs {dim} features", v.len())));
        }
        data.extend_from_slice(v);
    }
    Matrix::from_vec(inputs.len(), dim, data)
}

fn to_pairs(p: &Matrix) -> Vec<[f64; 2]> {
    (0..p.rows()).map(|r| [p.get(r, 0), p.get(r, 1)]).collect()
}

impl Model for DenseNet3 {
    type Input = Vec<f64>;

    fn params(&self) -> Vec<&[f64]> {
        DenseNet3::params(self)
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        DenseNet3::params_mut(self)
    }

    fn loss_and_grad(&self, inputs: &[&Vec<f64>], labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
        let x = rows_to_matrix(inputs)?;
        let cache = self.forward(&x)?;
        let (loss, d_logits) = cross_entropy_grad(&cache.probs, labels)?;
        let (grads, _) = self.backward(&cache, &d_logits)?;
        Ok((loss, grads))
    }

    fn predict_proba(&self, inputs: &[&Vec<f64>]) -> Result<Vec<[f64; 2]>> {
        if inputs.is_empty() {
            return Ok(vec![]);
        }
        Ok(to_pairs(&self.predict(&rows_to_matrix(inputs)?)?))
    }
}

/// Spectrogram classifier: `S·AFF → log(1 + relu(·)) → encoder → DenseNet3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffModel {
    pub aff: AffMatrix,
    pub encoder: SeqEncoder,
    pub head: DenseNet3,
}

struct SampleCache {
    fmap: Matrix,
    enc: super::encoder::EncoderCache,
}

impl AffModel {
    pub fn new(aff: AffMatrix, encoder: SeqEncoder, head: DenseNet3) -> Result<Self> {
        if encoder.dim() != aff.d_new() || head.input_dim() != aff.d_new() {
            return Err(Error::Shape(format!(
                "AFF width {}, encoder width {}, head input {}",
                aff.d_new(),
                encoder.dim(),
                head.input_dim()
            )));
        }
        Ok(AffModel { aff, encoder, head })
    }

    fn encode_one(&self, spec: &Matrix) -> Result<(Vec<f64>, SampleCache)> {
        let fmap = aff_apply(spec, &self.aff)?;
        let compressed = fmap.map(|v| v.max(0.0).ln_1p());
        let (pooled, enc) = self.encoder.forward(&compressed)?;
        Ok((pooled, SampleCache { fmap, enc }))
    }

    /// Pooled encoder output for one spectrogram.
    pub fn embed(&self, spec: &Matrix) -> Result<Vec<f64>> {
        Ok(self.encode_one(spec)?.0)
    }
}

impl Model for AffModel {
    type Input = Matrix;

    fn params(&self) -> Vec<&[f64]> {
        let mut p = vec![self.aff.weights.as_slice()];
        p.extend(self.encoder.params());
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = vec![self.aff.weights.as_mut_slice()];
        p.extend(self.encoder.params_mut());
        p.extend(DenseNet3::params_mut(&mut self.head));
        p
    }

    fn loss_and_grad(&self, inputs: &[&Matrix], labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
        let encoded: Vec<(Vec<f64>, SampleCache)> = inputs
            .par_iter()
            .map(|s| self.encode_one(s))
            .collect::<Result<_>>()?;
        let pooled: Vec<&Vec<f64>> = encoded.iter().map(|(p, _)| p).collect();
        let x = rows_to_matrix(&pooled)?;
        let cache = self.head.forward(&x)?;
        let (loss, d_logits) = cross_entropy_grad(&cache.probs, labels)?;
        let (head_grads, d_pooled) = self.head.backward(&cache, &d_logits)?;

        let per_sample: Vec<(Vec<Vec<f64>>, Matrix)> = encoded
            .par_iter()
            .zip(inputs.par_iter())
            .enumerate()
            .map(|(i, ((_, c), spec))| {
                let (enc_grads, d_comp) = self.encoder.backward(&c.enc, d_pooled.row(i))?;
                let mut d_fmap = d_comp;
                for (g, &f) in d_fmap.as_mut_slice().iter_mut().zip(c.fmap.as_slice()) {
                    *g = if f > 0.0 { *g / (1.0 + f) } else { 0.0 };
                }
                Ok((enc_grads, aff_backward(spec, &d_fmap)?))
            })
            .collect::<Result<_>>()?;

        let mut aff_grad = vec![0.0; self.aff.weights.as_slice().len()];
        let mut enc_grads: Vec<Vec<f64>> = self.encoder.params().iter().map(|p| vec![0.0; p.len()]).collect();
        for (eg, ag) in &per_sample {
            for (a, g) in aff_grad.iter_mut().zip(ag.as_slice()) {
                *a += g;
            }
            for (acc, g) in enc_grads.iter_mut().zip(eg) {
                for (a, v) in acc.iter_mut().zip(g) {
                    *a += v;
                }
            }
        }
        let mut grads = vec![aff_grad];
        grads.extend(enc_grads);
        grads.extend(head_grads);
        Ok((loss, grads))
    }

    fn predict_proba(&self, inputs: &[&Matrix]) -> Result<Vec<[f64; 2]>> {
        if inputs.is_empty() {
            return Ok(vec![]);
        }
        let pooled: Vec<Vec<f64>> = inputs
            .par_iter()
            .map(|s| self.embed(s))
            .collect::<Result<_>>()?;
        let refs: Vec<&Vec<f64>> = pooled.iter().collect();
        Ok(to_pairs(&self.head.predict(&rows_to_matrix(&refs)?)?))
    }

    fn aff_mut(&mut self) -> Option<&mut AffMatrix> {
        Some(&mut self.aff)
    }
}

impl AffModel {
    pub fn trim(&mut self) {
        trim_in_place(&mut self.aff);
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{softmax_rows, Activation};

/// Affine layer `y = x·W + b`, `W` stored as `(in, out)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            w: Matrix::zeros(fan_in, fan_out),
            b: vec![0.0; fan_out],
        }
    }

    /// He-uniform weights, zero bias.
    pub fn he_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / fan_in.max(1) as f64).sqrt();
        let mut layer = Self::zeros(fan_in, fan_out);
        for w in layer.w.as_mut_slice() {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    pub fn fan_in(&self) -> usize {
        self.w.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = x.matmul(&self.w)?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.b) {
                *v += b;
            }
        }
        Ok(z)
    }

    /// Returns `(dW, db, dX)` for upstream gradient `dz`.
    pub fn backward(&self, x: &Matrix, dz: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
        let dw = x.t_matmul(dz)?;
        let mut db = vec![0.0; self.fan_out()];
        for r in 0..dz.rows() {
            for (g, v) in db.iter_mut().zip(dz.row(r)) {
                *g += v;
            }
        }
        let dx = dz.matmul_t(&self.w)?;
        Ok((dw, db, dx))
    }
}

/// Three fully connected layers `in → h1 → h2 → 2` with softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet3 {
    pub layers: [Dense; 3],
    pub activation: Activation,
    pub seed: u64,
}

/// Intermediate values kept for the backward pass.
pub struct DenseCache {
    input: Matrix,
    pre: [Matrix; 2],
    post: [Matrix; 2],
    pub probs: Matrix,
}

/// Gradients laid out like [`DenseNet3::params`].
pub type DenseGrads = Vec<Vec<f64>>;

pub const DEFAULT_HIDDEN: (usize, usize) = (128, 32);

impl DenseNet3 {
    pub fn new(input: usize, hidden: (usize, usize), seed: u64) -> Self {
        let mut rng = super::seeded_rng(seed);
        DenseNet3 {
            layers: [
                Dense::he_uniform(input, hidden.0, &mut rng),
                Dense::he_uniform(hidden.0, hidden.1, &mut rng),
                Dense::he_uniform(hidden.1, 2, &mut rng),
            ],
            activation: Activation::Relu,
            seed,
        }
    }

    pub fn zeros(input: usize, hidden: (usize, usize)) -> Self {
        DenseNet3 {
            layers: [
                Dense::zeros(input, hidden.0),
                Dense::zeros(hidden.0, hidden.1),
                Dense::zeros(hidden.1, 2),
            ],
            activation: Activation::Relu,
            seed: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.w.as_slice(), l.b.as_slice()])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.w.as_mut_slice(), l.b.as_mut_slice()])
            .collect()
    }

    pub fn forward(&self, x: &Matrix) -> Result<DenseCache> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let z1 = self.layers[0].forward(x)?;
        let a1 = z1.map(|v| self.activation.apply(v));
        let z2 = self.layers[1].forward(&a1)?;
        let a2 = z2.map(|v| self.activation.apply(v));
        let logits = self.layers[2].forward(&a2)?;
        Ok(DenseCache {
            input: x.clone(),
            pre: [z1, z2],
            post: [a1, a2],
            probs: softmax_rows(&logits),
        })
    }

    /// Class probabilities, one row per input row.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x)?.probs)
    }

    /// Back-propagates `d_logits` (already divided by the batch size).
    /// Returns parameter gradients and the gradient w.r.t. the input.
    pub fn backward(&self, cache: &DenseCache, d_logits: &Matrix) -> Result<(DenseGrads, Matrix)> {
        let (dw3, db3, da2) = self.layers[2].backward(&cache.post[1], d_logits)?;
        let dz2 = self.activation.backprop(&cache.pre[1], &da2);
        let (dw2, db2, da1) = self.layers[1].backward(&cache.post[0], &dz2)?;
        let dz1 = self.activation.backprop(&cache.pre[0], &da1);
        let (dw1, db1, dx) = self.layers[0].backward(&cache.input, &dz1)?;
        Ok((
            vec![dw1.into_vec(), db1, dw2.into_vec(), db2, dw3.into_vec(), db3],
            dx,
        ))
    }
}

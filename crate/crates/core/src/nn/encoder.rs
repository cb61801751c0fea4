//! Sequence encoders turning a `(T, d)` feature map into one `d`-vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::softmax_rows;

/// Single-head self-attention block with a position-wise ReLU feed-forward
/// layer, residual connections around both, then a temporal mean.
///
/// ```text
/// Z = X + softmax(XWq (XWk)ᵀ / √dk) · XWv · Wo
/// Y = Z + relu(Z·W1 + b1)·W2 + b2
/// out = mean_t Y
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionBlock {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SeqEncoder {
    MeanPool { dim: usize },
    Attention { block: AttentionBlock, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    MeanPool,
    Attention,
}

struct AttentionCache {
    x: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    attn: Matrix,
    heads: Matrix,
    z: Matrix,
    u: Matrix,
    r: Matrix,
}

pub struct EncoderCache(Option<Box<AttentionCache>>, usize);

fn uniform(rows: usize, cols: usize, limit: f64, rng: &mut impl Rng) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = rng.random_range(-limit..limit);
    }
    m
}

impl AttentionBlock {
    pub fn zeros(d_model: usize, d_k: usize, d_ff: usize) -> Self {
        AttentionBlock {
            wq: Matrix::zeros(d_model, d_k),
            wk: Matrix::zeros(d_model, d_k),
            wv: Matrix::zeros(d_model, d_k),
            wo: Matrix::zeros(d_k, d_model),
            w1: Matrix::zeros(d_model, d_ff),
            b1: vec![0.0; d_ff],
            w2: Matrix::zeros(d_ff, d_model),
            b2: vec![0.0; d_model],
        }
    }

    /// Xavier-uniform projections, zero biases.
    pub fn random(d_model: usize, d_k: usize, d_ff: usize, rng: &mut impl Rng) -> Self {
        let xavier = |a: usize, b: usize| (6.0 / (a + b) as f64).sqrt();
        AttentionBlock {
            wq: uniform(d_model, d_k, xavier(d_model, d_k), rng),
            wk: uniform(d_model, d_k, xavier(d_model, d_k), rng),
            wv: uniform(d_model, d_k, xavier(d_model, d_k), rng),
            wo: uniform(d_k, d_model, xavier(d_k, d_model), rng),
            w1: uniform(d_model, d_ff, xavier(d_model, d_ff), rng),
            b1: vec![0.0; d_ff],
            w2: uniform(d_ff, d_model, xavier(d_ff, d_model), rng),
            b2: vec![0.0; d_model],
        }
    }

    pub fn d_model(&self) -> usize {
        self.wq.rows()
    }

    pub fn d_k(&self) -> usize {
        self.wq.cols()
    }

    fn forward(&self, x: &Matrix) -> Result<(Vec<f64>, AttentionCache)> {
        let q = x.matmul(&self.wq)?;
        let k = x.matmul(&self.wk)?;
        let v = x.matmul(&self.wv)?;
        let scale = 1.0 / (self.d_k() as f64).sqrt();
        let attn = softmax_rows(&q.matmul_t(&k)?.map(|s| s * scale));
        let heads = attn.matmul(&v)?;
        let mut z = heads.matmul(&self.wo)?;
        z.add_assign(x);
        let mut u = z.matmul(&self.w1)?;
        for t in 0..u.rows() {
            for (a, b) in u.row_mut(t).iter_mut().zip(&self.b1) {
                *a += b;
            }
        }
        let r = u.map(|a| a.max(0.0));
        let mut y = r.matmul(&self.w2)?;
        y.add_assign(&z);
        for t in 0..y.rows() {
            for (a, b) in y.row_mut(t).iter_mut().zip(&self.b2) {
                *a += b;
            }
        }
        Ok((
            y.column_means(),
            AttentionCache {
                x: x.clone(),
                q,
                k,
                v,
                attn,
                heads,
                z,
                u,
                r,
            },
        ))
    }

    /// Parameter gradients (in [`SeqEncoder::params`] order) and `dX`.
    fn backward(&self, c: &AttentionCache, d_out: &[f64]) -> Result<(Vec<Vec<f64>>, Matrix)> {
        let t_len = c.x.rows();
        let inv_t = 1.0 / t_len as f64;
        let mut dy = Matrix::zeros(t_len, self.d_model());
        for t in 0..t_len {
            for (a, g) in dy.row_mut(t).iter_mut().zip(d_out) {
                *a = g * inv_t;
            }
        }
        let db2: Vec<f64> = d_out.to_vec();
        let dw2 = c.r.t_matmul(&dy)?;
        let dr = dy.matmul_t(&self.w2)?;
        let mut du = dr;
        for (g, &u) in du.as_mut_slice().iter_mut().zip(c.u.as_slice()) {
            if u <= 0.0 {
                *g = 0.0;
            }
        }
        let dw1 = c.z.t_matmul(&du)?;
        let db1 = du.column_sums();
        let mut dz = du.matmul_t(&self.w1)?;
        dz.add_assign(&dy);

        let dwo = c.heads.t_matmul(&dz)?;
        let dheads = dz.matmul_t(&self.wo)?;
        let mut dx = dz;

        let da = dheads.matmul_t(&c.v)?;
        let dv = c.attn.t_matmul(&dheads)?;
        // softmax backward, row by row
        let mut ds = Matrix::zeros(t_len, t_len);
        for i in 0..t_len {
            let a = c.attn.row(i);
            let g = da.row(i);
            let dot: f64 = a.iter().zip(g).map(|(x, y)| x * y).sum();
            for (o, (ai, gi)) in ds.row_mut(i).iter_mut().zip(a.iter().zip(g)) {
                *o = ai * (gi - dot);
            }
        }
        let scale = 1.0 / (self.d_k() as f64).sqrt();
        let dq = ds.matmul(&c.k)?.map(|v| v * scale);
        let dk = ds.t_matmul(&c.q)?.map(|v| v * scale);
        let dwq = c.x.t_matmul(&dq)?;
        let dwk = c.x.t_matmul(&dk)?;
        let dwv = c.x.t_matmul(&dv)?;
        dx.add_assign(&dq.matmul_t(&self.wq)?);
        dx.add_assign(&dk.matmul_t(&self.wk)?);
        dx.add_assign(&dv.matmul_t(&self.wv)?);
        Ok((
            vec![
                dwq.into_vec(),
                dwk.into_vec(),
                dwv.into_vec(),
                dwo.into_vec(),
                dw1.into_vec(),
                db1,
                dw2.into_vec(),
                db2,
            ],
            dx,
        ))
    }
}

impl SeqEncoder {
    pub fn mean_pool(dim: usize) -> Self {
        SeqEncoder::MeanPool { dim }
    }

    /// Attention encoder with `d_k = d_model`.
    pub fn attention(d_model: usize, d_ff: usize, seed: u64) -> Self {
        let mut rng = super::seeded_rng(seed);
        SeqEncoder::Attention {
            block: AttentionBlock::random(d_model, d_model, d_ff, &mut rng),
            seed,
        }
    }

    pub fn build(kind: EncoderKind, d_model: usize, d_ff: usize, seed: u64) -> Self {
        match kind {
            EncoderKind::MeanPool => Self::mean_pool(d_model),
            EncoderKind::Attention => Self::attention(d_model, d_ff, seed),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SeqEncoder::MeanPool { dim } => *dim,
            SeqEncoder::Attention { block, .. } => block.d_model(),
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        match self {
            SeqEncoder::MeanPool { .. } => vec![],
            SeqEncoder::Attention { block: b, .. } => vec![
                b.wq.as_slice(),
                b.wk.as_slice(),
                b.wv.as_slice(),
                b.wo.as_slice(),
                b.w1.as_slice(),
                &b.b1,
                b.w2.as_slice(),
                &b.b2,
            ],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            SeqEncoder::MeanPool { .. } => vec![],
            SeqEncoder::Attention { block: b, .. } => vec![
                b.wq.as_mut_slice(),
                b.wk.as_mut_slice(),
                b.wv.as_mut_slice(),
                b.wo.as_mut_slice(),
                b.w1.as_mut_slice(),
                &mut b.b1,
                b.w2.as_mut_slice(),
                &mut b.b2,
            ],
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Vec<f64>, EncoderCache)> {
        if x.rows() == 0 {
            return Err(Error::Shape("empty sequence".into()));
        }
        if x.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "encoder expects width {}, got {}",
                self.dim(),
                x.cols()
            )));
        }
        match self {
            SeqEncoder::MeanPool { .. } => Ok((x.column_means(), EncoderCache(None, x.rows()))),
            SeqEncoder::Attention { block, .. } => {
                let (out, cache) = block.forward(x)?;
                Ok((out, EncoderCache(Some(Box::new(cache)), x.rows())))
            }
        }
    }

    pub fn encode(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    /// Parameter gradients and `dX` for upstream gradient `d_out`.
    pub fn backward(&self, cache: &EncoderCache, d_out: &[f64]) -> Result<(Vec<Vec<f64>>, Matrix)> {
        match (self, &cache.0) {
            (SeqEncoder::MeanPool { dim }, _) => {
                let t_len = cache.1;
                let mut dx = Matrix::zeros(t_len, *dim);
                for t in 0..t_len {
                    for (a, g) in dx.row_mut(t).iter_mut().zip(d_out) {
                        *a = g / t_len as f64;
                    }
                }
                Ok((vec![], dx))
            }
            (SeqEncoder::Attention { block, .. }, Some(c)) => block.backward(c, d_out),
            (SeqEncoder::Attention { .. }, None) => {
                Err(Error::Shape("attention backward without its forward cache".into()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_pool_of_constant_rows() {
        let c = vec![1.5, -2.0, 0.25];
        let x = Matrix::from_rows(&vec![c.clone(); 7]).unwrap();
        assert_eq!(SeqEncoder::mean_pool(3).encode(&x).unwrap(), c);
    }

    #[test]
    fn zero_attention_is_mean_pool() {
        let enc = SeqEncoder::Attention {
            block: AttentionBlock::zeros(4, 4, 6),
            seed: 0,
        };
        let x = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0, 4.0],
            vec![-1.0, 0.5, 0.0, 2.0],
            vec![0.3, 0.3, -0.7, 1.0],
        ])
        .unwrap();
        assert_eq!(enc.encode(&x).unwrap(), x.column_means());
    }

    #[test]
    fn output_width_independent_of_length() {
        let enc = SeqEncoder::attention(5, 8, 3);
        for t in [1, 4, 17] {
            let x = Matrix::from_vec(t, 5, (0..t * 5).map(|i| (i as f64 * 0.3).sin()).collect()).unwrap();
            assert_eq!(enc.encode(&x).unwrap().len(), 5);
        }
        assert!(matches!(enc.encode(&Matrix::zeros(0, 5)), Err(Error::Shape(_))));
    }
}

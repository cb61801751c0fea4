//! Adaptive frequency filter: a trainable `(d_freq, d_new)` projection of a
//! spectrogram, initialized from a mel filter bank and periodically trimmed to
//! a band around each filter's peak.

use serde::{Deserialize, Serialize};

use crate::audio::MelFilterBank;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::first_argmax;

pub const DEFAULT_TRIM_HALFWIDTH: usize = 12;
pub const DEFAULT_TRIM_PERIOD: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffMatrix {
    pub weights: Matrix,
    pub trim_halfwidth_bins: usize,
    pub trim_period_epochs: usize,
}

impl AffMatrix {
    pub fn new(weights: Matrix, trim_halfwidth_bins: usize, trim_period_epochs: usize) -> Self {
        AffMatrix {
            weights,
            trim_halfwidth_bins,
            trim_period_epochs,
        }
    }

    pub fn d_freq(&self) -> usize {
        self.weights.rows()
    }

    pub fn d_new(&self) -> usize {
        self.weights.cols()
    }

    /// Columns whose weights are all zero.
    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.d_new())
            .filter(|&c| (0..self.d_freq()).all(|f| self.weights.get(f, c) == 0.0))
            .collect()
    }

    /// Every column's nonzero entries lie within ±W of its first argmax.
    pub fn is_trimmed(&self) -> bool {
        let w = self.trim_halfwidth_bins;
        (0..self.d_new()).all(|c| {
            let col = self.weights.column(c);
            let m = first_argmax(&col);
            col.iter()
                .enumerate()
                .all(|(f, &v)| v >= 0.0 && (v == 0.0 || f.abs_diff(m) <= w))
        })
    }
}

/// AFF initialized with the mel filter bank weights.
pub fn aff_init_mfcc(bank: &MelFilterBank, d_freq: usize, d_new: usize) -> Result<AffMatrix> {
    if bank.d_freq() != d_freq || bank.n_mel() != d_new {
        return Err(Error::Shape(format!(
            "filter bank is {}x{}, AFF wants {d_freq}x{d_new}",
            bank.d_freq(),
            bank.n_mel()
        )));
    }
    Ok(AffMatrix::new(
        bank.weights.clone(),
        DEFAULT_TRIM_HALFWIDTH,
        DEFAULT_TRIM_PERIOD,
    ))
}

/// `F = S · AFF`, shape `(T, d_new)`.
pub fn aff_apply(spec: &Matrix, aff: &AffMatrix) -> Result<Matrix> {
    if spec.cols() != aff.d_freq() {
        return Err(Error::Shape(format!(
            "spectrogram has {} bins, AFF expects {}",
            spec.cols(),
            aff.d_freq()
        )));
    }
    spec.matmul(&aff.weights)
}

/// Gradient of a loss w.r.t. the AFF weights: `Sᵀ · dF`.
pub fn aff_backward(spec: &Matrix, d_feature_map: &Matrix) -> Result<Matrix> {
    spec.t_matmul(d_feature_map)
}

/// Zeroes each column outside `[argmax − W, argmax + W]` and clamps negatives to zero.
/// Ties resolve to the first maximal index.
pub fn aff_trim(aff: &AffMatrix) -> AffMatrix {
    let mut out = aff.clone();
    trim_in_place(&mut out);
    out
}

pub fn trim_in_place(aff: &mut AffMatrix) {
    let w = aff.trim_halfwidth_bins;
    for c in 0..aff.d_new() {
        let col = aff.weights.column(c);
        let m = first_argmax(&col);
        let (lo, hi) = (m.saturating_sub(w), m + w);
        for (f, &v) in col.iter().enumerate() {
            if f < lo || f > hi || v < 0.0 {
                aff.weights.set(f, c, 0.0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::mel_filterbank;
    use proptest::prelude::*;

    fn single_column(values: Vec<f64>, w: usize) -> AffMatrix {
        let n = values.len();
        AffMatrix::new(Matrix::from_vec(n, 1, values).unwrap(), w, 5)
    }

    #[test]
    fn output_shape() {
        let s = Matrix::zeros(100, 513);
        let aff = AffMatrix::new(Matrix::zeros(513, 26), 12, 5);
        assert_eq!(aff_apply(&s, &aff).unwrap().shape(), (100, 26));
        assert!(matches!(aff_apply(&Matrix::zeros(3, 512), &aff), Err(Error::Shape(_))));
    }

    #[test]
    fn one_hot_columns_select_bins() {
        let picks = [3usize, 0, 7];
        let mut w = Matrix::zeros(8, 3);
        for (c, &f) in picks.iter().enumerate() {
            w.set(f, c, 1.0);
        }
        let aff = AffMatrix::new(w, 2, 5);
        let s = Matrix::from_vec(2, 8, (0..16).map(|v| v as f64 * 1.5).collect()).unwrap();
        let f = aff_apply(&s, &aff).unwrap();
        for t in 0..2 {
            for (c, &bin) in picks.iter().enumerate() {
                assert_eq!(f.get(t, c), s.get(t, bin));
            }
        }
    }

    #[test]
    fn mel_init_inherits_bank() {
        let bank = mel_filterbank(513, 26, 22050, 0.0, 11025.0).unwrap();
        let aff = aff_init_mfcc(&bank, 513, 26).unwrap();
        for c in 0..26 {
            let col = aff.weights.column(c);
            assert_eq!(col.iter().cloned().fold(f64::MIN, f64::max), 1.0);
            let nz: Vec<usize> = (0..513).filter(|&f| col[f] > 0.0).collect();
            assert_eq!(nz.last().unwrap() - nz[0] + 1, nz.len());
        }
        assert!(matches!(aff_init_mfcc(&bank, 513, 20), Err(Error::Shape(_))));
    }

    #[test]
    fn trim_keeps_narrow_column() {
        let mut v = vec![0.0; 60];
        for (i, x) in [0.2, 0.6, 1.0, 0.6, 0.2].iter().enumerate() {
            v[20 + i] = *x;
        }
        let aff = single_column(v, 12);
        assert_eq!(aff_trim(&aff), aff);
    }

    #[test]
    fn trim_removes_distant_lobe() {
        let mut v = vec![0.0; 100];
        for f in 5..15 {
            v[f] = 0.5;
        }
        for f in 30..50 {
            v[f] = 0.4 + 0.05 * (10.0 - (f as f64 - 40.0).abs()).max(0.0) / 10.0;
        }
        v[40] = 0.9;
        let trimmed = aff_trim(&single_column(v.clone(), 12));
        for f in 0..100 {
            let expected = if (28..=52).contains(&f) { v[f] } else { 0.0 };
            assert_eq!(trimmed.weights.get(f, 0), expected, "bin {f}");
        }
    }

    #[test]
    fn trim_ties_use_first_index() {
        let trimmed = aff_trim(&single_column(vec![0.3; 40], 12));
        for f in 0..40 {
            let expected = if f <= 12 { 0.3 } else { 0.0 };
            assert_eq!(trimmed.weights.get(f, 0), expected);
        }
    }

    #[test]
    fn trim_clamps_negatives() {
        let trimmed = aff_trim(&single_column(vec![-0.5, 1.0, -0.2, 0.3], 12));
        assert_eq!(trimmed.weights.as_slice(), &[0.0, 1.0, 0.0, 0.3]);
    }

    proptest! {
        #[test]
        fn trim_is_idempotent_and_band_limited(
            values in proptest::collection::vec(-1.0f64..1.0, 30 * 4),
            w in 0usize..10,
        ) {
            let aff = AffMatrix::new(Matrix::from_vec(30, 4, values).unwrap(), w, 5);
            let once = aff_trim(&aff);
            prop_assert!(once.is_trimmed());
            let twice = aff_trim(&once);
            let a: Vec<u64> = once.weights.as_slice().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = twice.weights.as_slice().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}

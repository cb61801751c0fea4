use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::Spectrogram;

/// Energies below this are clamped before taking the log.
pub const LOG_FLOOR: f64 = 1e-10;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters, one per column, each scaled to a peak weight of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelFilterBank {
    pub weights: Matrix,
    pub mel_low_hz: f64,
    pub mel_high_hz: f64,
    pub sample_rate_hz: u32,
}

impl MelFilterBank {
    pub fn d_freq(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_mel(&self) -> usize {
        self.weights.cols()
    }

    /// Bin index of each filter's maximum weight (first on ties).
    pub fn peak_bins(&self) -> Vec<usize> {
        (0..self.n_mel())
            .map(|c| {
                let col = self.weights.column(c);
                crate::nn::first_argmax(&col)
            })
            .collect()
    }
}

pub fn mel_filterbank(
    d_freq: usize,
    n_mel: usize,
    sample_rate_hz: u32,
    f_low: f64,
    f_high: f64,
) -> Result<MelFilterBank> {
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    if !(0.0 <= f_low && f_low < f_high && f_high <= nyquist) {
        return Err(Error::Config(format!(
            "need 0 <= f_low < f_high <= {nyquist}, got {f_low}..{f_high}"
        )));
    }
    if n_mel < 2 {
        return Err(Error::Config("need at least two mel filters".into()));
    }
    if d_freq < 2 {
        return Err(Error::Config("need at least two frequency bins".into()));
    }
    let n_fft = 2 * (d_freq - 1);
    let bin_hz = f64::from(sample_rate_hz) / n_fft as f64;
    let (m_lo, m_hi) = (hz_to_mel(f_low), hz_to_mel(f_high));
    let edges: Vec<f64> = (0..n_mel + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n_mel + 1) as f64))
        .collect();
    let mut weights = Matrix::zeros(d_freq, n_mel);
    for m in 0..n_mel {
        let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut peak = 0.0f64;
        for k in 0..d_freq {
            let f = k as f64 * bin_hz;
            let w = if f > left && f <= centre {
                (f - left) / (centre - left)
            } else if f > centre && f < right {
                (right - f) / (right - centre)
            } else {
                0.0
            };
            weights.set(k, m, w);
            peak = peak.max(w);
        }
        if peak <= 0.0 {
            return Err(Error::Config(format!(
                "mel filter {m} ({left:.1}..{right:.1} Hz) falls between FFT bins; use fewer filters or a larger FFT"
            )));
        }
        for k in 0..d_freq {
            weights.set(k, m, weights.get(k, m) / peak);
        }
    }
    Ok(MelFilterBank {
        weights,
        mel_low_hz: f_low,
        mel_high_hz: f_high,
        sample_rate_hz,
    })
}

/// Log mel energies, shape `(T, n_mel)`.
pub fn log_mel_energies(spec: &Spectrogram, bank: &MelFilterBank) -> Result<Matrix> {
    if spec.d_freq() != bank.d_freq() {
        return Err(Error::Shape(format!(
            "spectrogram has {} bins, filter bank expects {}",
            spec.d_freq(),
            bank.d_freq()
        )));
    }
    Ok(spec
        .power
        .matmul(&bank.weights)?
        .map(|e| e.max(LOG_FLOOR).ln()))
}

/// Cepstral coefficients 1..=n_coeff (orthonormal DCT-II of the log mel energies).
pub fn mfcc(spec: &Spectrogram, bank: &MelFilterBank, n_coeff: usize) -> Result<Matrix> {
    let log_mel = log_mel_energies(spec, bank)?;
    let n_mel = bank.n_mel();
    if n_coeff == 0 || n_coeff >= n_mel {
        return Err(Error::Config(format!(
            "n_coeff must be in 1..{n_mel}, got {n_coeff}"
        )));
    }
    let scale = (2.0 / n_mel as f64).sqrt();
    let basis: Vec<Vec<f64>> = (1..=n_coeff)
        .map(|k| {
            (0..n_mel)
                .map(|m| {
                    scale
                        * (std::f64::consts::PI * k as f64 * (m as f64 + 0.5) / n_mel as f64).cos()
                })
                .collect()
        })
        .collect();
    let mut out = Matrix::zeros(log_mel.rows(), n_coeff);
    for t in 0..log_mel.rows() {
        let row = log_mel.row(t);
        for (c, b) in basis.iter().enumerate() {
            out.set(t, c, row.iter().zip(b).map(|(x, w)| x * w).sum());
        }
    }
    Ok(out)
}

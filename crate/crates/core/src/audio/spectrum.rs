use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{frame_signal, AudioClip, Frames};

/// Short-time analysis parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramParams {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub n_fft: usize,
}

impl Default for SpectrogramParams {
    fn default() -> Self {
        SpectrogramParams {
            frame_ms: 25.0,
            hop_ms: 10.0,
            n_fft: 1024,
        }
    }
}

/// Power spectrogram, shape `(T, n_fft/2 + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub power: Matrix,
    pub n_fft: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate_hz: u32,
}

impl Spectrogram {
    pub fn from_clip(clip: &AudioClip, params: &SpectrogramParams) -> Result<Self> {
        let frames = frame_signal(clip, params.frame_ms, params.hop_ms)?;
        stft_power(&frames, params.n_fft)
    }

    pub fn n_frames(&self) -> usize {
        self.power.rows()
    }

    pub fn d_freq(&self) -> usize {
        self.power.cols()
    }

    pub fn bin_hz(&self) -> f64 {
        f64::from(self.sample_rate_hz) / self.n_fft as f64
    }

    /// Centre frequency of bin `k`.
    pub fn bin_freq(&self, k: usize) -> f64 {
        k as f64 * self.bin_hz()
    }
}

/// `|DFT|²` of every frame zero-padded to `n_fft`, bins `0..=n_fft/2`.
pub fn stft_power(frames: &Frames, n_fft: usize) -> Result<Spectrogram> {
    if !n_fft.is_power_of_two() || n_fft < frames.frame_len {
        return Err(Error::Config(format!(
            "n_fft must be a power of two >= frame length {}, got {n_fft}",
            frames.frame_len
        )));
    }
    if frames.frames.is_empty() {
        return Err(Error::Shape("no frames".into()));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let d_freq = n_fft / 2 + 1;
    let mut power = Matrix::zeros(frames.frames.len(), d_freq);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for (t, frame) in frames.frames.iter().enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (b, &s) in buf.iter_mut().zip(frame) {
            b.re = s;
        }
        fft.process(&mut buf);
        for (p, c) in power.row_mut(t).iter_mut().zip(&buf[..d_freq]) {
            *p = c.norm_sqr();
        }
    }
    Ok(Spectrogram {
        power,
        n_fft,
        frame_len: frames.frame_len,
        hop: frames.hop,
        sample_rate_hz: frames.sample_rate_hz,
    })
}

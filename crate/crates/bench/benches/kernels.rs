use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hfvoice_core::audio::{mel_filterbank, mfcc, Spectrogram, SpectrogramParams};
use hfvoice_core::nn::{aff_apply, aff_init_mfcc, Adam, DenseNet3, Model, DEFAULT_HIDDEN};
use hfvoice_core::stats::student_t_p;
use hfvoice_core::AudioClip;

fn voice(secs: f64) -> AudioClip {
    let sr = 22050.0;
    let samples = (0..(secs * sr) as usize)
        .map(|i| {
            let t = i as f64 / sr;
            (1..=10).map(|k| 0.3 / k as f64 * (2.0 * PI * 140.0 * k as f64 * t).sin()).sum()
        })
        .collect();
    AudioClip::new(samples, 22050).unwrap()
}

fn spectral(c: &mut Criterion) {
    let clip = voice(2.0);
    let params = SpectrogramParams::default();
    c.bench_function("stft 2 s", |b| b.iter(|| Spectrogram::from_clip(black_box(&clip), &params).unwrap()));
    let spec = Spectrogram::from_clip(&clip, &params).unwrap();
    let bank = mel_filterbank(spec.power.cols(), 26, 22050, 0.0, 11025.0).unwrap();
    c.bench_function("mfcc 2 s", |b| b.iter(|| mfcc(black_box(&spec), &bank, 13).unwrap()));
}

fn stats(c: &mut Criterion) {
    c.bench_function("student_t_p", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 0..100 {
                acc += student_t_p(black_box(k as f64 * 0.05), 17.0).unwrap();
            }
            acc
        })
    });
}

fn networks(c: &mut Criterion) {
    let x: Vec<Vec<f64>> = (0..16).map(|i| (0..59).map(|j| ((i * 59 + j) as f64 * 0.37).sin()).collect()).collect();
    let refs: Vec<&Vec<f64>> = x.iter().collect();
    let y: Vec<usize> = (0..16).map(|i| i % 2).collect();
    let mut net = DenseNet3::new(59, DEFAULT_HIDDEN, 0);
    let mut adam = Adam::new(1e-3);
    c.bench_function("dense step batch 16", |b| {
        b.iter(|| {
            let (_, grads) = net.loss_and_grad(&refs, &y).unwrap();
            adam.update(&mut net.params_mut(), &grads);
        })
    });

    let spec = Spectrogram::from_clip(&voice(1.0), &SpectrogramParams::default()).unwrap().power;
    let bank = mel_filterbank(spec.cols(), 26, 22050, 0.0, 11025.0).unwrap();
    let aff = aff_init_mfcc(&bank, spec.cols(), 26).unwrap();
    c.bench_function("aff forward 1 s", |b| b.iter(|| aff_apply(black_box(&spec), &aff).unwrap()));
}

criterion_group!(benches, spectral, stats, networks);
criterion_main!(benches);

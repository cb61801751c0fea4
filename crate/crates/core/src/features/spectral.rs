use crate::audio::Spectrogram;
use crate::error::{Error, Result};

use super::LldTrack;

const DB_FLOOR: f64 = 1e-10;

/// Fixed band-energy descriptors, in Hz.
pub const ENERGY_BANDS: [(f64, f64); 4] = [
    (0.0, 250.0),
    (250.0, 650.0),
    (650.0, 1000.0),
    (1000.0, 4000.0),
];

fn db(p: f64) -> f64 {
    10.0 * p.max(DB_FLOOR).log10()
}

fn bins_in(spec: &Spectrogram, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let bin = spec.bin_hz();
    let start = (lo / bin).ceil() as usize;
    let end = ((hi / bin).ceil() as usize).min(spec.d_freq());
    start.min(end)..end
}

fn band_sum(row: &[f64], r: &std::ops::Range<usize>) -> f64 {
    row[r.clone()].iter().sum()
}

fn band_max(row: &[f64], r: &std::ops::Range<usize>) -> f64 {
    row[r.clone()].iter().cloned().fold(0.0, f64::max)
}

/// Linear-power ratio of the 1–5 kHz band to the 50 Hz–1 kHz band.
pub fn alpha_ratio_linear(spec: &Spectrogram, row: &[f64]) -> Option<f64> {
    let low = band_sum(row, &bins_in(spec, 50.0, 1000.0));
    let high = band_sum(row, &bins_in(spec, 1000.0, 5000.0));
    (low > 0.0).then(|| high / low)
}

/// Frame-level spectral descriptors. Every track has one value per frame;
/// frames with no energy carry 0 and are masked out, as is the first flux value.
pub fn spectral_descriptors(spec: &Spectrogram) -> Result<Vec<LldTrack>> {
    let t_len = spec.n_frames();
    if t_len == 0 {
        return Err(Error::Shape("empty spectrogram".into()));
    }
    let freqs: Vec<f64> = (0..spec.d_freq()).map(|k| spec.bin_freq(k)).collect();
    let slope_bins = bins_in(spec, 0.0, 5000.0);
    let ham_low = bins_in(spec, 0.0, 2000.0);
    let ham_high = bins_in(spec, 2000.0, 5000.0);
    let band_ranges: Vec<_> = ENERGY_BANDS.iter().map(|&(lo, hi)| bins_in(spec, lo, hi)).collect();

    let mut names: Vec<String> = [
        "energy_db",
        "centroid_hz",
        "slope_db_per_khz",
        "flux",
        "alpha_ratio_db",
        "hammarberg_db",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend(
        ENERGY_BANDS
            .iter()
            .map(|&(lo, hi)| format!("band_{}_{}_db", lo as u32, hi as u32)),
    );
    let mut values = vec![vec![0.0; t_len]; names.len()];
    let mut masks = vec![vec![false; t_len]; names.len()];

    // slope regression abscissa (kHz), shared by every frame
    let xs: Vec<f64> = freqs[slope_bins.clone()].iter().map(|f| f / 1000.0).collect();
    let x_mean = xs.iter().sum::<f64>() / xs.len().max(1) as f64;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();

    let mut prev_normalized: Option<Vec<f64>> = None;
    for t in 0..t_len {
        let row = spec.power.row(t);
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            prev_normalized = None;
            continue;
        }
        let mut set = |i: usize, v: f64| {
            values[i][t] = v;
            masks[i][t] = true;
        };
        set(0, db(total));
        set(1, row.iter().zip(&freqs).map(|(p, f)| p * f).sum::<f64>() / total);
        if sxx > 0.0 {
            let ys: Vec<f64> = row[slope_bins.clone()].iter().map(|&p| db(p)).collect();
            let y_mean = ys.iter().sum::<f64>() / ys.len() as f64;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
            set(2, sxy / sxx);
        }
        let normalized: Vec<f64> = row.iter().map(|p| p / total).collect();
        if let Some(prev) = &prev_normalized {
            let flux = prev
                .iter()
                .zip(&normalized)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            set(3, flux);
        }
        prev_normalized = Some(normalized);
        if let Some(alpha) = alpha_ratio_linear(spec, row) {
            if alpha > 0.0 {
                set(4, 10.0 * alpha.log10());
            }
        }
        let (lo, hi) = (band_max(row, &ham_low), band_max(row, &ham_high));
        if lo > 0.0 && hi > 0.0 {
            set(5, 10.0 * (lo / hi).log10());
        }
        for (i, r) in band_ranges.iter().enumerate() {
            set(6 + i, db(band_sum(row, r)));
        }
    }

    Ok(names
        .into_iter()
        .zip(values)
        .zip(masks)
        .map(|((name, values), mask)| LldTrack {
            name,
            values,
            mask,
            frame_len: spec.frame_len,
            hop: spec.hop,
        })
        .collect())
}

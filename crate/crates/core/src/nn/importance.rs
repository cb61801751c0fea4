use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::aff::AffMatrix;

/// Per-bin importance of a trained AFF: the row sums of its weights, scaled so the maximum is 1.
pub fn importance_curve(aff: &AffMatrix) -> Result<Vec<f64>> {
    let sums: Vec<f64> = (0..aff.d_freq())
        .map(|f| aff.weights.row(f).iter().sum())
        .collect();
    let max = sums.iter().cloned().fold(f64::MIN, f64::max);
    if !(max > 0.0) {
        return Err(Error::Degenerate("AFF has no positive weight".into()));
    }
    Ok(sums.into_iter().map(|s| s / max).collect())
}

/// Per-bin mean and population standard deviation across several curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceAggregate {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn aggregate_curves(curves: &[Vec<f64>]) -> Result<ImportanceAggregate> {
    let len = match curves.first() {
        Some(c) => c.len(),
        None => return Err(Error::InsufficientData("no importance curves".into())),
    };
    if curves.iter().any(|c| c.len() != len) {
        return Err(Error::Shape("importance curves differ in length".into()));
    }
    let n = curves.len() as f64;
    let mean: Vec<f64> = (0..len).map(|f| curves.iter().map(|c| c[f]).sum::<f64>() / n).collect();
    let std = (0..len)
        .map(|f| (curves.iter().map(|c| (c[f] - mean[f]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    Ok(ImportanceAggregate { mean, std })
}

/// Sum of curve values over bins whose centre frequency lies in `[lo, hi)`.
pub fn band_mass(curve: &[f64], bin_hz: f64, lo: f64, hi: f64) -> f64 {
    curve
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = *k as f64 * bin_hz;
            f >= lo && f < hi
        })
        .map(|(_, v)| v)
        .sum()
}

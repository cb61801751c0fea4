use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::student_t_p;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// Welch's unequal-variance test between wet and dry groups.
    #[serde(rename = "ind")]
    Independent,
    /// Within-patient test on wet − dry differences.
    #[serde(rename = "pair")]
    Paired,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::Independent => "ind",
            TestKind::Paired => "pair",
        })
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ind" | "independent" | "welch" => Ok(TestKind::Independent),
            "pair" | "paired" => Ok(TestKind::Paired),
            other => Err(Error::Schema(format!("unknown test kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_stat: f64,
    pub dof: f64,
    pub p_two_sided: f64,
    pub kind: TestKind,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased (n − 1) sample variance.
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// One-sample test of `mean(d) = 0`.
pub fn one_sample_ttest(d: &[f64]) -> Result<(f64, f64, f64)> {
    let n = d.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 observations, got {n}")));
    }
    let var = sample_variance(d);
    if var <= 0.0 {
        return Err(Error::Degenerate("observations have zero variance".into()));
    }
    let t = mean(d) / (var / n as f64).sqrt();
    let dof = (n - 1) as f64;
    Ok((t, dof, student_t_p(t, dof)?))
}

pub fn paired_ttest(x: &[f64], y: &[f64]) -> Result<TTestResult> {
    if x.len() != y.len() {
        return Err(Error::Alignment(format!(
            "paired samples have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let (t_stat, dof, p) = one_sample_ttest(&d)?;
    Ok(TTestResult {
        t_stat,
        dof,
        p_two_sided: p,
        kind: TestKind::Paired,
    })
}

/// Welch's t-test with Welch–Satterthwaite degrees of freedom.
pub fn independent_ttest(x: &[f64], y: &[f64]) -> Result<TTestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 observations per group, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (vx, vy) = (sample_variance(x) / nx, sample_variance(y) / ny);
    let se2 = vx + vy;
    if se2 <= 0.0 {
        return Err(Error::Degenerate("both groups have zero variance".into()));
    }
    let t_stat = (mean(x) - mean(y)) / se2.sqrt();
    let dof = se2 * se2 / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
    Ok(TTestResult {
        t_stat,
        dof,
        p_two_sided: student_t_p(t_stat, dof)?,
        kind: TestKind::Independent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean_difference() {
        let r = paired_ttest(&[2.0, 4.0, 6.0], &[1.0, 3.0, 8.0]).unwrap();
        assert_eq!(r.t_stat, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
        assert_eq!(r.dof, 2.0);
    }

    #[test]
    fn identical_pairs_are_degenerate() {
        let x = [1.0, 2.0, 3.0];
        assert!(matches!(paired_ttest(&x, &x), Err(Error::Degenerate(_))));
        assert!(matches!(paired_ttest(&[1.0], &[0.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn paired_statistic() {
        let r = paired_ttest(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).unwrap();
        assert!((r.t_stat - 15f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.dof, 3.0);
    }

    #[test]
    fn welch_statistic_and_symmetry() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [3.0, 4.0, 5.0, 6.0, 7.0];
        let r = independent_ttest(&x, &y).unwrap();
        assert!((r.t_stat + 2.0).abs() < 1e-12);
        assert!((r.dof - 8.0).abs() < 1e-12);
        let s = independent_ttest(&y, &x).unwrap();
        assert_eq!(s.t_stat, -r.t_stat);
        assert_eq!(s.p_two_sided, r.p_two_sided);
        let same = independent_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((same.t_stat, same.p_two_sided), (0.0, 1.0));
        assert!(matches!(
            independent_ttest(&[2.0, 2.0], &[2.0, 2.0]),
            Err(Error::Degenerate(_))
        ));
    }
}

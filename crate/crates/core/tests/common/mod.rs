//! Independent numeric references shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Γ(x) for positive integers and half-integers, by the recurrence from Γ(1) and Γ(1/2).
pub fn gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!((2.0 * x - twice).abs() < 1e-12 && x > 0.0, "{x} is not a positive half-integer");
    let (mut g, mut z) = if twice as i64 % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while z + 0.5 < x {
        g *= z;
        z += 1.0;
    }
    g
}

/// Student-t density with `dof` degrees of freedom, `dof` a positive integer.
pub fn t_density(x: f64, dof: f64) -> f64 {
    let c = gamma_half_integer((dof + 1.0) / 2.0) / ((dof * PI).sqrt() * gamma_half_integer(dof / 2.0));
    c * (1.0 + x * x / dof).powf(-(dof + 1.0) / 2.0)
}

/// Two-sided p-values at `t = 0, step, 2·step, …, t_max` from a trapezoid
/// integral of the density over `[0, |t|]`: `p = 1 − 2∫₀^|t| f`.
pub struct TrapezoidOracle {
    pub step: f64,
    pub p: Vec<f64>,
}

impl TrapezoidOracle {
    pub fn new(dof: f64, t_max: f64, step: f64, substeps: usize) -> Self {
        let h = step / substeps as f64;
        let n = (t_max / step).round() as usize;
        let mut p = Vec::with_capacity(n + 1);
        let mut area = 0.0;
        p.push(1.0);
        for k in 0..n {
            let a = k as f64 * step;
            let mut s = 0.5 * (t_density(a, dof) + t_density(a + step, dof));
            for j in 1..substeps {
                s += t_density(a + j as f64 * h, dof);
            }
            area += s * h;
            p.push(1.0 - 2.0 * area);
        }
        TrapezoidOracle { step, p }
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.p.iter().enumerate().map(|(k, &p)| (k as f64 * self.step, p))
    }
}

pub const ORACLE_DOFS: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 30.0];

/// Largest |student_t_p − oracle| over `dof ∈ ORACLE_DOFS`, `t ∈ [−5, 5]` on a 0.05 grid.
pub fn max_oracle_error(student_t_p: impl Fn(f64, f64) -> f64) -> (f64, f64, f64) {
    let mut worst = (0.0, 0.0, 0.0);
    for &dof in &ORACLE_DOFS {
        let oracle = TrapezoidOracle::new(dof, 5.0, 0.05, 2000);
        for (t, p) in oracle.points() {
            for signed in [t, -t] {
                let err = (student_t_p(signed, dof) - p).abs();
                if err > worst.0 {
                    worst = (err, signed, dof);
                }
            }
        }
    }
    worst
}

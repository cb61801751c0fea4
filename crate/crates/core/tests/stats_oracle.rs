mod common;

use common::{gamma_half_integer, max_oracle_error, TrapezoidOracle};
use hfvoice_core::error::Error;
use hfvoice_core::stats::*;
use proptest::prelude::*;

fn oracle_p(t: f64, dof: f64) -> f64 {
    // land exactly on a grid point
    let step = t.abs() / 400.0;
    *TrapezoidOracle::new(dof, t.abs(), step, 50).p.last().unwrap()
}

#[test]
fn gamma_recurrence_reference() {
    assert!((gamma_half_integer(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-15);
    assert_eq!(gamma_half_integer(5.0), 24.0);
    assert!((gamma_half_integer(2.5) - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-14);
    for x in [0.5, 1.0, 2.5, 7.0, 15.5] {
        assert!((ln_gamma(x) - gamma_half_integer(x).ln()).abs() < 1e-12, "{x}");
    }
}

#[test]
fn student_t_p_matches_trapezoid_integral() {
    let (err, t, dof) = max_oracle_error(|t, dof| student_t_p(t, dof).unwrap());
    assert!(err < 1e-6, "max error {err:e} at t={t}, dof={dof}");
}

#[test]
fn cauchy_and_normal_limits() {
    assert!((student_t_p(1.0, 1.0).unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(student_t_p(0.0, 7.0).unwrap(), 1.0);
    assert!((student_t_p(1.96, 1e6).unwrap() - 0.05).abs() < 1e-3);
    assert!(student_t_p(1.0, 0.0).is_err());
}

#[test]
fn paired_example_confirmed_by_oracle() {
    let r = paired_ttest(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).unwrap();
    assert!((r.t_stat - 3.872983346207417).abs() < 1e-12);
    assert_eq!(r.dof, 3.0);
    let oracle = oracle_p(r.t_stat, 3.0);
    assert!((r.p_two_sided - oracle).abs() < 1e-6, "{} vs {oracle}", r.p_two_sided);
    assert!((r.p_two_sided - 0.0305).abs() < 5e-4);

    let zero = paired_ttest(&[2.0, 4.0, 6.0], &[1.0, 3.0, 8.0]).unwrap();
    assert_eq!(zero.t_stat, 0.0);
    assert_eq!(zero.p_two_sided, 1.0);
    assert!(matches!(paired_ttest(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::Degenerate(_))));
    assert!(matches!(paired_ttest(&[1.0], &[2.0]), Err(Error::InsufficientData(_))));
}

#[test]
fn welch_example_confirmed_by_oracle() {
    let r = independent_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
    assert!((r.t_stat + 2.0).abs() < 1e-12);
    assert!((r.dof - 8.0).abs() < 1e-12);
    let oracle = oracle_p(2.0, 8.0);
    assert!((r.p_two_sided - oracle).abs() < 1e-6, "{} vs {oracle}", r.p_two_sided);
    assert!((r.p_two_sided - 0.0805).abs() < 5e-4);

    let same = independent_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(same.t_stat, 0.0);
    assert_eq!(same.p_two_sided, 1.0);
    assert!(matches!(independent_ttest(&[2.0, 2.0], &[2.0, 2.0]), Err(Error::Degenerate(_))));
}

#[test]
fn p_decreases_in_abs_t_on_grid() {
    for dof in [1.0, 2.5, 5.0, 30.0, 200.0] {
        let mut prev = student_t_p(0.0, dof).unwrap();
        for k in 1..=200 {
            let p = student_t_p(k as f64 * 0.05, dof).unwrap();
            assert!(p < prev, "dof {dof}, t {}", k as f64 * 0.05);
            prev = p;
        }
    }
}

proptest! {
    #[test]
    fn p_is_symmetric_and_in_unit_interval(t in -50.0f64..50.0, dof in 0.5f64..500.0) {
        let p = student_t_p(t, dof).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert_eq!(p, student_t_p(-t, dof).unwrap());
    }

    #[test]
    fn paired_equals_one_sample_on_differences(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30)
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let d: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
        let paired = paired_ttest(&x, &y).unwrap();
        let (t, dof, p) = one_sample_ttest(&d).unwrap();
        prop_assert!((paired.t_stat - t).abs() <= 1e-12 * t.abs().max(1.0));
        prop_assert_eq!(paired.dof, dof);
        prop_assert!((paired.p_two_sided - p).abs() <= 1e-12);
    }

    #[test]
    fn welch_swap_negates_t(
        x in prop::collection::vec(-10.0f64..10.0, 2..20),
        y in prop::collection::vec(-10.0f64..10.0, 2..20),
    ) {
        let a = independent_ttest(&x, &y).unwrap();
        let b = independent_ttest(&y, &x).unwrap();
        prop_assert_eq!(a.t_stat, -b.t_stat);
        prop_assert_eq!(a.p_two_sided, b.p_two_sided);
    }
}

//! Paired and Welch t-tests with exact Student-t p-values, and p-value based
//! feature screening.

mod distribution;
mod selection;
mod ttest;

pub use distribution::{ln_gamma, regularized_incomplete_beta, student_t_p};
pub use selection::{select_features, SelectionMask, SelectionReport, SelectionRow, DEFAULT_ALPHA};
pub use ttest::{independent_ttest, one_sample_ttest, paired_ttest, sample_variance, TTestResult, TestKind};

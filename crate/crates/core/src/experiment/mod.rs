//! Experiment grid, reports and AFF frequency analysis.

mod aff;
mod data;
mod grid;

pub use aff::{analyze_aff, spectrogram_cohort, train_aff_task, AffConfig, AffFailure, AffReport, AffTaskResult};
pub use data::{extract_manifest, load_audio_cohort, load_feature_cohort, LoadFailure};
pub use grid::{
    pct1, run_cell, run_grid, select_for, selection_table, AverageRow, CellMask, CellKey, CellOutcome, CellResult, CellSuccess,
    ExperimentConfig, ExperimentReport,
};

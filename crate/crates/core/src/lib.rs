//! Voice-based heart-failure state detection from paired admission and
//! discharge recordings: acoustic features, t-test feature screening,
//! patient-wise and pair-wise classifiers, adaptive frequency filters and a
//! synthetic cohort generator.

pub mod audio;
pub mod cohort;
pub mod error;
pub mod experiment;
pub mod features;
pub mod matrix;
pub mod nn;
pub mod stats;
pub mod synth;
pub mod types;

pub use audio::AudioClip;
pub use cohort::Cohort;
pub use error::{Error, Result};
pub use features::FeatureVector;
pub use matrix::Matrix;
pub use stats::TestKind;
pub use types::{Condition, Group, RecordingRef, Scheme, Sex, Task};

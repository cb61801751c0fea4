//! Small domain enums shared by every module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

/// Speech tasks: two short sentences with unvoiced / voiced consonants, a
/// third short sentence, and counting from 1 to 60.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Pg,
    Mm,
    Mlh,
    C,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Pg, Task::Mm, Task::Mlh, Task::C];
}

/// Recording session: `Wet` at admission, `Dry` at discharge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Wet,
    Dry,
}

impl Condition {
    /// Class label: wet is the positive class.
    pub fn label(self) -> usize {
        match self {
            Condition::Wet => 1,
            Condition::Dry => 0,
        }
    }
}

/// Sex subset a model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Female,
    Male,
    All,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Male, Group::Female, Group::All];

    pub fn admits(self, sex: Sex) -> bool {
        match self {
            Group::All => true,
            Group::Female => sex == Sex::Female,
            Group::Male => sex == Sex::Male,
        }
    }
}

/// How recordings become classifier inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Every recording is its own sample.
    PatientWise,
    /// One signed wet/dry difference per patient.
    PairWise,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::PatientWise, Scheme::PairWise];
}

macro_rules! token_enum {
    ($ty:ty, $what:literal, { $($tok:literal => $var:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($tok => Ok($var),)+
                    other => Err(Error::Schema(format!(concat!("unknown ", $what, " {:?}"), other))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let tok = match self {
                    $(v if *v == $var => $tok,)+
                    _ => unreachable!(),
                };
                f.write_str(tok)
            }
        }
    };
}

token_enum!(Sex, "sex", { "female" => Sex::Female, "male" => Sex::Male, "f" => Sex::Female, "m" => Sex::Male });
token_enum!(Task, "task", { "pg" => Task::Pg, "mm" => Task::Mm, "mlh" => Task::Mlh, "c" => Task::C });
token_enum!(Condition, "condition", { "wet" => Condition::Wet, "dry" => Condition::Dry });
token_enum!(Scheme, "scheme", {
    "patient-wise" => Scheme::PatientWise,
    "pair-wise" => Scheme::PairWise,
    "patientwise" => Scheme::PatientWise,
    "pairwise" => Scheme::PairWise,
});
token_enum!(Group, "group", { "female" => Group::Female, "male" => Group::Male, "all" => Group::All });

/// Identifies one recording in a cohort.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordingRef {
    pub patient_id: String,
    pub task: Task,
    pub condition: Condition,
}

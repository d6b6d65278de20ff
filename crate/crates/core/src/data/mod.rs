//! Clickstream domain types and CSV ingestion.
//!
//! A [`Dataset`] is assembled from five CSV files (action logs, end-unit to
//! in-unit relationships, the problem catalog, the assignment catalog and the
//! labeled rows). Every action event carries the end-unit assignment it is
//! linked to; an in-unit assignment linked to several end-units has its events
//! duplicated once per link, and the duplicates share a `log_index`.

mod io;
mod validate;

pub use io::{load_dataset, write_dataset, DatasetPaths, LoadMode, LoadStats};
pub use validate::{validate_dataset, ValidationReport};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of distinct action kinds tracked by the feature extractors.
pub const NUM_ACTIONS: usize = 12;

/// Sentinel stored for sequence levels that are missing in the input.
pub const UNKNOWN_LEVEL: &str = "UNKNOWN";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file: {}", path.display())]
    MissingFile { path: PathBuf },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("schema mismatch in {file}: column `{column}` ({detail})")]
    SchemaMismatch {
        file: String,
        column: String,
        detail: String,
    },
    #[error("dangling reference in {file} line {line}: unknown {kind} `{id}`")]
    DanglingReference {
        file: String,
        line: u64,
        kind: &'static str,
        id: String,
    },
    #[error("duplicate row in {file} line {line}: {key}")]
    DuplicateRow {
        file: String,
        line: u64,
        key: String,
    },
    #[error("invalid value in {file} line {line}, column `{column}`: `{value}`")]
    InvalidValue {
        file: String,
        line: u64,
        column: String,
        value: String,
    },
    #[error("relationships.csv line {line}: assignment `{id}` is linked to itself")]
    SelfLink { line: u64, id: String },
}

macro_rules! string_enum {
    (
        $(#[$meta:meta])*
        pub enum $name:ident { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(other.to_string()),
                }
            }
        }
    };
}

string_enum! {
    /// A student action recorded in the clickstream.
    pub enum ActionKind {
        AssignmentStarted => "assignment_started",
        AssignmentFinished => "assignment_finished",
        AssignmentResumed => "assignment_resumed",
        ProblemStarted => "problem_started",
        ProblemFinished => "problem_finished",
        CorrectResponse => "correct_response",
        WrongResponse => "wrong_response",
        OpenResponse => "open_response",
        ContinueSelected => "continue_selected",
        HintRequested => "hint_requested",
        ExplanationRequested => "explanation_requested",
        AnswerRequested => "answer_requested",
    }
}

string_enum! {
    /// Answer format of a problem.
    pub enum ProblemType {
        Number => "number",
        AlgebraicExpression => "algebraic_expression",
        NumericExpression => "numeric_expression",
        CheckAllThatApply => "check_all_that_apply",
        MultipleChoice => "multiple_choice",
        ExactMatchCaseSensitive => "exact_match_case_sensitive",
        ExactMatchIgnoreCase => "exact_match_ignore_case",
        ExactFraction => "exact_fraction",
        Ordering => "ordering",
        UngradedOpenResponse => "ungraded_open_response",
    }
}

/// Per-action counters indexed by [`ActionKind::index`].
pub type ActionCounts = [u64; NUM_ACTIONS];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub timestamp: u64,
    pub student_id: String,
    pub end_unit_assignment_id: String,
    pub in_unit_assignment_id: String,
    pub problem_id: String,
    pub kind: ActionKind,
    /// Position of the originating line in the action log. Copies created by
    /// multi-link duplication share it.
    pub log_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub problem_id: String,
    pub problem_type: ProblemType,
    pub skill_code: String,
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentInstance {
    pub assignment_id: String,
    pub student_id: String,
    /// Curriculum, grade+subject, unit, subject-within-unit.
    pub sequence_path: [String; 4],
    pub is_end_unit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledRow {
    pub end_unit_assignment_id: String,
    pub problem_id: String,
    pub score: Option<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub events: Vec<ActionEvent>,
    /// end-unit assignment id -> linked in-unit assignment ids, file order.
    pub relationships: IndexMap<String, Vec<String>>,
    pub problems: IndexMap<String, Problem>,
    pub assignments: IndexMap<String, AssignmentInstance>,
    pub rows: Vec<LabeledRow>,
}

impl Dataset {
    /// Student owning the end-unit assignment of `row`.
    pub fn row_student(&self, row: &LabeledRow) -> Option<&str> {
        self.assignments
            .get(&row.end_unit_assignment_id)
            .map(|a| a.student_id.as_str())
    }

    /// Events with distinct `log_index`, i.e. the clickstream as logged.
    pub fn unique_events(&self) -> impl Iterator<Item = &ActionEvent> {
        let mut last: Option<usize> = None;
        self.events.iter().filter(move |e| {
            let fresh = last != Some(e.log_index);
            last = Some(e.log_index);
            fresh
        })
    }

    /// Common embedding dimension of the catalog, if any problem carries one.
    pub fn embedding_dim(&self) -> Option<usize> {
        self.problems
            .values()
            .find_map(|p| p.embedding.as_ref().map(Vec::len))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_kind_round_trips_through_text() {
        assert_eq!(ActionKind::ALL.len(), NUM_ACTIONS);
        for (i, kind) in ActionKind::ALL.iter().enumerate() {
            assert_eq!(kind.index(), i);
            assert_eq!(kind.as_str().parse::<ActionKind>().unwrap(), *kind);
        }
        assert!("live_tutor_requested".parse::<ActionKind>().is_err());
    }

    #[test]
    fn ten_problem_types() {
        assert_eq!(ProblemType::ALL.len(), 10);
        assert_eq!(
            "check_all_that_apply".parse::<ProblemType>().unwrap(),
            ProblemType::CheckAllThatApply
        );
    }

    #[test]
    fn unique_events_skips_adjacent_duplicates() {
        let ev = |eu: &str, idx| ActionEvent {
            timestamp: 0,
            student_id: "s".into(),
            end_unit_assignment_id: eu.into(),
            in_unit_assignment_id: "r".into(),
            problem_id: "p".into(),
            kind: ActionKind::HintRequested,
            log_index: idx,
        };
        let d = Dataset {
            events: vec![ev("u1", 0), ev("u2", 0), ev("u1", 1)],
            ..Default::default()
        };
        assert_eq!(d.unique_events().count(), 2);
    }
}

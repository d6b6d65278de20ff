use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Dataset;

/// Summary counts of a dataset plus any ids that fail to resolve.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub students: usize,
    pub assignments: usize,
    pub end_unit_assignments: usize,
    pub problems: usize,
    pub events: usize,
    pub rows: usize,
    pub positive_rows: usize,
    pub negative_rows: usize,
    pub unlabeled_rows: usize,
    /// `kind:id` for every referenced id missing from its catalog, sorted.
    pub orphans: Vec<String>,
}

pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut students: BTreeSet<&str> = BTreeSet::new();
    let mut orphans: BTreeSet<String> = BTreeSet::new();

    for a in d.assignments.values() {
        students.insert(&a.student_id);
    }
    for e in d.unique_events() {
        students.insert(&e.student_id);
        if !d.problems.contains_key(&e.problem_id) {
            orphans.insert(format!("problem:{}", e.problem_id));
        }
        for id in [&e.in_unit_assignment_id, &e.end_unit_assignment_id] {
            if !d.assignments.contains_key(id) {
                orphans.insert(format!("assignment:{id}"));
            }
        }
    }
    for (eu, ius) in &d.relationships {
        for id in std::iter::once(eu).chain(ius) {
            if !d.assignments.contains_key(id) {
                orphans.insert(format!("assignment:{id}"));
            }
        }
    }
    let (mut pos, mut neg, mut unlabeled) = (0, 0, 0);
    for r in &d.rows {
        match r.score {
            Some(1) => pos += 1,
            Some(_) => neg += 1,
            None => unlabeled += 1,
        }
        if !d.assignments.contains_key(&r.end_unit_assignment_id) {
            orphans.insert(format!("assignment:{}", r.end_unit_assignment_id));
        }
        if !d.problems.contains_key(&r.problem_id) {
            orphans.insert(format!("problem:{}", r.problem_id));
        }
    }

    ValidationReport {
        students: students.len(),
        assignments: d.assignments.len(),
        end_unit_assignments: d.assignments.values().filter(|a| a.is_end_unit).count(),
        problems: d.problems.len(),
        events: d.unique_events().count(),
        rows: d.rows.len(),
        positive_rows: pos,
        negative_rows: neg,
        unlabeled_rows: unlabeled,
        orphans: orphans.into_iter().collect(),
    }
}

//! Descriptive reports: mean scores by problem grouping and the comparison
//! of in-unit behavior between successful and struggling rows.

mod welch;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::data::{ActionKind, Dataset, LabeledRow, UNKNOWN_LEVEL};
use crate::features::{FeatureContext, FeatureError};

pub use welch::welch_t;

/// Significance level for the cohort comparison.
pub const COHORT_ALPHA: f64 = 0.01;
pub const DEFAULT_MIN_OCCURRENCES: usize = 100;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("dataset has no labeled rows")]
    NoLabels,
    #[error("labeled rows contain a single class")]
    SingleClass,
    #[error("sample needs at least two values and nonzero variance in one sample")]
    DegenerateSample,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{path}: {detail}")]
    Io { path: PathBuf, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    ProblemType,
    SkillCode,
    /// Second sequence level.
    Grade,
    /// Third and fourth sequence levels joined with " / ".
    Unit,
}

impl GroupBy {
    pub const ALL: [GroupBy; 4] = [
        GroupBy::ProblemType,
        GroupBy::SkillCode,
        GroupBy::Grade,
        GroupBy::Unit,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            GroupBy::ProblemType => "difficulty_by_type",
            GroupBy::SkillCode => "difficulty_by_skill",
            GroupBy::Grade => "difficulty_by_grade",
            GroupBy::Unit => "difficulty_by_unit",
        }
    }

    fn key(self, d: &Dataset, row: &LabeledRow) -> String {
        let problem = d.problems.get(&row.problem_id);
        let path = d
            .assignments
            .get(&row.end_unit_assignment_id)
            .map(|a| &a.sequence_path);
        let unknown = || UNKNOWN_LEVEL.to_string();
        match self {
            GroupBy::ProblemType => problem.map_or_else(unknown, |p| p.problem_type.to_string()),
            GroupBy::SkillCode => problem.map_or_else(unknown, |p| p.skill_code.clone()),
            GroupBy::Grade => path.map_or_else(unknown, |p| p[1].clone()),
            GroupBy::Unit => path.map_or_else(unknown, |p| format!("{} / {}", p[2], p[3])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifficultyRow {
    pub group: String,
    pub mean_score: f64,
    pub n: usize,
}

/// Mean score per group over labeled rows, keeping groups with at least
/// `min_occurrences` rows, hardest (lowest mean) first.
pub fn difficulty_report(
    d: &Dataset,
    group_by: GroupBy,
    min_occurrences: usize,
) -> Result<Vec<DifficultyRow>, AnalyticsError> {
    let mut acc: HashMap<String, (u64, usize)> = HashMap::new();
    let mut any = false;
    for row in &d.rows {
        let Some(score) = row.score else { continue };
        any = true;
        let e = acc.entry(group_by.key(d, row)).or_default();
        e.0 += u64::from(score);
        e.1 += 1;
    }
    if !any {
        return Err(AnalyticsError::NoLabels);
    }
    let mut out: Vec<DifficultyRow> = acc
        .into_iter()
        .filter(|(_, (_, n))| *n >= min_occurrences)
        .map(|(group, (sum, n))| DifficultyRow {
            group,
            mean_score: sum as f64 / n as f64,
            n,
        })
        .collect();
    out.sort_by(|a, b| {
        a.mean_score
            .total_cmp(&b.mean_score)
            .then_with(|| a.group.cmp(&b.group))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortRow {
    pub action: ActionKind,
    pub mean_struggling: f64,
    pub mean_successful: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Per action kind, the mean in-unit count of rows scored 0 versus rows
/// scored 1, each row contributing its end-unit's in-unit totals, with a
/// Welch t-test. When both samples are constant the test is undefined; the
/// p-value is then 1 for equal means and 0 otherwise.
pub fn cohort_report(d: &Dataset) -> Result<Vec<CohortRow>, AnalyticsError> {
    let ctx = FeatureContext::new(d);
    let mut by_unit: HashMap<&str, [f64; crate::data::NUM_ACTIONS]> = HashMap::new();
    let mut samples: [Vec<[f64; crate::data::NUM_ACTIONS]>; 2] = [Vec::new(), Vec::new()];
    for row in &d.rows {
        let Some(score) = row.score else { continue };
        let u = row.end_unit_assignment_id.as_str();
        let counts = match by_unit.get(u) {
            Some(c) => *c,
            None => {
                let c = ctx.assignment_action_counts(u)?;
                by_unit.insert(u, c);
                c
            }
        };
        samples[usize::from(score > 0)].push(counts);
    }
    if samples[0].is_empty() && samples[1].is_empty() {
        return Err(AnalyticsError::NoLabels);
    }
    if samples[0].is_empty() || samples[1].is_empty() {
        return Err(AnalyticsError::SingleClass);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    ActionKind::ALL
        .iter()
        .map(|&action| {
            let k = action.index();
            let a: Vec<f64> = samples[0].iter().map(|c| c[k]).collect();
            let b: Vec<f64> = samples[1].iter().map(|c| c[k]).collect();
            let (ma, mb) = (mean(&a), mean(&b));
            let (t, p) = match welch_t(&a, &b) {
                Ok(tp) => tp,
                Err(AnalyticsError::DegenerateSample) if a.len() >= 2 && b.len() >= 2 => {
                    if ma == mb {
                        (0.0, 1.0)
                    } else {
                        (f64::INFINITY.copysign(ma - mb), 0.0)
                    }
                }
                Err(e) => return Err(e),
            };
            Ok(CohortRow {
                action,
                mean_struggling: ma,
                mean_successful: mb,
                t_statistic: t,
                p_value: p,
                significant: p < COHORT_ALPHA,
            })
        })
        .collect()
}

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<(), AnalyticsError> {
    let err = |e: csv::Error| AnalyticsError::Io {
        path: path.to_path_buf(),
        detail: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| err(e.into()))
}

pub fn write_difficulty_csv(rows: &[DifficultyRow], path: &Path) -> Result<(), AnalyticsError> {
    if rows.is_empty() {
        return std::fs::write(path, "group,mean_score,n\n").map_err(|e| AnalyticsError::Io {
            path: path.to_path_buf(),
            detail: e.to_string(),
        });
    }
    write_rows(rows, path)
}

pub fn write_cohort_csv(rows: &[CohortRow], path: &Path) -> Result<(), AnalyticsError> {
    write_rows(rows, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, GenConfig};

    fn small() -> Dataset {
        generate_dataset(&GenConfig {
            n_students: 60,
            n_problems: 100,
            ..GenConfig::default()
        })
        .unwrap()
        .0
    }

    #[test]
    fn means_sorted_and_bounded() {
        let d = small();
        for g in GroupBy::ALL {
            let rows = difficulty_report(&d, g, 1).unwrap();
            assert!(rows.windows(2).all(|w| w[0].mean_score <= w[1].mean_score));
            assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.mean_score)));
            let labeled = d.rows.iter().filter(|r| r.score.is_some()).count();
            assert_eq!(rows.iter().map(|r| r.n).sum::<usize>(), labeled);
        }
        assert_eq!(
            difficulty_report(&d, GroupBy::ProblemType, 1)
                .unwrap()
                .len(),
            10
        );
        assert!(difficulty_report(&d, GroupBy::ProblemType, usize::MAX)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn single_group_all_correct() {
        let mut d = small();
        for r in d.rows.iter_mut() {
            r.score = Some(1);
        }
        let rows = difficulty_report(&d, GroupBy::Grade, 1).unwrap();
        assert!(rows.iter().all(|r| r.mean_score == 1.0));
        assert!(matches!(
            cohort_report(&d),
            Err(AnalyticsError::SingleClass)
        ));
        for r in d.rows.iter_mut() {
            r.score = None;
        }
        assert!(matches!(
            difficulty_report(&d, GroupBy::Unit, 1),
            Err(AnalyticsError::NoLabels)
        ));
    }

    #[test]
    fn pooled_mean_matches_overall_mean() {
        let d = small();
        let report = cohort_report(&d).unwrap();
        let ctx = FeatureContext::new(&d);
        let labeled: Vec<&LabeledRow> = d.rows.iter().filter(|r| r.score.is_some()).collect();
        let n1 = labeled.iter().filter(|r| r.score == Some(1)).count() as f64;
        let n0 = labeled.len() as f64 - n1;
        for row in &report {
            let k = row.action.index();
            let overall: f64 = labeled
                .iter()
                .map(|r| {
                    ctx.assignment_action_counts(&r.end_unit_assignment_id)
                        .unwrap()[k]
                })
                .sum::<f64>()
                / labeled.len() as f64;
            let pooled = (row.mean_struggling * n0 + row.mean_successful * n1) / (n0 + n1);
            assert!((pooled - overall).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&row.p_value));
        }
    }
}

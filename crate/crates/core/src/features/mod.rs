//! Behavioral feature extraction.
//!
//! Five per-action count families are computed for every labeled row from the
//! in-unit work linked to the row's end-unit assignment (and, for one family,
//! the student's whole history), together with a signed problem-level
//! performance measure and the principal components of the row's problem
//! embedding. A correlation filter fitted on training rows prunes redundant
//! columns; the resulting [`ColumnMask`] is reused verbatim for evaluation.

mod counts;
mod filter;
mod pca;

pub use counts::{d0, EndUnitFeatures, FeatureContext, ProblemGlobalStats};
pub use filter::{correlation_filter, select_uncorrelated, CORRELATION_THRESHOLD};
pub use pca::{fit_pca, Projection, N_COMPONENTS};

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ActionKind, LabeledRow, NUM_ACTIONS};

/// Names of the categorical columns, in storage order.
pub const CATEGORICAL_NAMES: [&str; 5] = [
    "problem_type",
    "seq_level_1",
    "seq_level_2",
    "seq_level_3",
    "seq_level_4",
];

pub const PERFORMANCE_COLUMN: &str = "problem_performance";
pub const EMBEDDING_MISSING_COLUMN: &str = "embedding_missing";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown assignment `{0}`")]
    UnknownAssignment(String),
    #[error("unknown student `{0}`")]
    UnknownStudent(String),
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("need at least {needed} embeddings, found {found}")]
    InsufficientEmbeddings { needed: usize, found: usize },
    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("column `{0}` required by the mask is not present")]
    MaskColumnMissing(String),
    #[error("feature table has no rows")]
    EmptyTable,
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed feature file {} line {line}: {detail}", path.display())]
    Malformed {
        path: PathBuf,
        line: u64,
        detail: String,
    },
}

/// Dense training matrix with row keys.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    /// `(end_unit_assignment_id, problem_id)` per row.
    pub row_keys: Vec<(String, String)>,
    pub numeric_names: Vec<String>,
    /// Row-major, `row_keys.len()` rows of `numeric_names.len()` values.
    pub numeric: Vec<Vec<f64>>,
    /// Values for [`CATEGORICAL_NAMES`], per row.
    pub categorical: Vec<[String; 5]>,
    /// Binary targets when every row is labeled.
    pub labels: Option<Vec<f64>>,
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.row_keys.len()
    }

    pub fn n_numeric(&self) -> usize {
        self.numeric_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.numeric.iter().map(|r| r[j]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.numeric_names.iter().position(|n| n == name)?;
        Some(self.column(j))
    }

    /// Keeps the listed numeric columns in the given order.
    pub fn select_numeric(&self, idx: &[usize]) -> FeatureTable {
        FeatureTable {
            row_keys: self.row_keys.clone(),
            numeric_names: idx.iter().map(|&j| self.numeric_names[j].clone()).collect(),
            numeric: self
                .numeric
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
            categorical: self.categorical.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            row_keys: rows.iter().map(|&i| self.row_keys[i].clone()).collect(),
            numeric_names: self.numeric_names.clone(),
            numeric: rows.iter().map(|&i| self.numeric[i].clone()).collect(),
            categorical: rows.iter().map(|&i| self.categorical[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&i| l[i]).collect()),
        }
    }
}

/// Column names of the unfiltered table, in assembly order.
pub fn raw_column_names(n_components: usize) -> Vec<String> {
    let families = ["assign", "student", "inunit_avg", "problem_avg", "weighted"];
    let mut names = Vec::with_capacity(5 * NUM_ACTIONS + n_components + 2);
    for fam in families {
        for kind in ActionKind::ALL {
            names.push(format!("{fam}_{kind}"));
        }
    }
    names.push(PERFORMANCE_COLUMN.to_string());
    names.extend((0..n_components).map(|i| format!("pc_{i:02}")));
    names.push(EMBEDDING_MISSING_COLUMN.to_string());
    names
}

/// Kept columns plus the projection that produced the PC columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMask {
    pub kept: Vec<String>,
    pub threshold: f64,
    pub projection: Projection,
}

impl ColumnMask {
    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        let file = File::create(path).map_err(|source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::to_writer(file, self).map_err(|e| FeatureError::Malformed {
            path: path.to_path_buf(),
            line: 0,
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let file = File::open(path).map_err(|source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| {
            FeatureError::Malformed {
                path: path.to_path_buf(),
                line: e.line() as u64,
                detail: e.to_string(),
            }
        })
    }
}

pub enum TableRole<'m> {
    /// Fit the correlation filter on this table.
    Train { threshold: f64 },
    /// Reuse a mask fitted on training rows.
    Eval(&'m ColumnMask),
}

/// All 94 (for 32 components) numeric columns before filtering.
pub fn build_raw_table(
    ctx: &FeatureContext<'_>,
    rows: &[LabeledRow],
    proj: &Projection,
) -> Result<FeatureTable, FeatureError> {
    let d = ctx.dataset();

    // end-unit aggregates once per distinct end-unit, in parallel
    let mut end_units: Vec<&str> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for r in rows {
        let u = r.end_unit_assignment_id.as_str();
        if !slot.contains_key(u) {
            slot.insert(u, end_units.len());
            end_units.push(u);
        }
    }
    let per_unit: Vec<EndUnitFeatures> = end_units
        .par_iter()
        .map(|u| ctx.end_unit_features(u))
        .collect::<Result<_, _>>()?;

    let names = raw_column_names(proj.n_components);
    let built: Vec<(Vec<f64>, [String; 5])> = rows
        .par_iter()
        .map(|r| {
            let u = &r.end_unit_assignment_id;
            let assignment = d
                .assignments
                .get(u)
                .ok_or_else(|| FeatureError::UnknownAssignment(u.clone()))?;
            let problem = d
                .problems
                .get(&r.problem_id)
                .ok_or_else(|| FeatureError::UnknownProblem(r.problem_id.clone()))?;
            let f = &per_unit[slot[u.as_str()]];
            let mut values = Vec::with_capacity(names.len());
            values.extend_from_slice(&f.assignment_counts);
            values.extend_from_slice(&ctx.student_action_counts(&assignment.student_id)?);
            values.extend_from_slice(&f.in_unit_avg);
            values.extend_from_slice(&f.problem_avg);
            values.extend_from_slice(&f.weighted_avg);
            values.push(f.performance);
            match problem.embedding.as_deref() {
                Some(e) if !proj.is_empty() => {
                    values.extend(proj.project(e)?);
                    values.push(0.0);
                }
                _ => {
                    values.extend(std::iter::repeat_n(0.0, proj.n_components));
                    values.push(1.0);
                }
            }
            let [l1, l2, l3, l4] = assignment.sequence_path.clone();
            let cats = [problem.problem_type.as_str().to_string(), l1, l2, l3, l4];
            Ok((values, cats))
        })
        .collect::<Result<_, FeatureError>>()?;

    let labels = rows
        .iter()
        .map(|r| r.score.map(f64::from))
        .collect::<Option<Vec<f64>>>();
    let (numeric, categorical) = built.into_iter().unzip();
    Ok(FeatureTable {
        row_keys: rows
            .iter()
            .map(|r| (r.end_unit_assignment_id.clone(), r.problem_id.clone()))
            .collect(),
        numeric_names: names,
        numeric,
        categorical,
        labels,
    })
}

/// Builds the filtered table for `rows`. Training fits the column mask;
/// evaluation applies the given one, so both tables share column names.
pub fn build_feature_table(
    ctx: &FeatureContext<'_>,
    rows: &[LabeledRow],
    proj: &Projection,
    role: TableRole<'_>,
) -> Result<(FeatureTable, ColumnMask), FeatureError> {
    match role {
        TableRole::Train { threshold } => {
            if rows.is_empty() {
                return Err(FeatureError::EmptyTable);
            }
            let raw = build_raw_table(ctx, rows, proj)?;
            let table = correlation_filter(&raw, threshold);
            let mask = ColumnMask {
                kept: table.numeric_names.clone(),
                threshold,
                projection: proj.clone(),
            };
            Ok((table, mask))
        }
        TableRole::Eval(mask) => {
            let raw = build_raw_table(ctx, rows, &mask.projection)?;
            let idx = mask
                .kept
                .iter()
                .map(|name| {
                    raw.numeric_names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| FeatureError::MaskColumnMissing(name.clone()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((raw.select_numeric(&idx), mask.clone()))
        }
    }
}

const KEY_COLUMNS: [&str; 3] = ["end_unit_assignment_id", "problem_id", "score"];

pub fn write_feature_csv(t: &FeatureTable, path: &Path) -> Result<(), FeatureError> {
    let io = |source: std::io::Error| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = KEY_COLUMNS.to_vec();
    header.extend(CATEGORICAL_NAMES);
    header.extend(t.numeric_names.iter().map(String::as_str));
    w.write_record(&header).map_err(|e| io(e.into()))?;
    for i in 0..t.n_rows() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        rec.push(t.row_keys[i].0.clone());
        rec.push(t.row_keys[i].1.clone());
        rec.push(
            t.labels
                .as_ref()
                .map(|l| format!("{}", l[i]))
                .unwrap_or_default(),
        );
        rec.extend(t.categorical[i].iter().cloned());
        rec.extend(t.numeric[i].iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}

pub fn read_feature_csv(path: &Path) -> Result<FeatureTable, FeatureError> {
    let malformed = |line: u64, detail: String| FeatureError::Malformed {
        path: path.to_path_buf(),
        line,
        detail,
    };
    let file = File::open(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(file);
    let header = r
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let fixed = KEY_COLUMNS.len() + CATEGORICAL_NAMES.len();
    for (i, want) in KEY_COLUMNS
        .iter()
        .chain(CATEGORICAL_NAMES.iter())
        .enumerate()
    {
        if header.get(i) != Some(*want) {
            return Err(malformed(
                1,
                format!("expected column `{want}` at position {i}"),
            ));
        }
    }
    let numeric_names: Vec<String> = header.iter().skip(fixed).map(str::to_string).collect();
    let mut t = FeatureTable {
        row_keys: Vec::new(),
        numeric_names,
        numeric: Vec::new(),
        categorical: Vec::new(),
        labels: None,
    };
    let mut labels: Vec<Option<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| malformed(0, e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(malformed(line, "wrong number of fields".into()));
        }
        t.row_keys.push((rec[0].to_string(), rec[1].to_string()));
        labels.push(match &rec[2] {
            "" => None,
            "0" => Some(0.0),
            "1" => Some(1.0),
            other => return Err(malformed(line, format!("invalid score `{other}`"))),
        });
        let cats: [String; 5] = std::array::from_fn(|k| rec[3 + k].to_string());
        t.categorical.push(cats);
        let values = rec
            .iter()
            .skip(fixed)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| malformed(line, format!("invalid number `{v}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        t.numeric.push(values);
    }
    t.labels = labels.into_iter().collect();
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, GenConfig};

    fn small() -> GenConfig {
        GenConfig {
            n_students: 30,
            n_problems: 80,
            ..GenConfig::default()
        }
    }

    #[test]
    fn raw_table_has_94_columns() {
        let (d, _) = generate_dataset(&small()).unwrap();
        let ctx = FeatureContext::new(&d);
        let proj = fit_pca(&d.problems, N_COMPONENTS).unwrap();
        let raw = build_raw_table(&ctx, &d.rows, &proj).unwrap();
        assert_eq!(raw.n_numeric(), 12 * 5 + 32 + 1 + 1);
        assert_eq!(raw.n_numeric(), 94);
        assert_eq!(raw.n_rows(), d.rows.len());
        assert!(raw.numeric.iter().flatten().all(|v| v.is_finite()));
        let mut names = raw.numeric_names.clone();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 94);
    }

    #[test]
    fn eval_reuses_train_mask() {
        let (d, _) = generate_dataset(&small()).unwrap();
        let ctx = FeatureContext::new(&d);
        let proj = fit_pca(&d.problems, N_COMPONENTS).unwrap();
        let (train_rows, eval_rows) = d.rows.split_at(d.rows.len() / 2);
        let (train, mask) =
            build_feature_table(&ctx, train_rows, &proj, TableRole::Train { threshold: 0.9 })
                .unwrap();
        let (eval, _) =
            build_feature_table(&ctx, eval_rows, &proj, TableRole::Eval(&mask)).unwrap();
        assert_eq!(train.numeric_names, eval.numeric_names);
        assert!(train.n_numeric() < 94);
    }

    #[test]
    fn zero_activity_row_has_zero_counts() {
        let (mut d, _) = generate_dataset(&small()).unwrap();
        let u = d.rows[0].end_unit_assignment_id.clone();
        let student = d.assignments[&u].student_id.clone();
        d.events.retain(|e| e.student_id != student);
        let ctx = FeatureContext::new(&d);
        let proj = fit_pca(&d.problems, N_COMPONENTS).unwrap();
        let raw = build_raw_table(&ctx, &d.rows[..1], &proj).unwrap();
        assert!(raw.numeric[0][..61].iter().all(|&v| v == 0.0));
        assert!(raw.categorical[0].iter().all(|c| !c.is_empty()));
    }

    #[test]
    fn missing_embedding_sets_flag() {
        let (mut d, _) = generate_dataset(&small()).unwrap();
        let proj = fit_pca(&d.problems, N_COMPONENTS).unwrap();
        let pid = d.rows[0].problem_id.clone();
        d.problems.get_mut(&pid).unwrap().embedding = None;
        let ctx = FeatureContext::new(&d);
        let raw = build_raw_table(&ctx, &d.rows[..1], &proj).unwrap();
        let row = &raw.numeric[0];
        assert_eq!(row[93], 1.0);
        assert!(row[61..93].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn feature_csv_round_trip() {
        let (d, _) = generate_dataset(&small()).unwrap();
        let ctx = FeatureContext::new(&d);
        let proj = fit_pca(&d.problems, N_COMPONENTS).unwrap();
        let raw = build_raw_table(&ctx, &d.rows, &proj).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_feature_csv(&raw, &path).unwrap();
        assert_eq!(read_feature_csv(&path).unwrap(), raw);
    }
}

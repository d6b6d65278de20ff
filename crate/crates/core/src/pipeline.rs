//! Run configuration and the in-memory end-to-end pipeline shared by the
//! command-line tool and the tests.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::data::{DataError, Dataset, LabeledRow};
use crate::eval::{auc, logistic_baseline, split_by_student, EvalError, GridSpec, SplitSpec};
use crate::features::{
    build_feature_table, fit_pca, ColumnMask, FeatureContext, FeatureError, FeatureTable,
    Projection, TableRole, CORRELATION_THRESHOLD, N_COMPONENTS,
};
use crate::gbdt::{feature_importance, predict, train, GbdtError, GbdtModel, TrainParams};
use crate::rng::derive_seed;
use crate::synth::{ConfigInvalid, GenConfig, GroundTruth};

pub const DEFAULT_SEED: u64 = 7;
pub const SEED_ENV: &str = "CLICKTREE_SEED";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Generator(#[from] ConfigInvalid),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: PathBuf,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data"),
            out: PathBuf::from("out"),
        }
    }
}

/// Every section is optional; omitted keys take their defaults and unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; when set it overrides the per-section seeds.
    pub seed: Option<u64>,
    pub generator: GenConfig,
    pub train: TrainParams,
    pub split: SplitSpec,
    pub grid: GridSpec,
    pub search_budget: usize,
    pub correlation_threshold: f64,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            generator: GenConfig::default(),
            train: TrainParams::default(),
            split: SplitSpec::default(),
            grid: GridSpec::default(),
            search_budget: 20,
            correlation_threshold: CORRELATION_THRESHOLD,
            paths: Paths::default(),
        }
    }
}

/// Sub-seed streams derived from the global seed.
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const SEARCH: u64 = 3;
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Seed precedence: explicit flag, then the environment variable, then
    /// the config file, then the built-in default.
    pub fn resolve_seed(&self, flag: Option<u64>, env: Option<&str>) -> Result<u64, PipelineError> {
        if let Some(s) = flag {
            return Ok(s);
        }
        if let Some(v) = env {
            return v
                .trim()
                .parse()
                .map_err(|_| PipelineError::Config(format!("{SEED_ENV}={v:?} is not a u64")));
        }
        Ok(self.seed.unwrap_or(DEFAULT_SEED))
    }

    /// Propagates one global seed into every section.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self.generator.seed = seed;
        self.split.seed = derive_seed(seed, streams::SPLIT);
        self.train.seed = derive_seed(seed, streams::TRAIN);
        self
    }

    pub fn search_seed(&self) -> u64 {
        derive_seed(self.seed.unwrap_or(DEFAULT_SEED), streams::SEARCH)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.generator.validate()?;
        self.train.validate()?;
        self.grid.validate()?;
        if !(self.split.fraction > 0.0 && self.split.fraction < 1.0) {
            return Err(PipelineError::Config(
                "split.fraction must lie in (0, 1)".into(),
            ));
        }
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold <= 1.0) {
            return Err(PipelineError::Config(
                "correlation_threshold must lie in (0, 1]".into(),
            ));
        }
        if self.search_budget == 0 {
            return Err(PipelineError::Config("search_budget must be >= 1".into()));
        }
        Ok(())
    }
}

/// Projection fitted on the catalog's embeddings, or an empty one when no
/// problem carries an embedding.
pub fn projection_for(d: &Dataset) -> Result<Projection, FeatureError> {
    if d.problems.values().any(|p| p.embedding.is_some()) {
        fit_pca(&d.problems, N_COMPONENTS)
    } else {
        Ok(Projection::empty(N_COMPONENTS))
    }
}

pub struct Tables {
    pub train: FeatureTable,
    pub valid: FeatureTable,
    pub mask: ColumnMask,
}

pub fn labeled_rows(d: &Dataset) -> Vec<LabeledRow> {
    d.rows
        .iter()
        .filter(|r| r.score.is_some())
        .cloned()
        .collect()
}

/// Student-disjoint split of the labeled rows followed by featurization;
/// the column mask is fitted on the training side only.
pub fn build_tables(d: &Dataset, cfg: &RunConfig) -> Result<Tables, PipelineError> {
    let rows = labeled_rows(d);
    let (tr, va) = split_by_student(d, &rows, &cfg.split)?;
    let pick = |ix: &[usize]| -> Vec<LabeledRow> { ix.iter().map(|&i| rows[i].clone()).collect() };
    let proj = projection_for(d)?;
    let ctx = FeatureContext::new(d);
    let (train, mask) = build_feature_table(
        &ctx,
        &pick(&tr),
        &proj,
        TableRole::Train {
            threshold: cfg.correlation_threshold,
        },
    )?;
    let (valid, _) = build_feature_table(&ctx, &pick(&va), &proj, TableRole::Eval(&mask))?;
    Ok(Tables { train, valid, mask })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub n_events: usize,
    pub n_labeled_rows: usize,
    pub n_train_rows: usize,
    pub n_valid_rows: usize,
    pub n_features: usize,
    pub valid_auc: f64,
    pub baseline_auc: f64,
    /// AUC of the generator's true label logits on the validation rows.
    pub bayes_auc: Option<f64>,
    pub best_iteration: usize,
    pub n_trees: usize,
    pub top_features: Vec<(String, f64)>,
}

pub struct PipelineOutput {
    pub report: PipelineReport,
    pub tables: Tables,
    pub model: GbdtModel,
    pub valid_predictions: Vec<f64>,
}

/// Split, featurize, train, predict and score against the logistic baseline
/// and, when the generating latents are known, the Bayes-optimal ranking.
pub fn run_pipeline(
    d: &Dataset,
    truth: Option<&GroundTruth>,
    cfg: &RunConfig,
) -> Result<PipelineOutput, PipelineError> {
    let tables = build_tables(d, cfg)?;
    let model = train(&tables.train, &tables.valid, &cfg.train)?;
    let preds = predict(&model, &tables.valid)?;
    let labels = tables
        .valid
        .labels
        .as_deref()
        .ok_or(EvalError::MissingLabels)?;
    let valid_auc = auc(&preds, labels)?;
    let baseline = logistic_baseline(&tables.train, &tables.valid)?;
    let bayes_auc = match truth {
        Some(t) => {
            let logits = tables
                .valid
                .row_keys
                .iter()
                .map(|(u, p)| {
                    let row = LabeledRow {
                        end_unit_assignment_id: u.clone(),
                        problem_id: p.clone(),
                        score: None,
                    };
                    t.row_logit(d, &row)
                })
                .collect::<Option<Vec<f64>>>();
            match logits {
                Some(l) => Some(auc(&l, labels)?),
                None => None,
            }
        }
        None => None,
    };
    let mut top = feature_importance(&model);
    top.truncate(10);
    let report = PipelineReport {
        seed: cfg.seed.unwrap_or(DEFAULT_SEED),
        n_events: d.unique_events().count(),
        n_labeled_rows: tables.train.n_rows() + tables.valid.n_rows(),
        n_train_rows: tables.train.n_rows(),
        n_valid_rows: tables.valid.n_rows(),
        n_features: tables.train.n_numeric()
            + tables.train.categorical.first().map_or(0, |c| c.len()),
        valid_auc,
        baseline_auc: baseline.valid_auc,
        bayes_auc,
        best_iteration: model.best_iteration,
        n_trees: model.trees.len(),
        top_features: top,
    };
    Ok(PipelineOutput {
        report,
        tables,
        model,
        valid_predictions: preds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        let cfg = RunConfig {
            seed: Some(3),
            ..RunConfig::default()
        };
        assert_eq!(cfg.resolve_seed(Some(1), Some("2")).unwrap(), 1);
        assert_eq!(cfg.resolve_seed(None, Some("2")).unwrap(), 2);
        assert_eq!(cfg.resolve_seed(None, None).unwrap(), 3);
        assert_eq!(
            RunConfig::default().resolve_seed(None, None).unwrap(),
            DEFAULT_SEED
        );
        assert!(cfg.resolve_seed(None, Some("x")).is_err());
    }

    #[test]
    fn unknown_keys_rejected_and_sections_optional() {
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"depth": 3}}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"train": {"max_depth": 3}}"#).unwrap();
        assert_eq!(cfg.train.max_depth, 3);
        assert_eq!(cfg.generator, GenConfig::default());
    }

    #[test]
    fn with_seed_reaches_every_section() {
        let a = RunConfig::default().with_seed(1);
        let b = RunConfig::default().with_seed(2);
        assert_ne!(a.generator.seed, b.generator.seed);
        assert_ne!(a.split.seed, b.split.seed);
        assert_ne!(a.train.seed, b.train.seed);
    }

    #[test]
    fn small_pipeline_runs() {
        let mut cfg = RunConfig::default().with_seed(5);
        cfg.generator.n_students = 40;
        cfg.generator.n_problems = 120;
        cfg.train.n_iterations = 30;
        cfg.train.learning_rate = 0.1;
        let (d, truth) = crate::synth::generate_dataset(&cfg.generator).unwrap();
        let out = run_pipeline(&d, Some(&truth), &cfg).unwrap();
        let r = &out.report;
        assert_eq!(r.n_train_rows + r.n_valid_rows, d.rows.len());
        assert!(r.bayes_auc.is_some());
        assert!(r.valid_auc > 0.5);
    }
}

/// One prediction per row key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub end_unit_assignment_id: String,
    pub problem_id: String,
    pub score_probability: f64,
}

fn csv_err(path: &std::path::Path, e: csv::Error) -> DataError {
    DataError::Csv {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn write_predictions(
    keys: &[(String, String)],
    probs: &[f64],
    path: &std::path::Path,
) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["end_unit_assignment_id", "problem_id", "score_probability"])
        .map_err(|e| csv_err(path, e))?;
    for ((u, p), prob) in keys.iter().zip(probs) {
        w.write_record([u.as_str(), p.as_str(), &prob.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_predictions(path: &std::path::Path) -> Result<Vec<PredictionRow>, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .collect::<Result<Vec<PredictionRow>, _>>()
        .map_err(|e| csv_err(path, e))
}

#[derive(Deserialize)]
struct LabelRecord {
    end_unit_assignment_id: String,
    problem_id: String,
    score: Option<u8>,
}

/// Reads a standalone labels file; empty scores become `None`.
pub fn read_labels(path: &std::path::Path) -> Result<Vec<LabeledRow>, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in r.deserialize::<LabelRecord>().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if let Some(s) = rec.score {
            if s > 1 {
                return Err(DataError::InvalidValue {
                    file: path.display().to_string(),
                    line: i as u64 + 2,
                    column: "score".into(),
                    value: s.to_string(),
                });
            }
        }
        out.push(LabeledRow {
            end_unit_assignment_id: rec.end_unit_assignment_id,
            problem_id: rec.problem_id,
            score: rec.score,
        });
    }
    Ok(out)
}

use std::fs;
use std::path::{Path, PathBuf};

use clickboost::analytics::{
    cohort_report, difficulty_report, write_cohort_csv, write_difficulty_csv, AnalyticsError,
    GroupBy, DEFAULT_MIN_OCCURRENCES,
};
use clickboost::data::{load_dataset, DataError, Dataset, DatasetPaths, LabeledRow, LoadMode};
use clickboost::eval::{auc, grid_search, split_by_student, EvalError, GridSpec};
use clickboost::features::{
    build_feature_table, read_feature_csv, write_feature_csv, ColumnMask, FeatureContext,
    FeatureError, TableRole,
};
use clickboost::gbdt::{load_model, predict, save_model, train, GbdtError, TrainParams};
use clickboost::pipeline::{
    labeled_rows, projection_for, read_labels, read_predictions, run_pipeline, write_predictions,
    PipelineError, RunConfig, SEED_ENV,
};
use clickboost::synth::{generate_dataset, write_dataset};

use crate::{Cli, Command, RowSet};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(m: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: m.into(),
        }
    }
    fn data(m: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: m.into(),
        }
    }
    fn internal(m: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: m.into(),
        }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::data(e.to_string())
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        Failure::data(e.to_string())
    }
}

impl From<GbdtError> for Failure {
    fn from(e: GbdtError) -> Self {
        match e {
            GbdtError::InvalidParams(_) => Failure::usage(e.to_string()),
            GbdtError::InvalidPermutation | GbdtError::LengthMismatch { .. } => {
                Failure::internal(e.to_string())
            }
            _ => Failure::data(e.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidSpec(_) => Failure::usage(e.to_string()),
            EvalError::Gbdt(g) => g.into(),
            _ => Failure::data(e.to_string()),
        }
    }
}

impl From<AnalyticsError> for Failure {
    fn from(e: AnalyticsError) -> Self {
        Failure::data(e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) | PipelineError::Generator(_) => Failure::usage(e.to_string()),
            PipelineError::Data(e) => e.into(),
            PipelineError::Feature(e) => e.into(),
            PipelineError::Gbdt(e) => e.into(),
            PipelineError::Eval(e) => e.into(),
            PipelineError::Analytics(e) => e.into(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::data(format!("{}: {e}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{what} {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("{what} {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::internal(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_failure(path, e))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

/// Config file (or defaults) with the resolved global seed applied.
fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    let env = std::env::var(SEED_ENV).ok();
    let seed = cfg.resolve_seed(cli.seed, env.as_deref())?;
    let cfg = cfg.with_seed(seed);
    cfg.validate()?;
    Ok(cfg)
}

fn load_data(dir: &Path, lenient: bool) -> Result<Dataset, Failure> {
    let mode = if lenient {
        LoadMode::Lenient
    } else {
        LoadMode::Strict
    };
    let (d, stats) = load_dataset(&DatasetPaths::in_dir(dir), mode)?;
    if stats.drop_count > 0 {
        eprintln!(
            "warning: skipped {} events with unknown actions",
            stats.drop_count
        );
    }
    Ok(d)
}

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::internal(e.to_string()))?;
    }
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Generate { out } => generate(&cfg, &out),
        Command::Featurize {
            data,
            rows,
            reuse_mask,
            lenient,
            out,
        } => featurize(&cfg, &data, rows, reuse_mask.as_deref(), lenient, &out),
        Command::Train {
            features,
            valid,
            params,
            out,
        } => train_cmd(&cfg, &features, &valid, params.as_deref(), &out),
        Command::Predict {
            model,
            features,
            out,
        } => predict_cmd(&model, &features, &out),
        Command::Evaluate { preds, labels } => evaluate(&preds, &labels),
        Command::Analyze {
            data,
            min_occurrences,
            lenient,
            out,
        } => analyze(&load_data(&data, lenient)?, min_occurrences, &out),
        Command::Search {
            features,
            valid,
            grid,
            budget,
            out,
        } => search(
            &cfg,
            &features,
            &valid,
            grid.as_deref(),
            budget,
            out.as_deref(),
        ),
        Command::Pipeline { data, out } => pipeline(&cfg, data.as_deref(), out.as_deref()),
    }
}

fn generate(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let (d, truth) = generate_dataset(&cfg.generator).map_err(|e| Failure::usage(e.to_string()))?;
    create_dir(out)?;
    write_dataset(&d, out)?;
    let gt = out.join("ground_truth.csv");
    truth.write_csv(&gt).map_err(|e| io_failure(&gt, e))
}

fn featurize(
    cfg: &RunConfig,
    data: &Path,
    which: RowSet,
    reuse_mask: Option<&Path>,
    lenient: bool,
    out: &Path,
) -> Result<(), Failure> {
    let d = load_data(data, lenient)?;
    let labeled = labeled_rows(&d);
    let rows: Vec<LabeledRow> = match which {
        RowSet::All => labeled,
        RowSet::Train | RowSet::Valid => {
            let (tr, va) = split_by_student(&d, &labeled, &cfg.split)?;
            let ix = if which == RowSet::Train { tr } else { va };
            ix.into_iter().map(|i| labeled[i].clone()).collect()
        }
    };
    let ctx = FeatureContext::new(&d);
    create_dir(out)?;
    match reuse_mask {
        Some(path) => {
            let mask = ColumnMask::load(path)?;
            let (table, _) =
                build_feature_table(&ctx, &rows, &mask.projection, TableRole::Eval(&mask))?;
            write_feature_csv(&table, &out.join("features.csv"))?;
        }
        None => {
            let proj = projection_for(&d)?;
            let role = TableRole::Train {
                threshold: cfg.correlation_threshold,
            };
            let (table, mask) = build_feature_table(&ctx, &rows, &proj, role)?;
            write_feature_csv(&table, &out.join("features.csv"))?;
            mask.save(&out.join("mask.json"))?;
        }
    }
    Ok(())
}

fn train_params(cfg: &RunConfig, params: Option<&Path>) -> Result<TrainParams, Failure> {
    match params {
        Some(p) => {
            let mut tp: TrainParams = read_json(p, "params")?;
            tp.seed = cfg.train.seed;
            tp.validate()?;
            Ok(tp)
        }
        None => Ok(cfg.train.clone()),
    }
}

fn train_cmd(
    cfg: &RunConfig,
    features: &Path,
    valid: &Path,
    params: Option<&Path>,
    out: &Path,
) -> Result<(), Failure> {
    let tp = train_params(cfg, params)?;
    let model = train(&read_feature_csv(features)?, &read_feature_csv(valid)?, &tp)?;
    save_model(&model, out)?;
    Ok(())
}

fn predict_cmd(model: &Path, features: &Path, out: &Path) -> Result<(), Failure> {
    let model = load_model(model)?;
    let table = read_feature_csv(features)?;
    let probs = predict(&model, &table)?;
    write_predictions(&table.row_keys, &probs, out)?;
    Ok(())
}

fn evaluate(preds: &Path, labels: &Path) -> Result<(), Failure> {
    let preds = read_predictions(preds)?;
    let labels = read_labels(labels)?;
    let truth: std::collections::HashMap<(&str, &str), Option<u8>> = labels
        .iter()
        .map(|r| {
            (
                (r.end_unit_assignment_id.as_str(), r.problem_id.as_str()),
                r.score,
            )
        })
        .collect();
    let mut scores = Vec::new();
    let mut ys = Vec::new();
    for p in &preds {
        let key = (p.end_unit_assignment_id.as_str(), p.problem_id.as_str());
        match truth.get(&key) {
            Some(Some(y)) => {
                scores.push(p.score_probability);
                ys.push(f64::from(*y));
            }
            Some(None) => {}
            None => {
                return Err(Failure::data(format!(
                    "no label for prediction ({}, {})",
                    key.0, key.1
                )))
            }
        }
    }
    let n_pos = ys.iter().filter(|&&y| y > 0.5).count();
    let value = auc(&scores, &ys)?;
    let report = serde_json::json!({ "auc": value, "n_pos": n_pos, "n_neg": ys.len() - n_pos });
    println!("{report}");
    Ok(())
}

fn analyze(d: &Dataset, min_occurrences: usize, out: &Path) -> Result<(), Failure> {
    create_dir(out)?;
    for g in GroupBy::ALL {
        let rows = difficulty_report(d, g, min_occurrences)?;
        write_difficulty_csv(&rows, &out.join(format!("{}.csv", g.file_stem())))?;
    }
    write_cohort_csv(&cohort_report(d)?, &out.join("cohort_comparison.csv"))?;
    Ok(())
}

fn search(
    cfg: &RunConfig,
    features: &Path,
    valid: &Path,
    grid: Option<&Path>,
    budget: Option<usize>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let grid: GridSpec = match grid {
        Some(p) => read_json(p, "grid")?,
        None => cfg.grid.clone(),
    };
    let budget = budget.unwrap_or(cfg.search_budget);
    let trials = grid_search(
        &read_feature_csv(features)?,
        &read_feature_csv(valid)?,
        &grid,
        budget,
        &cfg.train,
        cfg.search_seed(),
    )?;
    let ranking = serde_json::to_value(&trials).map_err(|e| Failure::internal(e.to_string()))?;
    match out {
        Some(p) => write_json(&ranking, p),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(&ranking).unwrap_or_default()
            );
            Ok(())
        }
    }
}

fn pipeline(cfg: &RunConfig, data: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let out: PathBuf = out.map_or_else(|| cfg.paths.out.clone(), Path::to_path_buf);
    create_dir(&out)?;
    let (d, truth) = match data {
        Some(dir) => (load_data(dir, false)?, None),
        None => {
            let (d, truth) =
                generate_dataset(&cfg.generator).map_err(|e| Failure::usage(e.to_string()))?;
            let dir = out.join("data");
            create_dir(&dir)?;
            write_dataset(&d, &dir)?;
            let gt = dir.join("ground_truth.csv");
            truth.write_csv(&gt).map_err(|e| io_failure(&gt, e))?;
            (d, Some(truth))
        }
    };
    let result = run_pipeline(&d, truth.as_ref(), cfg)?;
    let feat = out.join("features");
    create_dir(&feat)?;
    write_feature_csv(&result.tables.train, &feat.join("train.csv"))?;
    write_feature_csv(&result.tables.valid, &feat.join("valid.csv"))?;
    result.tables.mask.save(&feat.join("mask.json"))?;
    save_model(&result.model, &out.join("model.json"))?;
    write_predictions(
        &result.tables.valid.row_keys,
        &result.valid_predictions,
        &out.join("preds.csv"),
    )?;
    analyze(&d, DEFAULT_MIN_OCCURRENCES, &out.join("reports"))?;
    write_json(&result.report, &out.join("report.json"))?;
    let summary = serde_json::json!({
        "valid_auc": result.report.valid_auc,
        "baseline_auc": result.report.baseline_auc,
        "bayes_auc": result.report.bayes_auc,
        "best_iteration": result.report.best_iteration,
    });
    println!("{summary}");
    Ok(())
}

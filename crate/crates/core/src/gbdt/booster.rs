use std::fs;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ots::OtsEncoder;
use super::tree::{grow_presorted, presort, Node, Tree};
use super::weights::{bayesian_bootstrap_weights, class_weight_values, cross_entropy};
use super::{prob, GbdtError, OtsTable, TrainParams};
use crate::features::{FeatureTable, CATEGORICAL_NAMES};
use crate::rng::{derive_seed, seeded};

pub const MODEL_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub version: u64,
    pub params: TrainParams,
    /// Mean training label; also the starting probability.
    pub prior: f64,
    pub ots_tables: Vec<OtsTable>,
    pub trees: Vec<Tree>,
    /// Number of leading trees used for prediction.
    pub best_iteration: usize,
    /// Numeric column names followed by the categorical column names.
    pub feature_names: Vec<String>,
    pub n_numeric: usize,
    /// Weighted cross-entropy after 0, 1, ... trees.
    pub train_ce: Vec<f64>,
    pub valid_ce: Vec<f64>,
}

impl GbdtModel {
    pub fn base_logit(&self) -> f64 {
        (self.prior / (1.0 - self.prior)).ln()
    }

    /// Numeric values followed by frozen categorical encodings.
    fn encode_row(&self, t: &FeatureTable, i: usize) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.feature_names.len());
        row.extend_from_slice(&t.numeric[i]);
        row.extend(
            self.ots_tables
                .iter()
                .zip(&t.categorical[i])
                .map(|(tab, v)| tab.encode(v)),
        );
        row
    }

    fn check_columns(&self, t: &FeatureTable) -> Result<(), GbdtError> {
        if t.numeric_names[..] != self.feature_names[..self.n_numeric] {
            return Err(GbdtError::ColumnMismatch(
                "table numeric columns differ from the model's".into(),
            ));
        }
        Ok(())
    }
}

fn labels_of(t: &FeatureTable) -> Result<&[f64], GbdtError> {
    t.labels.as_deref().ok_or(GbdtError::MissingLabels)
}

fn encode_frozen(tables: &[OtsTable], t: &FeatureTable) -> Vec<Vec<f64>> {
    (0..t.n_rows())
        .map(|i| {
            let mut row = t.numeric[i].clone();
            row.extend(
                tables
                    .iter()
                    .zip(&t.categorical[i])
                    .map(|(tab, v)| tab.encode(v)),
            );
            row
        })
        .collect()
}

fn ce_of(logits: &[f64], labels: &[f64], weights: &[f64]) -> f64 {
    let p: Vec<f64> = logits.iter().map(|&l| prob(l)).collect();
    cross_entropy(&p, labels, weights)
}

/// Boosts trees on `train`, tracking validation cross-entropy for early
/// stopping. The returned model keeps every grown tree and predicts with the
/// prefix that minimized validation loss.
pub fn train(
    train: &FeatureTable,
    valid: &FeatureTable,
    params: &TrainParams,
) -> Result<GbdtModel, GbdtError> {
    params.validate()?;
    if train.numeric_names != valid.numeric_names {
        return Err(GbdtError::ColumnMismatch(
            "train and valid tables have different numeric columns".into(),
        ));
    }
    let n = train.n_rows();
    if n == 0 {
        return Err(GbdtError::EmptyTable);
    }
    let y = labels_of(train)?;
    let yv = labels_of(valid)?;
    let prior = y.iter().sum::<f64>() / n as f64;
    let unit = vec![1.0; n];
    let class_w = class_weight_values(y, &unit)?;
    let train_ce_w: Vec<f64> = y.iter().map(|&v| class_w[usize::from(v > 0.5)]).collect();
    let valid_ce_w: Vec<f64> = yv.iter().map(|&v| class_w[usize::from(v > 0.5)]).collect();

    let mut perm_rng = seeded(derive_seed(params.seed, 1));
    let mut weight_rng = seeded(derive_seed(params.seed, 2));
    let mut noise_rng = seeded(derive_seed(params.seed, 3));

    let cat_cols: Vec<Vec<&str>> = (0..CATEGORICAL_NAMES.len())
        .map(|c| train.categorical.iter().map(|r| r[c].as_str()).collect())
        .collect();
    let encoder = OtsEncoder::fit(
        &CATEGORICAL_NAMES,
        &cat_cols,
        y,
        params.s_permutations,
        params.ots_alpha,
        prior,
        &mut perm_rng,
    )?;

    let numeric_cols: Vec<Vec<f64>> = (0..train.n_numeric()).map(|j| train.column(j)).collect();
    let numeric_refs: Vec<&[f64]> = numeric_cols.iter().map(|c| c.as_slice()).collect();
    let numeric_sorted = presort(&numeric_refs, n);
    let ots_sorted: Vec<Vec<Vec<u32>>> = encoder
        .encodings
        .iter()
        .map(|cols| {
            let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            presort(&refs, n)
        })
        .collect();

    let valid_rows = encode_frozen(&encoder.tables, valid);
    let base = (prior / (1.0 - prior)).ln();
    let mut logits = vec![base; n];
    let mut valid_logits = vec![base; valid.n_rows()];
    let mut train_ce = vec![ce_of(&logits, y, &train_ce_w)];
    let mut valid_ce = vec![ce_of(&valid_logits, yv, &valid_ce_w)];
    let mut best = (0usize, valid_ce[0]);
    let tree_params = params.tree_params();
    let all_rows: Vec<u32> = (0..n as u32).collect();
    let mut trees = Vec::new();

    for m in 0..params.n_iterations {
        let r = m % params.s_permutations;
        let wx = bayesian_bootstrap_weights(n, params.bagging_temperature, &mut weight_rng);
        let wy = class_weight_values(y, &wx)?;
        let w: Vec<f64> = wx
            .iter()
            .zip(y)
            .map(|(&a, &v)| a * wy[usize::from(v > 0.5)])
            .collect();
        let g: Vec<f64> = logits
            .iter()
            .zip(y)
            .map(|(&l, &v)| {
                let grad = v - prob(l);
                if params.langevin_noise > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut noise_rng);
                    grad + params.langevin_noise * z
                } else {
                    grad
                }
            })
            .collect();

        let mut columns = numeric_refs.clone();
        columns.extend(encoder.encodings[r].iter().map(|c| c.as_slice()));
        let mut sorted = numeric_sorted.clone();
        sorted.extend(ots_sorted[r].iter().cloned());
        let grown = grow_presorted(&columns, all_rows.clone(), sorted, &g, &w, &tree_params);
        let mut tree = grown.tree;
        tree.weight = params.learning_rate;

        for (row, leaf) in grown.leaf_of {
            if let Node::Leaf { value } = tree.nodes[leaf as usize] {
                logits[row as usize] += tree.weight * value;
            }
        }
        for (l, row) in valid_logits.iter_mut().zip(&valid_rows) {
            *l += tree.predict(row);
        }
        trees.push(tree);
        train_ce.push(ce_of(&logits, y, &train_ce_w));
        let v = ce_of(&valid_logits, yv, &valid_ce_w);
        valid_ce.push(v);
        if v < best.1 {
            best = (m + 1, v);
        } else if m + 1 - best.0 >= params.early_stopping_rounds {
            break;
        }
    }

    let mut feature_names = train.numeric_names.clone();
    feature_names.extend(CATEGORICAL_NAMES.iter().map(|s| s.to_string()));
    Ok(GbdtModel {
        version: MODEL_VERSION,
        params: params.clone(),
        prior,
        ots_tables: encoder.tables,
        trees,
        best_iteration: best.0,
        feature_names,
        n_numeric: train.n_numeric(),
        train_ce,
        valid_ce,
    })
}

/// Probability of a correct score for every row of `t`.
pub fn predict(model: &GbdtModel, t: &FeatureTable) -> Result<Vec<f64>, GbdtError> {
    model.check_columns(t)?;
    let base = model.base_logit();
    let trees = &model.trees[..model.best_iteration];
    Ok((0..t.n_rows())
        .map(|i| {
            let row = model.encode_row(t, i);
            let logit = trees.iter().fold(base, |acc, tr| acc + tr.predict(&row));
            prob(logit)
        })
        .collect())
}

/// Total split gain per feature over the trees used for prediction,
/// normalized to sum to 1 and sorted in descending order.
pub fn feature_importance(model: &GbdtModel) -> Vec<(String, f64)> {
    let mut gains = vec![0.0; model.feature_names.len()];
    for tree in &model.trees[..model.best_iteration] {
        for node in &tree.nodes {
            if let Node::Split { feature, gain, .. } = node {
                gains[*feature] += gain;
            }
        }
    }
    let total: f64 = gains.iter().sum();
    if total > 0.0 {
        gains.iter_mut().for_each(|g| *g /= total);
    }
    let mut out: Vec<(String, f64)> = model.feature_names.iter().cloned().zip(gains).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

pub fn save_model(model: &GbdtModel, path: &Path) -> Result<(), GbdtError> {
    let json = serde_json::to_string(model).map_err(|e| GbdtError::CorruptModel(e.to_string()))?;
    fs::write(path, json).map_err(|source| GbdtError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u64,
}

pub fn load_model(path: &Path) -> Result<GbdtModel, GbdtError> {
    let text = fs::read_to_string(path).map_err(|source| GbdtError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let probe: VersionProbe =
        serde_json::from_str(&text).map_err(|e| GbdtError::CorruptModel(e.to_string()))?;
    if probe.version != MODEL_VERSION {
        return Err(GbdtError::VersionMismatch {
            found: probe.version,
            supported: MODEL_VERSION,
        });
    }
    let model: GbdtModel =
        serde_json::from_str(&text).map_err(|e| GbdtError::CorruptModel(e.to_string()))?;
    if model.best_iteration > model.trees.len()
        || model.ots_tables.len() != CATEGORICAL_NAMES.len()
        || model.n_numeric + CATEGORICAL_NAMES.len() != model.feature_names.len()
    {
        return Err(GbdtError::CorruptModel("inconsistent model fields".into()));
    }
    for tree in &model.trees {
        for node in &tree.nodes {
            let ok = match node {
                Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } => {
                    *feature < model.feature_names.len()
                        && (*left as usize) < tree.nodes.len()
                        && (*right as usize) < tree.nodes.len()
                }
                Node::Leaf { value } => value.is_finite(),
            };
            if !ok {
                return Err(GbdtError::CorruptModel("invalid tree node".into()));
            }
        }
    }
    Ok(model)
}

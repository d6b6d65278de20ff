//! Gradient-boosted decision trees for binary targets.
//!
//! Categorical columns are encoded with ordered target statistics computed
//! along random permutations of the training rows; trees are grown leaf-wise
//! on Bayesian-bootstrap and class-balanced weights, and boosting minimizes
//! weighted cross-entropy with early stopping on a validation table.

mod booster;
mod ots;
mod tree;
mod weights;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use booster::{
    feature_importance, load_model, predict, save_model, train, GbdtModel, MODEL_VERSION,
};
pub use ots::{compute_ots, CategoryStat, OtsEncoder, OtsTable};
pub use tree::{
    find_best_split, grow_tree, leaf_value, Node, SplitCandidate, Tree, TreeParams, SPLIT_EPS,
};
pub use weights::{bayesian_bootstrap_weights, class_weights, cross_entropy, PROB_CLIP};

/// Logits are clipped to this magnitude before the sigmoid.
pub const LOGIT_CLIP: f64 = 30.0;

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("permutation is not a bijection on the rows")]
    InvalidPermutation,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("table has no labels")]
    MissingLabels,
    #[error("column mismatch: {0}")]
    ColumnMismatch(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("training table is empty")]
    EmptyTable,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model version {found} is not supported (expected {supported})")]
    VersionMismatch { found: u64, supported: u64 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub n_iterations: usize,
    pub learning_rate: f64,
    pub l2_leaf_reg: f64,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub s_permutations: usize,
    pub bagging_temperature: f64,
    pub langevin_noise: f64,
    pub early_stopping_rounds: usize,
    pub ots_alpha: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            n_iterations: 5000,
            learning_rate: 0.01,
            l2_leaf_reg: 200.0,
            max_depth: 10,
            max_leaves: 31,
            s_permutations: 4,
            bagging_temperature: 0.2,
            langevin_noise: 0.0,
            early_stopping_rounds: 100,
            ots_alpha: 0.1,
            seed: 7,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |m: String| Err(GbdtError::InvalidParams(m));
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !finite_pos(self.learning_rate) {
            return bad(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if !finite_nonneg(self.l2_leaf_reg) {
            return bad(format!(
                "l2_leaf_reg must be >= 0, got {}",
                self.l2_leaf_reg
            ));
        }
        if self.max_leaves == 0 {
            return bad("max_leaves must be >= 1".into());
        }
        if self.s_permutations == 0 {
            return bad("s_permutations must be >= 1".into());
        }
        if self.early_stopping_rounds == 0 {
            return bad("early_stopping_rounds must be >= 1".into());
        }
        if !finite_nonneg(self.bagging_temperature) {
            return bad(format!(
                "bagging_temperature must be >= 0, got {}",
                self.bagging_temperature
            ));
        }
        if !finite_nonneg(self.langevin_noise) {
            return bad(format!(
                "langevin_noise must be >= 0, got {}",
                self.langevin_noise
            ));
        }
        if !finite_pos(self.ots_alpha) {
            return bad(format!("ots_alpha must be > 0, got {}", self.ots_alpha));
        }
        Ok(())
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            max_leaves: self.max_leaves,
            l2: self.l2_leaf_reg,
        }
    }
}

pub(crate) fn prob(logit: f64) -> f64 {
    crate::rng::sigmoid(logit.clamp(-LOGIT_CLIP, LOGIT_CLIP))
}

//! Student-disjoint splitting, ROC-AUC, randomized grid search and a
//! logistic-regression baseline.

mod auc;
mod logistic;
mod search;
mod split;

use thiserror::Error;

use crate::gbdt::GbdtError;

pub use auc::auc;
pub use logistic::{logistic_baseline, LogisticFit};
pub use search::{grid_search, GridSpec, Trial};
pub use split::{split_by_student, SplitSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("table has no labels")]
    MissingLabels,
    #[error("cannot resolve the student of end-unit assignment {0}")]
    UnresolvableStudent(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
}

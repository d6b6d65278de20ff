use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auc, EvalError};
use crate::features::FeatureTable;
use crate::gbdt::{predict, train, TrainParams};
use crate::rng::seeded;

/// Candidate values per hyperparameter. `random_strength` is applied as the
/// Langevin gradient-noise standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub depth: Vec<usize>,
    pub iterations: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub l2_leaf_reg: Vec<f64>,
    pub bagging_temperature: Vec<f64>,
    pub random_strength: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            depth: (1..=10).collect(),
            iterations: vec![100, 250, 500, 1000],
            learning_rate: vec![0.001, 0.01, 0.03, 0.1, 0.2, 0.3],
            l2_leaf_reg: vec![1.0, 3.0, 5.0, 10.0, 100.0],
            bagging_temperature: vec![0.03, 0.09, 0.25, 0.75],
            random_strength: vec![0.2, 0.5, 0.8],
        }
    }
}

impl GridSpec {
    fn dims(&self) -> [usize; 6] {
        [
            self.depth.len(),
            self.iterations.len(),
            self.learning_rate.len(),
            self.l2_leaf_reg.len(),
            self.bagging_temperature.len(),
            self.random_strength.len(),
        ]
    }

    pub fn size(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.dims().contains(&0) {
            return Err(EvalError::InvalidSpec(
                "every grid list must be non-empty".into(),
            ));
        }
        Ok(())
    }

    /// The grid point with mixed-radix index `k` applied on top of `base`.
    pub fn point(&self, k: usize, base: &TrainParams) -> TrainParams {
        let mut digits = [0usize; 6];
        let mut rest = k;
        for (d, n) in digits.iter_mut().zip(self.dims()).rev() {
            *d = rest % n;
            rest /= n;
        }
        TrainParams {
            max_depth: self.depth[digits[0]],
            n_iterations: self.iterations[digits[1]],
            learning_rate: self.learning_rate[digits[2]],
            l2_leaf_reg: self.l2_leaf_reg[digits[3]],
            bagging_temperature: self.bagging_temperature[digits[4]],
            langevin_noise: self.random_strength[digits[5]],
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// 0 is the base configuration; later trials are sampled grid points.
    pub index: usize,
    pub params: TrainParams,
    pub auc: f64,
    pub best_iteration: usize,
}

/// Evaluates `budget` configurations by validation AUC: `base` itself plus
/// `budget - 1` grid points drawn without replacement with `seed`. Returns
/// trials ranked by AUC, descending, ties by trial index.
pub fn grid_search(
    train_t: &FeatureTable,
    valid_t: &FeatureTable,
    grid: &GridSpec,
    budget: usize,
    base: &TrainParams,
    seed: u64,
) -> Result<Vec<Trial>, EvalError> {
    grid.validate()?;
    if budget == 0 {
        return Err(EvalError::InvalidSpec("search budget must be >= 1".into()));
    }
    let labels = valid_t.labels.as_deref().ok_or(EvalError::MissingLabels)?;
    let n_sampled = (budget - 1).min(grid.size());
    let picks = index::sample(&mut seeded(seed), grid.size(), n_sampled).into_vec();
    let candidates: Vec<TrainParams> = std::iter::once(base.clone())
        .chain(picks.iter().map(|&k| grid.point(k, base)))
        .collect();

    let mut trials = candidates
        .into_par_iter()
        .enumerate()
        .map(|(i, params)| {
            let model = train(train_t, valid_t, &params)?;
            let scores = predict(&model, valid_t)?;
            Ok(Trial {
                index: i,
                auc: auc(&scores, labels)?,
                best_iteration: model.best_iteration,
                params,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    trials.sort_by(|a, b| b.auc.total_cmp(&a.auc).then(a.index.cmp(&b.index)));
    Ok(trials)
}

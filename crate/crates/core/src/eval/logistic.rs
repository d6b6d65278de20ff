use std::collections::BTreeMap;

use super::{auc, EvalError};
use crate::features::FeatureTable;
use crate::gbdt::class_weights;
use crate::rng::sigmoid;

/// L2 penalty on the (standardized) feature weights; the bias is free.
pub const LOGISTIC_L2: f64 = 1e-3;
pub const LOGISTIC_TOL: f64 = 1e-6;
pub const LOGISTIC_MAX_STEPS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub valid_auc: f64,
    pub steps: usize,
    pub grad_norm: f64,
}

/// Numeric columns plus label-encoded categoricals, standardized with the
/// training mean and deviation.
struct Design {
    codes: Vec<BTreeMap<String, f64>>,
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Design {
    fn fit(t: &FeatureTable) -> Self {
        let n_cat = t.categorical.first().map_or(0, |r| r.len());
        let codes: Vec<BTreeMap<String, f64>> = (0..n_cat)
            .map(|c| {
                let mut m: BTreeMap<String, f64> =
                    t.categorical.iter().map(|r| (r[c].clone(), 0.0)).collect();
                for (i, v) in m.values_mut().enumerate() {
                    *v = i as f64;
                }
                m
            })
            .collect();
        let mut design = Self {
            codes,
            mean: Vec::new(),
            sd: Vec::new(),
        };
        let raw: Vec<Vec<f64>> = (0..t.n_rows()).map(|i| design.raw_row(t, i)).collect();
        let n = raw.len() as f64;
        let p = raw.first().map_or(0, |r| r.len());
        for j in 0..p {
            let mean = raw.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = raw.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            design.mean.push(mean);
            design.sd.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        design
    }

    fn raw_row(&self, t: &FeatureTable, i: usize) -> Vec<f64> {
        let mut row = t.numeric[i].clone();
        for (c, m) in self.codes.iter().enumerate() {
            // unseen categories get the next free code
            row.push(
                m.get(&t.categorical[i][c])
                    .copied()
                    .unwrap_or(m.len() as f64),
            );
        }
        row
    }

    fn matrix(&self, t: &FeatureTable) -> Vec<Vec<f64>> {
        (0..t.n_rows())
            .map(|i| {
                let mut r = self.raw_row(t, i);
                for ((x, m), s) in r.iter_mut().zip(&self.mean).zip(&self.sd) {
                    *x = (*x - m) / s;
                }
                r
            })
            .collect()
    }
}

/// Mean log-loss plus `l2 / 2 * |w|^2` and its gradient; the last
/// coordinate of `theta` is the bias.
pub(crate) fn objective(x: &[Vec<f64>], y: &[f64], theta: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let p = theta.len() - 1;
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; p + 1];
    for (row, &yi) in x.iter().zip(y) {
        let z = theta[p] + row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
        // log(1 + e^z) - y z, computed stably
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - yi * z;
        let r = sigmoid(z) - yi;
        for (g, a) in grad.iter_mut().zip(row) {
            *g += r * a;
        }
        grad[p] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for j in 0..p {
        loss += 0.5 * l2 * theta[j] * theta[j];
        grad[j] += l2 * theta[j];
    }
    (loss, grad)
}

/// Gradient descent with Armijo backtracking until the gradient norm drops
/// below `tol` or `max_steps` is reached.
pub(crate) fn minimize(
    x: &[Vec<f64>],
    y: &[f64],
    l2: f64,
    tol: f64,
    max_steps: usize,
) -> (Vec<f64>, usize, f64) {
    let dim = x.first().map_or(0, |r| r.len()) + 1;
    let mut theta = vec![0.0; dim];
    let (mut f, mut g) = objective(x, y, &theta, l2);
    let mut step = 1.0;
    let mut steps = 0;
    loop {
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2.sqrt() < tol || steps >= max_steps {
            return (theta, steps, gn2.sqrt());
        }
        loop {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t - step * gi).collect();
            let (fc, gc) = objective(x, y, &cand, l2);
            if fc <= f - 0.5 * step * gn2 || step < 1e-12 {
                theta = cand;
                f = fc;
                g = gc;
                break;
            }
            step *= 0.5;
        }
        step *= 2.0;
        steps += 1;
    }
}

/// L2-regularized logistic regression on `train`, scored by AUC on `valid`.
pub fn logistic_baseline(
    train: &FeatureTable,
    valid: &FeatureTable,
) -> Result<LogisticFit, EvalError> {
    let y = train.labels.as_deref().ok_or(EvalError::MissingLabels)?;
    let yv = valid.labels.as_deref().ok_or(EvalError::MissingLabels)?;
    class_weights(y, &vec![1.0; y.len()]).map_err(|_| EvalError::SingleClass)?;
    let design = Design::fit(train);
    let x = design.matrix(train);
    let (theta, steps, grad_norm) = minimize(&x, y, LOGISTIC_L2, LOGISTIC_TOL, LOGISTIC_MAX_STEPS);
    let p = theta.len() - 1;
    let scores: Vec<f64> = design
        .matrix(valid)
        .iter()
        .map(|r| theta[p] + r.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    Ok(LogisticFit {
        valid_auc: auc(&scores, yv)?,
        bias: theta[p],
        weights: theta[..p].to_vec(),
        steps,
        grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn table(x: Vec<Vec<f64>>, y: Vec<f64>) -> FeatureTable {
        let n = x.len();
        FeatureTable {
            row_keys: (0..n).map(|i| (format!("u{i}"), "p".into())).collect(),
            numeric_names: (0..x[0].len()).map(|j| format!("x{j}")).collect(),
            numeric: x,
            categorical: vec![std::array::from_fn(|_| "c".to_string()); n],
            labels: Some(y),
        }
    }

    #[test]
    fn separable_data_scores_one() {
        let mut rng = seeded(1);
        let mk = |rng: &mut crate::rng::Rng64| {
            let x: Vec<Vec<f64>> = (0..200)
                .map(|_| {
                    // class margin of 0.4 on the first coordinate
                    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    vec![side * (0.2 + 0.8 * rng.random::<f64>()), rng.random()]
                })
                .collect();
            let y = x.iter().map(|r| f64::from(u8::from(r[0] > 0.0))).collect();
            table(x, y)
        };
        let (tr, va) = (mk(&mut rng), mk(&mut rng));
        assert_eq!(logistic_baseline(&tr, &va).unwrap().valid_auc, 1.0);
    }

    #[test]
    fn noise_labels_near_half() {
        let mut rng = seeded(2);
        let mut mk = || {
            let x: Vec<Vec<f64>> = (0..10_000)
                .map(|_| vec![rng.random(), rng.random()])
                .collect();
            let y = (0..10_000)
                .map(|_| f64::from(u8::from(rng.random::<bool>())))
                .collect();
            table(x, y)
        };
        let (tr, va) = (mk(), mk());
        let a = logistic_baseline(&tr, &va).unwrap().valid_auc;
        assert!((a - 0.5).abs() < 0.05, "{a}");
    }

    #[test]
    fn optimum_has_zero_finite_difference_gradient() {
        let mut rng = seeded(3);
        let x: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..3).map(|_| rng.random::<f64>() - 0.5).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| f64::from(u8::from(rng.random::<f64>() < sigmoid(2.0 * r[0] - r[1]))))
            .collect();
        let (theta, _, _) = minimize(&x, &y, LOGISTIC_L2, LOGISTIC_TOL, LOGISTIC_MAX_STEPS);
        let h = 1e-6;
        for j in 0..theta.len() {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (objective(&x, &y, &up, LOGISTIC_L2).0
                - objective(&x, &y, &dn, LOGISTIC_L2).0)
                / (2.0 * h);
            assert!(fd.abs() < 1e-4, "coordinate {j}: {fd}");
        }
    }
}

use rand::distr::Open01;
use rand::Rng;

use super::GbdtError;

/// Bayesian bootstrap object weights `(-ln U)^t`, `U ~ Uniform(0, 1)`.
/// `t = 0` gives exactly 1 for every object without consuming randomness.
pub fn bayesian_bootstrap_weights<R: Rng>(n: usize, temperature: f64, rng: &mut R) -> Vec<f64> {
    if temperature == 0.0 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            (-u.ln()).powf(temperature)
        })
        .collect()
}

/// Square-root balanced class weights: each object of class `c` gets
/// `sqrt(max_k W_k / W_c)` where `W_k` sums the input weights of class `k`.
pub fn class_weights(labels: &[f64], input_weights: &[f64]) -> Result<Vec<f64>, GbdtError> {
    if labels.len() != input_weights.len() {
        return Err(GbdtError::LengthMismatch {
            expected: labels.len(),
            found: input_weights.len(),
        });
    }
    let per_class = class_weight_values(labels, input_weights)?;
    Ok(labels
        .iter()
        .map(|&y| per_class[usize::from(y > 0.5)])
        .collect())
}

/// `[weight of class 0, weight of class 1]`.
pub(crate) fn class_weight_values(
    labels: &[f64],
    input_weights: &[f64],
) -> Result<[f64; 2], GbdtError> {
    let mut totals = [0.0f64; 2];
    let mut present = [false; 2];
    for (&y, &w) in labels.iter().zip(input_weights) {
        let c = usize::from(y > 0.5);
        totals[c] += w;
        present[c] = true;
    }
    if !(present[0] && present[1]) || totals[0] <= 0.0 || totals[1] <= 0.0 {
        return Err(GbdtError::SingleClass);
    }
    let max = totals[0].max(totals[1]);
    Ok([(max / totals[0]).sqrt(), (max / totals[1]).sqrt()])
}

/// Probabilities are clipped to this distance from 0 and 1 inside the loss.
pub const PROB_CLIP: f64 = 1e-12;

/// Weighted binary cross-entropy normalized by the total weight.
pub fn cross_entropy(probs: &[f64], labels: &[f64], weights: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&p, &y), &w) in probs.iter().zip(labels).zip(weights) {
        let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        num += w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        den += w;
    }
    -num / den
}

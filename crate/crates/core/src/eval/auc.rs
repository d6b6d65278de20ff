use super::EvalError;

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, ties counting one half. Counts are accumulated
/// as integers over tie groups, so the only rounding is the final division.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the Mann-Whitney U statistic
    let mut u2: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let (mut pos, mut neg) = (0u128, 0u128);
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] > 0.5 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        u2 += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    let n_neg = neg_below;
    let n_pos = scores.len() as u128 - n_neg;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    Ok(u2 as f64 / (2 * n_pos * n_neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let a = auc(&[0.1, 0.4, 0.35, 0.8], &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(a, 0.75);
        assert_eq!(
            auc(&[0.3; 6], &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap(),
            0.5
        );
        assert_eq!(
            auc(&[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]).unwrap(),
            1.0
        );
        assert_eq!(
            auc(&[0.1, 0.2, 0.8, 0.9], &[1.0, 1.0, 0.0, 0.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(
            auc(&[0.1, 0.2], &[1.0, 1.0]),
            Err(EvalError::SingleClass)
        ));
        assert!(matches!(
            auc(&[0.1], &[1.0, 0.0]),
            Err(EvalError::LengthMismatch(1, 2))
        ));
    }
}

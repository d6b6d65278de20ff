use statrs::function::beta::beta_reg;

use super::AnalyticsError;

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unequal-variance t statistic of `a - b` and its two-sided
/// p-value under the Welch-Satterthwaite degrees of freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<(f64, f64), AnalyticsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(AnalyticsError::DegenerateSample);
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(AnalyticsError::DegenerateSample);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let p = beta_reg(df / 2.0, 0.5, df / (df + t * t));
    Ok((t, p.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.0, 5.0];
        let (t, p) = welch_t(&a, &a).unwrap();
        assert_eq!(t, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_constant_samples_far_apart() {
        let (_, p) = welch_t(&[0.0; 4], &[10.0, 10.0, 10.0, 10.0001]).unwrap();
        assert!(p < 1e-6, "{p}");
    }

    #[test]
    fn swap_symmetry() {
        let a = [1.0, 4.0, 2.0, 8.0, 3.0];
        let b = [2.0, 2.5, 3.0];
        let (t1, p1) = welch_t(&a, &b).unwrap();
        let (t2, p2) = welch_t(&b, &a).unwrap();
        assert_eq!(t1, -t2);
        assert!((p1 - p2).abs() < 1e-15);
    }

    #[test]
    fn known_value() {
        // equal sizes and variances: df = 18; reference p from the t distribution
        let a: Vec<f64> = (0..10).map(|i| f64::from(i % 2) * 2.0 - 1.0).collect();
        let shift = (2.0 * 10.0 / 9.0 / 10.0f64).sqrt();
        let b: Vec<f64> = a.iter().map(|x| x - shift).collect();
        let (t, p) = welch_t(&a, &b).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!((p - 0.330_564_931_278_184_3).abs() < 1e-10, "{p}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
        assert!(welch_t(&[1.0, 1.0], &[2.0, 2.0]).is_err());
    }

    #[test]
    fn p_matches_monte_carlo_null() {
        // unequal sizes and variances, both means zero: P(p < a) should be a
        let mut rng = seeded(11);
        let na = Normal::new(0.0, 1.0).unwrap();
        let nb = Normal::new(0.0, 3.0).unwrap();
        let levels = [0.01, 0.05, 0.2, 0.5];
        let mut hits = [0usize; 4];
        let draws = 100_000;
        let mut a = vec![0.0; 8];
        let mut b = vec![0.0; 12];
        for _ in 0..draws {
            a.iter_mut().for_each(|x| *x = na.sample(&mut rng));
            b.iter_mut().for_each(|x| *x = nb.sample(&mut rng));
            let (_, p) = welch_t(&a, &b).unwrap();
            for (h, l) in hits.iter_mut().zip(levels) {
                *h += usize::from(p < l);
            }
        }
        for (h, l) in hits.iter().zip(levels) {
            let freq = *h as f64 / draws as f64;
            assert!((freq - l).abs() < 0.01, "level {l}: {freq}");
        }
    }
}

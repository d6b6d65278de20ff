use super::FeatureTable;

/// Default absolute Pearson correlation above which a later column is dropped.
pub const CORRELATION_THRESHOLD: f64 = 0.90;

/// Indices of the columns kept by a greedy left-to-right pass: a column is
/// dropped if it is constant or if its |Pearson r| with any already kept
/// column exceeds `threshold`.
pub fn select_uncorrelated(columns: &[Vec<f64>], threshold: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    let mut centered: Vec<Vec<f64>> = Vec::new();
    let mut norms: Vec<f64> = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let c: Vec<f64> = col.iter().map(|x| x - mean).collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if col.iter().all(|&x| x == col[0]) || norm == 0.0 {
            continue;
        }
        let correlated = centered.iter().zip(&norms).any(|(other, on)| {
            let dot: f64 = c.iter().zip(other).map(|(a, b)| a * b).sum();
            (dot / (norm * on)).abs() > threshold
        });
        if !correlated {
            kept.push(j);
            centered.push(c);
            norms.push(norm);
        }
    }
    kept
}

pub fn correlation_filter(t: &FeatureTable, threshold: f64) -> FeatureTable {
    let columns: Vec<Vec<f64>> = (0..t.n_numeric()).map(|j| t.column(j)).collect();
    t.select_numeric(&select_uncorrelated(&columns, threshold))
}

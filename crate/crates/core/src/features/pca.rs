use indexmap::IndexMap;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::data::Problem;

/// Number of embedding principal components used as features.
pub const N_COMPONENTS: usize = 32;

/// Centered linear projection onto the top principal components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub n_components: usize,
    /// Empty for a projection fitted without any embeddings.
    pub mean: Vec<f64>,
    /// `n_components` rows of length `mean.len()`, descending eigenvalue.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl Projection {
    /// Placeholder for catalogs without embeddings: every row is treated as
    /// missing.
    pub fn empty(n_components: usize) -> Self {
        Self {
            n_components,
            mean: Vec::new(),
            components: Vec::new(),
            eigenvalues: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fits on row samples via eigendecomposition of the sample covariance.
    /// Each component is oriented so its largest-magnitude entry is positive.
    pub fn fit(samples: &[&[f64]], k: usize) -> Result<Self, FeatureError> {
        if samples.len() < k.max(2) {
            return Err(FeatureError::InsufficientEmbeddings {
                needed: k.max(2),
                found: samples.len(),
            });
        }
        let dim = samples[0].len();
        if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
            return Err(FeatureError::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        if dim < k {
            return Err(FeatureError::DimensionMismatch {
                expected: k,
                found: dim,
            });
        }
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, x) in mean.iter_mut().zip(s.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        let mut centered = vec![0.0; dim];
        for s in samples {
            for (c, (x, m)) in centered.iter_mut().zip(s.iter().zip(&mean)) {
                *c = x - m;
            }
            for i in 0..dim {
                let ci = centered[i];
                for j in i..dim {
                    cov[(i, j)] += ci * centered[j];
                }
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let v = cov[(i, j)] / (n - 1.0);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });

        let mut components = Vec::with_capacity(k);
        let mut eigenvalues = Vec::with_capacity(k);
        for &idx in order.iter().take(k) {
            let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
            let pivot =
                v.iter().enumerate().fold(
                    0,
                    |best, (i, x)| if x.abs() > v[best].abs() { i } else { best },
                );
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(v);
            eigenvalues.push(eig.eigenvalues[idx]);
        }
        Ok(Self {
            n_components: k,
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if x.len() != self.dim() {
            return Err(FeatureError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(ci, (xi, mi))| ci * (xi - mi))
                    .sum()
            })
            .collect())
    }

    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, s) in self.components.iter().zip(scores) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += s * ci;
            }
        }
        out
    }
}

/// Fits the projection on every problem in the catalog that has an embedding.
pub fn fit_pca(problems: &IndexMap<String, Problem>, k: usize) -> Result<Projection, FeatureError> {
    let samples: Vec<&[f64]> = problems
        .values()
        .filter_map(|p| p.embedding.as_deref())
        .collect();
    Projection::fit(&samples, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn rank_one_data_is_reconstructed() {
        let dir = [1.0, 2.0, -2.0];
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.37 - 3.0;
                vec![5.0 + t * dir[0], -1.0 + t * dir[1], 2.0 + t * dir[2]]
            })
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let proj = Projection::fit(&refs, 1).unwrap();
        let c = &proj.components[0];
        let cos = c.iter().zip(dir).map(|(a, b)| a * b).sum::<f64>() / 3.0;
        assert!((cos.abs() - 1.0).abs() < 1e-12);
        for p in &pts {
            let back = proj.reconstruct(&proj.project(p).unwrap());
            let err: f64 = back
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-9, "{err}");
        }
    }

    #[test]
    fn planted_variance_recovered() {
        let mut rng = seeded(3);
        let dim = 6;
        let pts: Vec<Vec<f64>> = (0..10_000)
            .map(|_| {
                (0..dim)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        if j == 2 {
                            2.0 * z
                        } else {
                            z
                        }
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let proj = Projection::fit(&refs, 3).unwrap();
        assert!(
            (proj.eigenvalues[0] - 4.0).abs() / 4.0 < 0.05,
            "{:?}",
            proj.eigenvalues
        );
        assert!(proj.components[0][2] > 0.99);
        assert!(proj.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn mean_projects_to_zero_and_components_orthonormal() {
        let mut rng = seeded(11);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..8).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let proj = Projection::fit(&refs, 5).unwrap();
        assert!(proj
            .project(&proj.mean)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-12));
        for (i, a) in proj.components.iter().enumerate() {
            for (j, b) in proj.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
            let pivot = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
            assert!(
                a.contains(&pivot),
                "largest entry must be positive"
            );
        }
    }

    #[test]
    fn errors() {
        let a = [1.0, 2.0];
        let b = [1.0, 2.0, 3.0];
        assert!(matches!(
            Projection::fit(&[&a[..]], 1),
            Err(FeatureError::InsufficientEmbeddings { .. })
        ));
        assert!(matches!(
            Projection::fit(&[&a[..], &b[..]], 1),
            Err(FeatureError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Projection::fit(&[&a[..], &a[..], &a[..]], 3),
            Err(FeatureError::DimensionMismatch { .. })
        ));
    }
}

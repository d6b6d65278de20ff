//! Ordered target statistics for categorical columns.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GbdtError;

/// Encodes `column` along the order `perm`: the row at position `k` gets
/// `(sum of earlier same-category targets + alpha * prior) / (earlier
/// same-category count + alpha)`. Output is in original row order.
pub fn compute_ots<T: Eq + Hash>(
    column: &[T],
    targets: &[f64],
    perm: &[usize],
    alpha: f64,
    prior: f64,
) -> Result<Vec<f64>, GbdtError> {
    let (ids, n_cats) = intern(column);
    compute_ots_ids(&ids, n_cats, targets, perm, alpha, prior)
}

/// Category ids in first-appearance order.
pub(crate) fn intern<T: Eq + Hash>(column: &[T]) -> (Vec<u32>, usize) {
    let mut seen: HashMap<&T, u32> = HashMap::new();
    let ids = column
        .iter()
        .map(|v| {
            let next = seen.len() as u32;
            *seen.entry(v).or_insert(next)
        })
        .collect();
    (ids, seen.len())
}

pub(crate) fn compute_ots_ids(
    ids: &[u32],
    n_cats: usize,
    targets: &[f64],
    perm: &[usize],
    alpha: f64,
    prior: f64,
) -> Result<Vec<f64>, GbdtError> {
    let n = ids.len();
    if targets.len() != n {
        return Err(GbdtError::LengthMismatch {
            expected: n,
            found: targets.len(),
        });
    }
    if perm.len() != n {
        return Err(GbdtError::LengthMismatch {
            expected: n,
            found: perm.len(),
        });
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(GbdtError::InvalidParams(format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    check_permutation(perm)?;
    let mut sums = vec![0.0; n_cats];
    let mut counts = vec![0u64; n_cats];
    let mut out = vec![0.0; n];
    for &row in perm {
        let c = ids[row] as usize;
        out[row] = (sums[c] + alpha * prior) / (counts[c] as f64 + alpha);
        sums[c] += targets[row];
        counts[c] += 1;
    }
    Ok(out)
}

fn check_permutation(perm: &[usize]) -> Result<(), GbdtError> {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
            return Err(GbdtError::InvalidPermutation);
        }
    }
    Ok(())
}

pub(crate) fn random_permutation<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Target sum and count of one category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryStat {
    pub sum: f64,
    pub count: u64,
}

/// Frozen statistics used to encode a categorical column at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtsTable {
    pub column: String,
    pub alpha: f64,
    pub prior: f64,
    pub stats: BTreeMap<String, CategoryStat>,
}

impl OtsTable {
    /// Unseen categories encode to the prior.
    pub fn encode(&self, category: &str) -> f64 {
        match self.stats.get(category) {
            Some(s) => (s.sum + self.alpha * self.prior) / (s.count as f64 + self.alpha),
            None => self.prior,
        }
    }
}

/// Training-time encoder: `s` permutations for tree fitting plus a final one
/// whose completed running statistics are frozen for prediction.
#[derive(Debug, Clone)]
pub struct OtsEncoder {
    pub alpha: f64,
    pub prior: f64,
    pub permutations: Vec<Vec<usize>>,
    pub final_permutation: Vec<usize>,
    /// `encodings[perm][column][row]`
    pub encodings: Vec<Vec<Vec<f64>>>,
    pub tables: Vec<OtsTable>,
}

impl OtsEncoder {
    pub fn fit<R: Rng>(
        names: &[&str],
        columns: &[Vec<&str>],
        targets: &[f64],
        n_permutations: usize,
        alpha: f64,
        prior: f64,
        rng: &mut R,
    ) -> Result<Self, GbdtError> {
        let n = targets.len();
        let permutations: Vec<Vec<usize>> = (0..n_permutations)
            .map(|_| random_permutation(n, rng))
            .collect();
        let final_permutation = random_permutation(n, rng);
        let interned: Vec<(Vec<u32>, usize)> = columns.iter().map(|c| intern(c)).collect();

        let encodings = permutations
            .iter()
            .map(|perm| {
                interned
                    .iter()
                    .map(|(ids, k)| compute_ots_ids(ids, *k, targets, perm, alpha, prior))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;

        let tables = names
            .iter()
            .zip(columns)
            .map(|(name, col)| {
                let mut stats: BTreeMap<String, CategoryStat> = BTreeMap::new();
                for &row in &final_permutation {
                    let s = stats
                        .entry(col[row].to_string())
                        .or_insert(CategoryStat { sum: 0.0, count: 0 });
                    s.sum += targets[row];
                    s.count += 1;
                }
                OtsTable {
                    column: name.to_string(),
                    alpha,
                    prior,
                    stats,
                }
            })
            .collect();

        Ok(Self {
            alpha,
            prior,
            permutations,
            final_permutation,
            encodings,
            tables,
        })
    }
}

use indexmap::IndexSet;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::data::{Dataset, LabeledRow};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// Share of students assigned to the validation side.
    pub fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            fraction: 0.5,
            seed: 7,
        }
    }
}

/// Partitions row indices so that no student appears on both sides.
/// Students are shuffled with the spec's seed and the first
/// `ceil(fraction * n_students)` go to validation. Returns `(train, valid)`.
pub fn split_by_student(
    d: &Dataset,
    rows: &[LabeledRow],
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(spec.fraction > 0.0 && spec.fraction < 1.0) {
        return Err(EvalError::InvalidSpec(format!(
            "split fraction must lie in (0, 1), got {}",
            spec.fraction
        )));
    }
    let owners = rows
        .iter()
        .map(|r| {
            d.row_student(r)
                .ok_or_else(|| EvalError::UnresolvableStudent(r.end_unit_assignment_id.clone()))
        })
        .collect::<Result<Vec<&str>, _>>()?;
    let students: IndexSet<&str> = owners.iter().copied().collect();
    let mut order: Vec<usize> = (0..students.len()).collect();
    order.shuffle(&mut seeded(spec.seed));
    let n_valid = (spec.fraction * students.len() as f64).ceil() as usize;
    let mut is_valid = vec![false; students.len()];
    for &s in &order[..n_valid] {
        is_valid[s] = true;
    }
    let (valid, train): (Vec<usize>, Vec<usize>) =
        (0..rows.len()).partition(|&i| is_valid[students.get_index_of(owners[i]).unwrap()]);
    Ok((train, valid))
}

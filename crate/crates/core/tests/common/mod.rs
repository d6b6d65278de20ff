//! Naive reference implementations used by the property and acceptance tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use clickboost::data::{ActionKind, NUM_ACTIONS};

/// O(n^2) pairwise AUC with ties counted one half, in exact integer halves.
pub fn pairwise_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let mut halves: u64 = 0;
    let (mut npos, mut nneg) = (0u64, 0u64);
    for (i, &yi) in labels.iter().enumerate() {
        if yi > 0.5 {
            npos += 1;
        } else {
            nneg += 1;
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj > 0.5 {
                continue;
            }
            if scores[i] > scores[j] {
                halves += 2;
            } else if scores[i] == scores[j] {
                halves += 1;
            }
        }
    }
    halves as f64 / (2 * npos * nneg) as f64
}

/// Ordered target statistic by direct summation over earlier positions.
pub fn ots_oracle(cats: &[u32], y: &[f64], perm: &[usize], alpha: f64, prior: f64) -> Vec<f64> {
    let mut out = vec![f64::NAN; cats.len()];
    for (k, &row) in perm.iter().enumerate() {
        let (mut s, mut c) = (0.0, 0.0);
        for &earlier in &perm[..k] {
            if cats[earlier] == cats[row] {
                s += y[earlier];
                c += 1.0;
            }
        }
        out[row] = (s + alpha * prior) / (c + alpha);
    }
    out
}

/// Square-root class balancing written out from its definition.
pub fn class_weight_oracle(labels: &[f64], w: &[f64]) -> Vec<f64> {
    let w1: f64 = labels
        .iter()
        .zip(w)
        .filter(|(y, _)| **y > 0.5)
        .map(|(_, w)| w)
        .sum();
    let w0: f64 = labels
        .iter()
        .zip(w)
        .filter(|(y, _)| **y <= 0.5)
        .map(|(_, w)| w)
        .sum();
    let max = w0.max(w1);
    labels
        .iter()
        .map(|&y| {
            if y > 0.5 {
                (max / w1).sqrt()
            } else {
                (max / w0).sqrt()
            }
        })
        .collect()
}

/// Weighted squared error of fitting one regularized constant to `rows`.
fn leaf_loss(rows: &[usize], g: &[f64], w: &[f64], lambda: f64) -> f64 {
    let gs: f64 = rows.iter().map(|&r| w[r] * g[r]).sum();
    let ws: f64 = rows.iter().map(|&r| w[r]).sum();
    let a = if ws + lambda > 0.0 {
        gs / (ws + lambda)
    } else {
        0.0
    };
    rows.iter().map(|&r| w[r] * (a - g[r]).powi(2)).sum()
}

/// Every (feature, threshold) pair between adjacent distinct values is tried
/// by partitioning the rows and recomputing both children's loss. A candidate
/// must reduce the loss by more than `1e-10 * sum(w g^2)` and beat the best so
/// far by the same margin, scanning features then thresholds in ascending order.
pub fn brute_force_split(
    columns: &[Vec<f64>],
    rows: &[usize],
    g: &[f64],
    w: &[f64],
    lambda: f64,
) -> Option<(usize, f64, f64)> {
    let parent = leaf_loss(rows, g, w, lambda);
    let tol = 1e-10 * rows.iter().map(|&r| w[r] * g[r] * g[r]).sum::<f64>();
    let mut best: Option<(usize, f64, f64)> = None;
    for (f, col) in columns.iter().enumerate() {
        let mut values: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let mid = pair[0] + (pair[1] - pair[0]) / 2.0;
            let thr = if mid >= pair[1] { pair[0] } else { mid };
            let (left, right): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| col[r] <= thr);
            let reduction =
                parent - leaf_loss(&left, g, w, lambda) - leaf_loss(&right, g, w, lambda);
            let better = match best {
                None => reduction > tol,
                Some((_, _, b)) => reduction > tol && reduction > b + tol,
            };
            if better {
                best = Some((f, thr, reduction));
            }
        }
    }
    best
}

/// Per-kind tallies taken straight from the CSV records.
pub struct RawData {
    /// end-unit -> in-units, file order
    links: Vec<(String, String)>,
    owner: HashMap<String, String>,
    global: HashMap<(String, usize), u64>,
    local: HashMap<(String, String, usize), u64>,
    in_unit: HashMap<(String, usize), u64>,
    student: HashMap<(String, usize), u64>,
    /// in-unit -> problems in first-appearance order
    problems: HashMap<String, Vec<String>>,
}

fn records(path: &Path) -> Vec<HashMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

impl RawData {
    /// Only events whose in-unit is linked to some end-unit are counted.
    pub fn read(dir: &Path) -> Self {
        let links: Vec<(String, String)> = records(&dir.join("relationships.csv"))
            .into_iter()
            .map(|r| {
                (
                    r["end_unit_assignment_id"].clone(),
                    r["in_unit_assignment_id"].clone(),
                )
            })
            .collect();
        let owner = records(&dir.join("assignments.csv"))
            .into_iter()
            .map(|r| (r["assignment_id"].clone(), r["student_id"].clone()))
            .collect();
        let mut out = Self {
            links,
            owner,
            global: HashMap::new(),
            local: HashMap::new(),
            in_unit: HashMap::new(),
            student: HashMap::new(),
            problems: HashMap::new(),
        };
        for e in records(&dir.join("action_logs.csv")) {
            let r = e["in_unit_assignment_id"].clone();
            if !out.links.iter().any(|(_, l)| *l == r) {
                continue;
            }
            let p = e["problem_id"].clone();
            let k = e["action"].parse::<ActionKind>().unwrap().index();
            *out.global.entry((p.clone(), k)).or_default() += 1;
            *out.local.entry((r.clone(), p.clone(), k)).or_default() += 1;
            *out.in_unit.entry((r.clone(), k)).or_default() += 1;
            *out.student.entry((e["student_id"].clone(), k)).or_default() += 1;
            let seen = out.problems.entry(r).or_default();
            if !seen.contains(&p) {
                seen.push(p);
            }
        }
        out
    }

    fn get<K: std::hash::Hash + Eq>(m: &HashMap<K, u64>, k: &K) -> u64 {
        m.get(k).copied().unwrap_or(0)
    }

    fn in_units(&self, u: &str) -> Vec<&str> {
        self.links
            .iter()
            .filter(|(e, _)| e == u)
            .map(|(_, r)| r.as_str())
            .collect()
    }

    fn problems_in(&self, r: &str) -> Vec<String> {
        self.problems.get(r).cloned().unwrap_or_default()
    }

    fn d0(x: u64) -> f64 {
        if x == 0 {
            0.0
        } else {
            1.0 / x as f64
        }
    }

    /// Mean over the in-units of `u` of `f(r)`, 0 when none are linked.
    fn over_in_units(&self, u: &str, f: impl Fn(&str) -> f64) -> f64 {
        let rs = self.in_units(u);
        if rs.is_empty() {
            return 0.0;
        }
        let mut s = 0.0;
        for r in &rs {
            s += f(r);
        }
        s / rs.len() as f64
    }

    fn mean_over_problems(&self, r: &str, f: impl Fn(&str) -> f64) -> f64 {
        let ps = self.problems_in(r);
        if ps.is_empty() {
            return 0.0;
        }
        let mut s = 0.0;
        for p in &ps {
            s += f(p);
        }
        s / ps.len() as f64
    }

    fn global_of(&self, p: &str, k: usize) -> u64 {
        Self::get(&self.global, &(p.to_string(), k))
    }

    fn local_of(&self, r: &str, p: &str, k: usize) -> u64 {
        Self::get(&self.local, &(r.to_string(), p.to_string(), k))
    }

    /// The 61 count-derived values of one end-unit row in table order:
    /// assignment totals, student totals, in-unit mean, problem mean,
    /// weighted mean (12 each), then the performance measure.
    pub fn count_features(&self, u: &str) -> Vec<f64> {
        let student = &self.owner[u];
        let total = |r: &str, k: usize| Self::get(&self.in_unit, &(r.to_string(), k)) as f64;
        let mut out = Vec::with_capacity(61);
        for k in 0..NUM_ACTIONS {
            let mut s = 0.0;
            for r in self.in_units(u) {
                s += total(r, k);
            }
            out.push(s);
        }
        for k in 0..NUM_ACTIONS {
            out.push(Self::get(&self.student, &(student.clone(), k)) as f64);
        }
        for k in 0..NUM_ACTIONS {
            out.push(self.over_in_units(u, |r| total(r, k)));
        }
        for k in 0..NUM_ACTIONS {
            out.push(self.over_in_units(u, |r| {
                self.mean_over_problems(r, |p| self.global_of(p, k) as f64)
            }));
        }
        for k in 0..NUM_ACTIONS {
            out.push(self.over_in_units(u, |r| {
                self.mean_over_problems(r, |p| {
                    Self::d0(self.global_of(p, k)) * self.local_of(r, p, k) as f64
                })
            }));
        }
        let c = ActionKind::CorrectResponse.index();
        let w = ActionKind::WrongResponse.index();
        out.push(self.over_in_units(u, |r| {
            let mut s = 0.0;
            for p in self.problems_in(r) {
                s += Self::d0(self.global_of(&p, c)) * self.local_of(r, &p, c) as f64
                    - Self::d0(self.global_of(&p, w)) * self.local_of(r, &p, w) as f64;
            }
            s
        }));
        out
    }
}

/// Rewrites a generated dataset so that it contains an end-unit without
/// linked in-units, a linked in-unit without events and an in-unit linked to
/// two end-units. Returns false if the dataset is too small to do so.
pub fn perturb_links(dir: &Path) -> bool {
    let rel_path = dir.join("relationships.csv");
    let text = fs::read_to_string(&rel_path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let header = lines.remove(0);
    let owner: HashMap<String, String> = records(&dir.join("assignments.csv"))
        .into_iter()
        .map(|r| (r["assignment_id"].clone(), r["student_id"].clone()))
        .collect();
    if lines.len() < 3 {
        return false;
    }
    // unlink the first end-unit entirely
    let first_u = lines[0].split(',').next().unwrap().to_string();
    lines.retain(|l| !l.starts_with(&format!("{first_u},")));
    if lines.len() < 2 {
        return false;
    }
    // a second end-unit of the same student also gets another in-unit
    let pairs: Vec<(String, String)> = lines
        .iter()
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().to_string(),
                it.next().unwrap().to_string(),
            )
        })
        .collect();
    let mut extra = Vec::new();
    'outer: for (u1, r1) in &pairs {
        for (u2, _) in &pairs {
            if u1 != u2 && owner[u1] == owner[u2] {
                extra.push(format!("{u2},{r1}"));
                break 'outer;
            }
        }
    }
    // an in-unit with no events
    let (u, _) = &pairs[pairs.len() - 1];
    let student = owner[u].clone();
    let ghost = format!("{u}_ghost");
    let asg_path = dir.join("assignments.csv");
    let mut asg = fs::read_to_string(&asg_path).unwrap();
    let template = asg
        .lines()
        .find(|l| l.starts_with(&format!("{u},")))
        .unwrap()
        .to_string();
    let rest: Vec<&str> = template.split(',').collect();
    asg.push_str(&format!(
        "{ghost},{student},{},false\n",
        rest[2..rest.len() - 1].join(",")
    ));
    fs::write(&asg_path, asg).unwrap();
    extra.push(format!("{u},{ghost}"));
    lines.extend(extra);
    fs::write(&rel_path, format!("{header}\n{}\n", lines.join("\n"))).unwrap();
    true
}

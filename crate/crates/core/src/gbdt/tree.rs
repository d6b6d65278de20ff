//! Exact greedy splits and leaf-wise (lossguide) tree growth.

use serde::{Deserialize, Serialize};

/// Relative tolerance: splits whose gain does not exceed `SPLIT_EPS * sum(w g^2)`
/// of the node are rejected, and a candidate replaces the current best only if
/// it beats it by more than the same amount.
pub const SPLIT_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

/// A regression tree; node 0 is the root. `weight` scales every leaf value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub weight: f64,
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Unscaled leaf value reached by a row; rows go left iff `x <= threshold`.
    pub fn leaf_value(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    } as usize
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.weight * self.leaf_value(row)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(t, *left as usize).max(walk(t, *right as usize))
                }
            }
        }
        walk(self, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub max_leaves: usize,
    pub l2: f64,
}

/// Regularized leaf value `sum(w g) / (sum(w) + lambda)`.
pub fn leaf_value(g_sum: f64, w_sum: f64, lambda: f64) -> f64 {
    let d = w_sum + lambda;
    if d > 0.0 {
        g_sum / d
    } else {
        0.0
    }
}

// Reduction of sum(w (a - g)^2) achieved by setting a leaf to its regularized
// value: G^2 (W + 2 lambda) / (W + lambda)^2.
fn score(g_sum: f64, w_sum: f64, lambda: f64) -> f64 {
    let d = w_sum + lambda;
    if d > 0.0 {
        g_sum * g_sum * (w_sum + 2.0 * lambda) / (d * d)
    } else {
        0.0
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Best split of the rows in `sorted[f]` (each list holds the same rows,
/// ordered by feature `f`).
pub(crate) fn best_split_presorted(
    columns: &[&[f64]],
    sorted: &[Vec<u32>],
    g: &[f64],
    w: &[f64],
    lambda: f64,
) -> Option<SplitCandidate> {
    let first = sorted.first()?;
    if first.len() < 2 {
        return None;
    }
    let (mut g_tot, mut w_tot, mut sq) = (0.0, 0.0, 0.0);
    for &r in first {
        let r = r as usize;
        g_tot += w[r] * g[r];
        w_tot += w[r];
        sq += w[r] * g[r] * g[r];
    }
    let parent = score(g_tot, w_tot, lambda);
    let tol = SPLIT_EPS * sq;
    let mut best: Option<SplitCandidate> = None;
    for (f, list) in sorted.iter().enumerate() {
        let col = columns[f];
        let (mut gl, mut wl) = (0.0, 0.0);
        for i in 0..list.len() - 1 {
            let r = list[i] as usize;
            gl += w[r] * g[r];
            wl += w[r];
            let v = col[r];
            let next = col[list[i + 1] as usize];
            if v >= next {
                continue;
            }
            let gain = score(gl, wl, lambda) + score(g_tot - gl, w_tot - wl, lambda) - parent;
            if gain > tol && best.is_none_or(|b| gain > b.gain + tol) {
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: midpoint(v, next),
                    gain,
                });
            }
        }
    }
    best
}

fn argsort(col: &[f64], rows: &[u32]) -> Vec<u32> {
    let mut idx = rows.to_vec();
    idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
    idx
}

/// Sorts every column once over all rows.
pub(crate) fn presort(columns: &[&[f64]], n_rows: usize) -> Vec<Vec<u32>> {
    let all: Vec<u32> = (0..n_rows as u32).collect();
    columns.iter().map(|c| argsort(c, &all)).collect()
}

/// Best split of `rows` over all features, or `None` if no split has positive
/// gain. Ties go to the lowest feature, then the lowest threshold.
pub fn find_best_split(
    columns: &[&[f64]],
    rows: &[usize],
    g: &[f64],
    w: &[f64],
    lambda: f64,
) -> Option<SplitCandidate> {
    let rows: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    let sorted: Vec<Vec<u32>> = columns.iter().map(|c| argsort(c, &rows)).collect();
    best_split_presorted(columns, &sorted, g, w, lambda)
}

struct Open {
    node: usize,
    depth: usize,
    rows: Vec<u32>,
    sorted: Vec<Vec<u32>>,
    split: SplitCandidate,
}

/// Result of growing one tree: the tree and, for each row that took part,
/// the index of its leaf node.
pub(crate) struct Grown {
    pub tree: Tree,
    pub leaf_of: Vec<(u32, u32)>,
}

fn new_leaf(rows: &[u32], g: &[f64], w: &[f64], lambda: f64) -> Node {
    let (mut gs, mut ws) = (0.0, 0.0);
    for &r in rows {
        gs += w[r as usize] * g[r as usize];
        ws += w[r as usize];
    }
    Node::Leaf {
        value: leaf_value(gs, ws, lambda),
    }
}

/// Leaf-wise growth: repeatedly split the open leaf with the largest gain
/// until `max_leaves` is reached or no leaf can be split.
pub(crate) fn grow_presorted(
    columns: &[&[f64]],
    rows: Vec<u32>,
    sorted: Vec<Vec<u32>>,
    g: &[f64],
    w: &[f64],
    params: &TreeParams,
) -> Grown {
    let lambda = params.l2;
    let mut nodes = vec![new_leaf(&rows, g, w, lambda)];
    let mut finished: Vec<(usize, Vec<u32>)> = Vec::new();
    let mut open: Vec<Open> = Vec::new();
    let mut n_leaves = 1usize;

    let consider = |node: usize,
                    depth: usize,
                    rows: Vec<u32>,
                    sorted: Vec<Vec<u32>>,
                    open: &mut Vec<Open>,
                    finished: &mut Vec<(usize, Vec<u32>)>| {
        let split = if depth < params.max_depth && rows.len() >= 2 {
            best_split_presorted(columns, &sorted, g, w, lambda)
        } else {
            None
        };
        match split {
            Some(split) => open.push(Open {
                node,
                depth,
                rows,
                sorted,
                split,
            }),
            None => finished.push((node, rows)),
        }
    };
    consider(0, 0, rows, sorted, &mut open, &mut finished);

    while n_leaves < params.max_leaves && !open.is_empty() {
        let mut pick = 0;
        for (i, o) in open.iter().enumerate() {
            if o.split.gain > open[pick].split.gain {
                pick = i;
            }
        }
        let o = open.remove(pick);
        let SplitCandidate {
            feature,
            threshold,
            gain,
        } = o.split;
        let col = columns[feature];
        let goes_left = |r: &u32| col[*r as usize] <= threshold;
        let (lrows, rrows): (Vec<u32>, Vec<u32>) = o.rows.iter().partition(|r| goes_left(r));
        let mut lsorted = Vec::with_capacity(o.sorted.len());
        let mut rsorted = Vec::with_capacity(o.sorted.len());
        for list in &o.sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = list.iter().partition(|r| goes_left(r));
            lsorted.push(l);
            rsorted.push(r);
        }
        let left = nodes.len();
        nodes.push(new_leaf(&lrows, g, w, lambda));
        nodes.push(new_leaf(&rrows, g, w, lambda));
        nodes[o.node] = Node::Split {
            feature,
            threshold,
            left: left as u32,
            right: left as u32 + 1,
            gain,
        };
        n_leaves += 1;
        consider(left, o.depth + 1, lrows, lsorted, &mut open, &mut finished);
        consider(
            left + 1,
            o.depth + 1,
            rrows,
            rsorted,
            &mut open,
            &mut finished,
        );
    }

    let mut leaf_of = Vec::new();
    for (node, rows) in finished
        .into_iter()
        .chain(open.into_iter().map(|o| (o.node, o.rows)))
    {
        leaf_of.extend(rows.into_iter().map(|r| (r, node as u32)));
    }
    Grown {
        tree: Tree { weight: 1.0, nodes },
        leaf_of,
    }
}

/// Grows one tree on `rows` fitting gradients `g` under weights `w`.
pub fn grow_tree(
    columns: &[&[f64]],
    rows: &[usize],
    g: &[f64],
    w: &[f64],
    params: &TreeParams,
) -> Tree {
    let rows: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    let sorted: Vec<Vec<u32>> = columns.iter().map(|c| argsort(c, &rows)).collect();
    grow_presorted(columns, rows, sorted, g, w, params).tree
}

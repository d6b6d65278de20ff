use std::collections::HashMap;

use indexmap::IndexMap;

use super::FeatureError;
use crate::data::{ActionCounts, ActionKind, Dataset, NUM_ACTIONS};

/// Per-problem action totals over the whole clickstream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProblemGlobalStats {
    counts: HashMap<String, ActionCounts>,
}

impl ProblemGlobalStats {
    /// Single sequential pass over the logged events (duplicated copies of
    /// multi-link events are counted once).
    pub fn build(d: &Dataset) -> Self {
        let mut counts: HashMap<String, ActionCounts> = HashMap::new();
        for e in d.unique_events() {
            counts
                .entry(e.problem_id.clone())
                .or_insert([0; NUM_ACTIONS])[e.kind.index()] += 1;
        }
        Self { counts }
    }

    pub fn get(&self, problem_id: &str) -> ActionCounts {
        self.counts
            .get(problem_id)
            .copied()
            .unwrap_or([0; NUM_ACTIONS])
    }

    pub fn count(&self, problem_id: &str, kind: ActionKind) -> u64 {
        self.get(problem_id)[kind.index()]
    }

    /// Total events of `kind` across all problems.
    pub fn total(&self, kind: ActionKind) -> u64 {
        self.counts.values().map(|c| c[kind.index()]).sum()
    }
}

/// `D_0(x) = 1/x` for `x != 0`, and 0 otherwise.
pub fn d0(x: u64) -> f64 {
    if x == 0 {
        0.0
    } else {
        1.0 / x as f64
    }
}

#[derive(Debug, Default)]
struct InUnitActivity<'a> {
    totals: ActionCounts,
    /// Distinct problems in first-appearance order.
    problems: IndexMap<&'a str, ActionCounts>,
}

/// All values derived from the in-unit work linked to one end-unit assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndUnitFeatures {
    pub assignment_counts: [f64; NUM_ACTIONS],
    pub in_unit_avg: [f64; NUM_ACTIONS],
    pub problem_avg: [f64; NUM_ACTIONS],
    pub weighted_avg: [f64; NUM_ACTIONS],
    pub performance: f64,
}

/// Indexes a dataset once so every per-row feature is a lookup plus a few
/// small aggregations.
#[derive(Debug)]
pub struct FeatureContext<'a> {
    dataset: &'a Dataset,
    stats: ProblemGlobalStats,
    /// end-unit -> in-unit -> activity
    activity: HashMap<&'a str, HashMap<&'a str, InUnitActivity<'a>>>,
    students: HashMap<&'a str, ActionCounts>,
}

impl<'a> FeatureContext<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        let stats = ProblemGlobalStats::build(dataset);
        let mut activity: HashMap<&str, HashMap<&str, InUnitActivity>> = HashMap::new();
        for e in &dataset.events {
            let slot = activity
                .entry(e.end_unit_assignment_id.as_str())
                .or_default()
                .entry(e.in_unit_assignment_id.as_str())
                .or_default();
            slot.totals[e.kind.index()] += 1;
            slot.problems
                .entry(e.problem_id.as_str())
                .or_insert([0; NUM_ACTIONS])[e.kind.index()] += 1;
        }
        let mut students: HashMap<&str, ActionCounts> = HashMap::new();
        for a in dataset.assignments.values() {
            students
                .entry(a.student_id.as_str())
                .or_insert([0; NUM_ACTIONS]);
        }
        for e in dataset.unique_events() {
            students
                .entry(e.student_id.as_str())
                .or_insert([0; NUM_ACTIONS])[e.kind.index()] += 1;
        }
        Self {
            dataset,
            stats,
            activity,
            students,
        }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn stats(&self) -> &ProblemGlobalStats {
        &self.stats
    }

    fn linked(&self, u: &str) -> Result<&'a [String], FeatureError> {
        if !self.dataset.assignments.contains_key(u) {
            return Err(FeatureError::UnknownAssignment(u.to_string()));
        }
        Ok(self
            .dataset
            .relationships
            .get(u)
            .map(Vec::as_slice)
            .unwrap_or(&[]))
    }

    fn in_unit(&self, u: &str, r: &str) -> Option<&InUnitActivity<'a>> {
        self.activity.get(u)?.get(r)
    }

    /// Mean over linked in-units of `per_in_unit`; an in-unit without events
    /// contributes `per_in_unit(None)`.
    fn mean_over_in_units<T, F>(&self, u: &str, per_in_unit: F) -> Result<T, FeatureError>
    where
        T: Accumulate,
        F: Fn(Option<&InUnitActivity<'a>>) -> T,
    {
        let linked = self.linked(u)?;
        let mut acc = T::zero();
        for r in linked {
            acc.add(&per_in_unit(self.in_unit(u, r)));
        }
        if !linked.is_empty() {
            acc.div(linked.len() as f64);
        }
        Ok(acc)
    }

    /// Action totals over every in-unit assignment linked to `u`.
    pub fn assignment_action_counts(&self, u: &str) -> Result<[f64; NUM_ACTIONS], FeatureError> {
        let linked = self.linked(u)?;
        let mut out = [0.0; NUM_ACTIONS];
        for r in linked {
            if let Some(act) = self.in_unit(u, r) {
                for (o, c) in out.iter_mut().zip(act.totals) {
                    *o += c as f64;
                }
            }
        }
        Ok(out)
    }

    /// Action totals over everything the student did.
    pub fn student_action_counts(&self, s: &str) -> Result<[f64; NUM_ACTIONS], FeatureError> {
        let counts = self
            .students
            .get(s)
            .ok_or_else(|| FeatureError::UnknownStudent(s.to_string()))?;
        Ok(counts.map(|c| c as f64))
    }

    pub fn in_unit_avg_action_counts(&self, u: &str) -> Result<[f64; NUM_ACTIONS], FeatureError> {
        self.mean_over_in_units(u, |act| match act {
            Some(a) => a.totals.map(|c| c as f64),
            None => [0.0; NUM_ACTIONS],
        })
    }

    /// Global per-problem totals averaged over the distinct problems of each
    /// in-unit, then over in-units.
    pub fn problem_avg_action_counts(&self, u: &str) -> Result<[f64; NUM_ACTIONS], FeatureError> {
        self.mean_over_in_units(u, |act| {
            let mut out = [0.0; NUM_ACTIONS];
            let Some(a) = act else { return out };
            for p in a.problems.keys() {
                for (o, c) in out.iter_mut().zip(self.stats.get(p)) {
                    *o += c as f64;
                }
            }
            let n = a.problems.len() as f64;
            out.map(|v| v / n)
        })
    }

    /// `D_0(N_a^(p)) * N_a(u,r,p)` averaged over problems, then in-units.
    pub fn problem_weighted_avg(&self, u: &str) -> Result<[f64; NUM_ACTIONS], FeatureError> {
        self.mean_over_in_units(u, |act| {
            let mut out = [0.0; NUM_ACTIONS];
            let Some(a) = act else { return out };
            for (p, local) in &a.problems {
                let global = self.stats.get(p);
                for k in 0..NUM_ACTIONS {
                    out[k] += d0(global[k]) * local[k] as f64;
                }
            }
            let n = a.problems.len() as f64;
            out.map(|v| v / n)
        })
    }

    /// Sum over problems of the signed correct/wrong measure, averaged over
    /// in-units.
    pub fn problem_level_performance(&self, u: &str) -> Result<f64, FeatureError> {
        let correct = ActionKind::CorrectResponse.index();
        let wrong = ActionKind::WrongResponse.index();
        self.mean_over_in_units(u, |act| {
            let Some(a) = act else { return 0.0 };
            a.problems
                .iter()
                .map(|(p, local)| {
                    let global = self.stats.get(p);
                    d0(global[correct]) * local[correct] as f64
                        - d0(global[wrong]) * local[wrong] as f64
                })
                .sum::<f64>()
        })
    }

    pub fn end_unit_features(&self, u: &str) -> Result<EndUnitFeatures, FeatureError> {
        Ok(EndUnitFeatures {
            assignment_counts: self.assignment_action_counts(u)?,
            in_unit_avg: self.in_unit_avg_action_counts(u)?,
            problem_avg: self.problem_avg_action_counts(u)?,
            weighted_avg: self.problem_weighted_avg(u)?,
            performance: self.problem_level_performance(u)?,
        })
    }
}

trait Accumulate {
    fn zero() -> Self;
    fn add(&mut self, other: &Self);
    fn div(&mut self, by: f64);
}

impl Accumulate for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(&mut self, other: &Self) {
        *self += other;
    }
    fn div(&mut self, by: f64) {
        *self /= by;
    }
}

impl Accumulate for [f64; NUM_ACTIONS] {
    fn zero() -> Self {
        [0.0; NUM_ACTIONS]
    }
    fn add(&mut self, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += b;
        }
    }
    fn div(&mut self, by: f64) {
        for a in self.iter_mut() {
            *a /= by;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ActionEvent, AssignmentInstance};

    const HINT: ActionKind = ActionKind::HintRequested;
    const CORRECT: ActionKind = ActionKind::CorrectResponse;
    const WRONG: ActionKind = ActionKind::WrongResponse;

    /// Builds a dataset from (student, end-unit, in-unit, problem, kind) tuples.
    fn toy(events: &[(&str, &str, &str, &str, ActionKind)], end_units: &[&str]) -> Dataset {
        let mut d = Dataset::default();
        let add_assignment = |d: &mut Dataset, id: &str, s: &str, end: bool| {
            d.assignments
                .entry(id.to_string())
                .or_insert_with(|| AssignmentInstance {
                    assignment_id: id.to_string(),
                    student_id: s.to_string(),
                    sequence_path: Default::default(),
                    is_end_unit: end,
                });
        };
        for eu in end_units {
            add_assignment(&mut d, eu, "s1", true);
        }
        for (i, (s, eu, iu, p, kind)) in events.iter().enumerate() {
            add_assignment(&mut d, eu, s, true);
            add_assignment(&mut d, iu, s, false);
            let links = d.relationships.entry(eu.to_string()).or_default();
            if !links.iter().any(|x| x == iu) {
                links.push(iu.to_string());
            }
            d.events.push(ActionEvent {
                timestamp: i as u64,
                student_id: s.to_string(),
                end_unit_assignment_id: eu.to_string(),
                in_unit_assignment_id: iu.to_string(),
                problem_id: p.to_string(),
                kind: *kind,
                log_index: i,
            });
        }
        d
    }

    fn repeat(
        n: usize,
        e: (
            &'static str,
            &'static str,
            &'static str,
            &'static str,
            ActionKind,
        ),
    ) -> Vec<(
        &'static str,
        &'static str,
        &'static str,
        &'static str,
        ActionKind,
    )> {
        vec![e; n]
    }

    #[test]
    fn unlinked_end_unit_is_all_zero() {
        let d = toy(&[], &["u"]);
        let ctx = FeatureContext::new(&d);
        let f = ctx.end_unit_features("u").unwrap();
        assert_eq!(f.assignment_counts, [0.0; NUM_ACTIONS]);
        assert_eq!(f.in_unit_avg, [0.0; NUM_ACTIONS]);
        assert_eq!(f.problem_avg, [0.0; NUM_ACTIONS]);
        assert_eq!(f.weighted_avg, [0.0; NUM_ACTIONS]);
        assert_eq!(f.performance, 0.0);
        assert!(matches!(
            ctx.assignment_action_counts("nope"),
            Err(FeatureError::UnknownAssignment(_))
        ));
    }

    #[test]
    fn assignment_counts_sum_over_in_units() {
        let mut ev = repeat(2, ("s1", "u", "r1", "p1", HINT));
        ev.push(("s1", "u", "r2", "p2", HINT));
        let d = toy(&ev, &[]);
        let ctx = FeatureContext::new(&d);
        assert_eq!(
            ctx.assignment_action_counts("u").unwrap()[HINT.index()],
            3.0
        );
    }

    #[test]
    fn student_counts() {
        let mut ev = repeat(3, ("s1", "u1", "r1", "p1", CORRECT));
        ev.extend(repeat(2, ("s1", "u2", "r2", "p1", CORRECT)));
        let d = toy(&ev, &[]);
        let ctx = FeatureContext::new(&d);
        assert_eq!(
            ctx.student_action_counts("s1").unwrap()[CORRECT.index()],
            5.0
        );
        assert!(ctx.student_action_counts("ghost").is_err());

        let idle = toy(&[], &["u"]);
        let ctx = FeatureContext::new(&idle);
        assert_eq!(ctx.student_action_counts("s1").unwrap(), [0.0; NUM_ACTIONS]);
    }

    #[test]
    fn in_unit_average() {
        let cont = ActionKind::ContinueSelected;
        let mut ev = repeat(4, ("s1", "u", "r1", "p1", cont));
        ev.extend(repeat(2, ("s1", "u", "r2", "p1", cont)));
        let d = toy(&ev, &[]);
        let ctx = FeatureContext::new(&d);
        assert_eq!(
            ctx.in_unit_avg_action_counts("u").unwrap()[cont.index()],
            3.0
        );

        let single = toy(&repeat(4, ("s1", "u", "r1", "p1", cont)), &[]);
        let ctx = FeatureContext::new(&single);
        assert_eq!(
            ctx.in_unit_avg_action_counts("u").unwrap(),
            ctx.assignment_action_counts("u").unwrap()
        );
    }

    #[test]
    fn problem_average_is_nested_mean_of_global_counts() {
        // p1 gets 10 correct globally, p2 gets 20; student s1 touches both in r1
        let mut ev = repeat(9, ("s2", "v", "q", "p1", CORRECT));
        ev.extend(repeat(19, ("s2", "v", "q", "p2", CORRECT)));
        ev.push(("s1", "u", "r1", "p1", CORRECT));
        ev.push(("s1", "u", "r1", "p2", CORRECT));
        let d = toy(&ev, &[]);
        let ctx = FeatureContext::new(&d);
        assert_eq!(ctx.stats().count("p1", CORRECT), 10);
        assert_eq!(
            ctx.problem_avg_action_counts("u").unwrap()[CORRECT.index()],
            15.0
        );

        let mut ev = repeat(9, ("s2", "v", "q", "p1", CORRECT));
        ev.push(("s1", "u", "r1", "p1", CORRECT));
        let d = toy(&ev, &[]);
        let ctx = FeatureContext::new(&d);
        assert_eq!(
            ctx.problem_avg_action_counts("u").unwrap()[CORRECT.index()],
            10.0
        );
    }

    #[test]
    fn weighted_measure() {
        // the only 3 hints on p ever were made by this student
        let d = toy(&repeat(3, ("s1", "u", "r1", "p", HINT)), &[]);
        let ctx = FeatureContext::new(&d);
        let w = ctx.problem_weighted_avg("u").unwrap();
        assert_eq!(w[HINT.index()], 1.0);
        // actions never seen on p contribute 0
        assert_eq!(w[CORRECT.index()], 0.0);

        let mut ev = repeat(99, ("s2", "v", "q", "p", HINT));
        ev.push(("s1", "u", "r1", "p", HINT));
        let d = toy(&ev, &[]);
        let ctx = FeatureContext::new(&d);
        assert!((ctx.problem_weighted_avg("u").unwrap()[HINT.index()] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn performance_measure() {
        // globals: 10 correct, 5 wrong on p; the student: 1 correct, 2 wrong
        let mut ev = repeat(9, ("s2", "v", "q", "p", CORRECT));
        ev.extend(repeat(3, ("s2", "v", "q", "p", WRONG)));
        ev.push(("s1", "u", "r1", "p", CORRECT));
        ev.extend(repeat(2, ("s1", "u", "r1", "p", WRONG)));
        let d = toy(&ev, &[]);
        let ctx = FeatureContext::new(&d);
        let chi = ctx.problem_level_performance("u").unwrap();
        assert!((chi - (0.1 - 0.4)).abs() < 1e-15, "{chi}");
    }

    #[test]
    fn performance_swaps_sign_with_symmetric_globals() {
        let build = |c: usize, w: usize| {
            let mut ev = repeat(10 - c, ("s2", "v", "q", "p", CORRECT));
            ev.extend(repeat(10 - w, ("s2", "v", "q", "p", WRONG)));
            ev.extend(repeat(c, ("s1", "u", "r1", "p", CORRECT)));
            ev.extend(repeat(w, ("s1", "u", "r1", "p", WRONG)));
            let d = toy(&ev, &[]);
            FeatureContext::new(&d)
                .problem_level_performance("u")
                .unwrap()
        };
        assert!((build(1, 2) + 0.1).abs() < 1e-15);
        assert!((build(2, 1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn multi_link_duplicates_count_once_globally() {
        let mut d = toy(&[("s1", "u1", "r", "p", HINT)], &[]);
        let mut copy = d.events[0].clone();
        copy.end_unit_assignment_id = "u2".into();
        d.events.push(copy);
        d.relationships.insert("u2".into(), vec!["r".into()]);
        d.assignments.insert(
            "u2".into(),
            AssignmentInstance {
                assignment_id: "u2".into(),
                student_id: "s1".into(),
                sequence_path: Default::default(),
                is_end_unit: true,
            },
        );
        let ctx = FeatureContext::new(&d);
        assert_eq!(ctx.stats().count("p", HINT), 1);
        assert_eq!(ctx.student_action_counts("s1").unwrap()[HINT.index()], 1.0);
        assert_eq!(
            ctx.assignment_action_counts("u2").unwrap()[HINT.index()],
            1.0
        );
        assert_eq!(ctx.problem_weighted_avg("u2").unwrap()[HINT.index()], 1.0);
    }
}

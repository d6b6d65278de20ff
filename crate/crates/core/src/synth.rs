//! Seeded generator of clickstream datasets with a planted, recoverable signal.
//!
//! Every student has a latent ability `a ~ N(0, 1)` and every problem a latent
//! difficulty `d = offset(type) + N(0, 0.5²)`. In-unit behavior follows a
//! logistic response model in `a - d`, and the end-unit label is drawn from
//! `sigmoid(1.5 a - d)`.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    ActionEvent, ActionKind, AssignmentInstance, Dataset, LabeledRow, Problem, ProblemType,
};
use crate::rng::{seeded, sigmoid};

pub use crate::data::write_dataset;

/// Weight of ability in the end-unit label logit.
pub const LABEL_ABILITY_WEIGHT: f64 = 1.5;
/// Per-problem spread of difficulty around its type offset.
pub const PROBLEM_DIFFICULTY_SD: f64 = 0.5;

const N_SKILLS: usize = 40;
const CURRICULA: [&str; 2] = ["Illustrative Mathematics", "EngageNY"];
const GRADES: [&str; 6] = [
    "Grade 6",
    "Grade 7",
    "Grade 8",
    "Algebra I",
    "Geometry",
    "Algebra II",
];
const TIMESTAMP_BASE: u64 = 1_600_000_000_000;

#[derive(Debug, Error)]
#[error("invalid generator config: {0}")]
pub struct ConfigInvalid(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_students: usize,
    pub n_problems: usize,
    pub n_end_units_per_student: usize,
    pub n_in_units_per_end_unit: usize,
    pub problems_per_assignment: usize,
    pub embedding_dim: usize,
    pub seed: u64,
    /// Std of a per-(student, end-unit) perturbation of the ability that
    /// drives in-unit behavior. Labels always use the unperturbed ability.
    pub ability_noise: f64,
    /// Missing types get offset 0.
    pub type_difficulty_offsets: BTreeMap<ProblemType, f64>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_students: 500,
            n_problems: 1000,
            n_end_units_per_student: 4,
            n_in_units_per_end_unit: 1,
            problems_per_assignment: 6,
            embedding_dim: 64,
            seed: 7,
            ability_noise: 0.0,
            type_difficulty_offsets: default_offsets(),
        }
    }
}

/// Evenly spaced offsets, hardest first: exact-match (ignore case),
/// check-all-that-apply and ordering lead.
pub fn default_offsets() -> BTreeMap<ProblemType, f64> {
    use ProblemType::*;
    let hardest_first = [
        ExactMatchIgnoreCase,
        CheckAllThatApply,
        Ordering,
        AlgebraicExpression,
        ExactFraction,
        NumericExpression,
        ExactMatchCaseSensitive,
        Number,
        UngradedOpenResponse,
        MultipleChoice,
    ];
    hardest_first
        .iter()
        .enumerate()
        .map(|(i, t)| (*t, 1.35 - 0.3 * i as f64))
        .collect()
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), ConfigInvalid> {
        let counts = [
            ("n_students", self.n_students),
            ("n_problems", self.n_problems),
            ("n_end_units_per_student", self.n_end_units_per_student),
            ("n_in_units_per_end_unit", self.n_in_units_per_end_unit),
            ("problems_per_assignment", self.problems_per_assignment),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(ConfigInvalid(format!("{name} must be at least 1")));
            }
        }
        if self.embedding_dim < 33 {
            return Err(ConfigInvalid(format!(
                "embedding_dim must be at least 33, got {}",
                self.embedding_dim
            )));
        }
        if self.problems_per_assignment > self.n_problems {
            return Err(ConfigInvalid(
                "problems_per_assignment exceeds n_problems".into(),
            ));
        }
        if !(self.ability_noise.is_finite() && self.ability_noise >= 0.0) {
            return Err(ConfigInvalid(
                "ability_noise must be finite and >= 0".into(),
            ));
        }
        if self
            .type_difficulty_offsets
            .values()
            .any(|v| !v.is_finite())
        {
            return Err(ConfigInvalid("difficulty offsets must be finite".into()));
        }
        Ok(())
    }

    pub fn offset(&self, t: ProblemType) -> f64 {
        self.type_difficulty_offsets.get(&t).copied().unwrap_or(0.0)
    }
}

/// Latent variables behind a generated dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub abilities: IndexMap<String, f64>,
    pub difficulties: IndexMap<String, f64>,
}

impl GroundTruth {
    /// True label logit `1.5 a - d` of a row.
    pub fn row_logit(&self, d: &Dataset, row: &LabeledRow) -> Option<f64> {
        let student = d.row_student(row)?;
        let a = self.abilities.get(student)?;
        let diff = self.difficulties.get(&row.problem_id)?;
        Some(LABEL_ABILITY_WEIGHT * a - diff)
    }

    /// Writes `kind,id,value` rows: `ability` per student, then `difficulty`
    /// per problem.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        w.write_record(["kind", "id", "value"])?;
        for (id, v) in &self.abilities {
            w.write_record(["ability", id, &v.to_string()])?;
        }
        for (id, v) in &self.difficulties {
            w.write_record(["difficulty", id, &v.to_string()])?;
        }
        w.flush()
    }
}

pub fn generate_dataset(cfg: &GenConfig) -> Result<(Dataset, GroundTruth), ConfigInvalid> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let spread = Normal::new(0.0, PROBLEM_DIFFICULTY_SD).expect("valid normal");

    let mut truth = GroundTruth::default();
    let mut d = Dataset::default();

    let mut problem_ids = Vec::with_capacity(cfg.n_problems);
    let mut difficulty = Vec::with_capacity(cfg.n_problems);
    for p in 0..cfg.n_problems {
        let problem_type = ProblemType::ALL[p % ProblemType::ALL.len()];
        let dp = cfg.offset(problem_type) + spread.sample(&mut rng);
        let skill = rng.random_range(0..N_SKILLS);
        let mut embedding = Vec::with_capacity(cfg.embedding_dim);
        embedding.push(dp);
        embedding.extend((1..cfg.embedding_dim).map(|_| std_normal.sample(&mut rng)));
        let id = format!("prb{p:05}");
        d.problems.insert(
            id.clone(),
            Problem {
                problem_id: id.clone(),
                problem_type,
                skill_code: format!("skill_{skill:02}"),
                embedding: Some(embedding),
            },
        );
        truth.difficulties.insert(id.clone(), dp);
        problem_ids.push(id);
        difficulty.push(dp);
    }

    let mut log_index = 0usize;
    for s in 0..cfg.n_students {
        let student_id = format!("stu{s:05}");
        let ability = std_normal.sample(&mut rng);
        truth.abilities.insert(student_id.clone(), ability);
        let mut clock = TIMESTAMP_BASE;

        for e in 0..cfg.n_end_units_per_student {
            let eu_id = format!("eu{s:05}_{e}");
            let path = [
                CURRICULA[rng.random_range(0..CURRICULA.len())].to_string(),
                GRADES[rng.random_range(0..GRADES.len())].to_string(),
                format!("Unit {}", rng.random_range(1..=8)),
                format!("Section {}", (b'A' + rng.random_range(0..4u8)) as char),
            ];
            d.assignments.insert(
                eu_id.clone(),
                AssignmentInstance {
                    assignment_id: eu_id.clone(),
                    student_id: student_id.clone(),
                    sequence_path: path.clone(),
                    is_end_unit: true,
                },
            );
            let behaving_ability = if cfg.ability_noise > 0.0 {
                ability + cfg.ability_noise * std_normal.sample(&mut rng)
            } else {
                ability
            };

            let mut linked = Vec::with_capacity(cfg.n_in_units_per_end_unit);
            for i in 0..cfg.n_in_units_per_end_unit {
                let iu_id = format!("iu{s:05}_{e}_{i}");
                d.assignments.insert(
                    iu_id.clone(),
                    AssignmentInstance {
                        assignment_id: iu_id.clone(),
                        student_id: student_id.clone(),
                        sequence_path: path.clone(),
                        is_end_unit: false,
                    },
                );
                let mut emit = |kind: ActionKind, problem: &str| {
                    d.events.push(ActionEvent {
                        timestamp: clock,
                        student_id: student_id.clone(),
                        end_unit_assignment_id: eu_id.clone(),
                        in_unit_assignment_id: iu_id.clone(),
                        problem_id: problem.to_string(),
                        kind,
                        log_index,
                    });
                    clock += 1000;
                    log_index += 1;
                };
                let picks = sample(&mut rng, cfg.n_problems, cfg.problems_per_assignment);
                emit(ActionKind::AssignmentStarted, &problem_ids[picks.index(0)]);
                for p in picks.iter() {
                    let pid = &problem_ids[p];
                    let margin = behaving_ability - difficulty[p];
                    emit(ActionKind::ProblemStarted, pid);
                    if rng.random::<f64>() < sigmoid(margin) {
                        emit(ActionKind::CorrectResponse, pid);
                    } else {
                        emit(ActionKind::WrongResponse, pid);
                    }
                    let need = sigmoid(-margin);
                    for (kind, rate) in [
                        (ActionKind::HintRequested, 0.3),
                        (ActionKind::AnswerRequested, 0.2),
                        (ActionKind::ExplanationRequested, 0.1),
                    ] {
                        if rng.random::<f64>() < need * rate {
                            emit(kind, pid);
                        }
                    }
                    emit(ActionKind::ProblemFinished, pid);
                    emit(ActionKind::ContinueSelected, pid);
                }
                let last = picks.index(picks.len() - 1);
                emit(ActionKind::AssignmentFinished, &problem_ids[last]);
                linked.push(iu_id);
            }
            d.relationships.insert(eu_id.clone(), linked);

            for p in sample(&mut rng, cfg.n_problems, cfg.problems_per_assignment).iter() {
                let prob = sigmoid(LABEL_ABILITY_WEIGHT * ability - difficulty[p]);
                let score = u8::from(rng.random::<f64>() < prob);
                d.rows.push(LabeledRow {
                    end_unit_assignment_id: eu_id.clone(),
                    problem_id: problem_ids[p].clone(),
                    score: Some(score),
                });
            }
        }
    }
    Ok((d, truth))
}

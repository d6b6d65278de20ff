use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Writer};
use indexmap::IndexMap;

use super::{
    ActionEvent, ActionKind, AssignmentInstance, DataError, Dataset, LabeledRow, Problem,
    ProblemType, UNKNOWN_LEVEL,
};

pub const ACTION_LOGS: &str = "action_logs.csv";
pub const RELATIONSHIPS: &str = "relationships.csv";
pub const PROBLEMS: &str = "problems.csv";
pub const ASSIGNMENTS: &str = "assignments.csv";
pub const LABELS: &str = "labels.csv";

const ACTION_HEADER: [&str; 5] = [
    "timestamp",
    "student_id",
    "in_unit_assignment_id",
    "problem_id",
    "action",
];
const RELATIONSHIP_HEADER: [&str; 2] = ["end_unit_assignment_id", "in_unit_assignment_id"];
const PROBLEM_HEADER: [&str; 3] = ["problem_id", "problem_type", "skill_code"];
const ASSIGNMENT_HEADER: [&str; 7] = [
    "assignment_id",
    "student_id",
    "seq_level_1",
    "seq_level_2",
    "seq_level_3",
    "seq_level_4",
    "is_end_unit",
];
const LABEL_HEADER: [&str; 3] = ["end_unit_assignment_id", "problem_id", "score"];

#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub action_logs: PathBuf,
    pub relationships: PathBuf,
    pub problems: PathBuf,
    pub assignments: PathBuf,
    pub labels: PathBuf,
}

impl DatasetPaths {
    /// The five standard file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            action_logs: dir.join(ACTION_LOGS),
            relationships: dir.join(RELATIONSHIPS),
            problems: dir.join(PROBLEMS),
            assignments: dir.join(ASSIGNMENTS),
            labels: dir.join(LABELS),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    /// Fail on the first unresolvable reference or unknown action.
    Strict,
    /// Drop unresolvable records and count them.
    Lenient,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// Records dropped because a referenced id did not resolve.
    pub drop_count: usize,
    /// Log lines whose action is outside the tracked vocabulary.
    pub unknown_actions: usize,
}

struct CsvFile {
    name: String,
    path: PathBuf,
    header: StringRecord,
    reader: csv::Reader<File>,
}

impl CsvFile {
    fn open(path: &Path) -> Result<Self, DataError> {
        if !path.is_file() {
            return Err(DataError::MissingFile {
                path: path.to_path_buf(),
            });
        }
        let file = File::open(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = ReaderBuilder::new().has_headers(true).from_reader(file);
        let header = reader
            .headers()
            .map_err(|source| DataError::Csv {
                path: path.to_path_buf(),
                source,
            })?
            .clone();
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self {
            name,
            path: path.to_path_buf(),
            header,
            reader,
        })
    }

    fn expect_prefix(&self, expected: &[&str]) -> Result<(), DataError> {
        for (i, want) in expected.iter().enumerate() {
            match self.header.get(i) {
                Some(got) if got == *want => {}
                Some(got) => {
                    return Err(self.schema(got, &format!("expected `{want}` at position {i}")))
                }
                None => return Err(self.schema(want, "column missing")),
            }
        }
        Ok(())
    }

    fn expect_exact(&self, expected: &[&str]) -> Result<(), DataError> {
        self.expect_prefix(expected)?;
        if let Some(extra) = self.header.get(expected.len()) {
            return Err(self.schema(extra, "unexpected column"));
        }
        Ok(())
    }

    fn schema(&self, column: &str, detail: &str) -> DataError {
        DataError::SchemaMismatch {
            file: self.name.clone(),
            column: column.to_string(),
            detail: detail.to_string(),
        }
    }

    fn records(&mut self) -> impl Iterator<Item = Result<(u64, StringRecord), DataError>> + '_ {
        let path = self.path.clone();
        self.reader.records().map(move |r| {
            let rec = r.map_err(|source| DataError::Csv {
                path: path.clone(),
                source,
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            Ok((line, rec))
        })
    }
}

fn field<'r>(
    file: &str,
    line: u64,
    rec: &'r StringRecord,
    idx: usize,
    column: &str,
) -> Result<&'r str, DataError> {
    rec.get(idx).ok_or_else(|| DataError::InvalidValue {
        file: file.to_string(),
        line,
        column: column.to_string(),
        value: String::new(),
    })
}

fn id_field(
    file: &str,
    line: u64,
    rec: &StringRecord,
    idx: usize,
    column: &str,
) -> Result<String, DataError> {
    let v = field(file, line, rec, idx, column)?;
    if v.is_empty() {
        return Err(invalid(file, line, column, v));
    }
    Ok(v.to_string())
}

fn invalid(file: &str, line: u64, column: &str, value: &str) -> DataError {
    DataError::InvalidValue {
        file: file.to_string(),
        line,
        column: column.to_string(),
        value: value.to_string(),
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

/// Tracks dangling references according to the load mode.
struct Resolver {
    mode: LoadMode,
    dropped: usize,
}

impl Resolver {
    /// `Ok(true)` keeps the record, `Ok(false)` drops it (lenient only).
    fn check(
        &mut self,
        resolved: bool,
        file: &str,
        line: u64,
        kind: &'static str,
        id: &str,
    ) -> Result<bool, DataError> {
        if resolved {
            return Ok(true);
        }
        match self.mode {
            LoadMode::Strict => Err(DataError::DanglingReference {
                file: file.to_string(),
                line,
                kind,
                id: id.to_string(),
            }),
            LoadMode::Lenient => {
                self.dropped += 1;
                Ok(false)
            }
        }
    }
}

/// Reads and validates the five input files.
pub fn load_dataset(
    paths: &DatasetPaths,
    mode: LoadMode,
) -> Result<(Dataset, LoadStats), DataError> {
    // open everything first so a missing file is reported before any parsing
    let problems_f = CsvFile::open(&paths.problems)?;
    let assignments_f = CsvFile::open(&paths.assignments)?;
    let relationships_f = CsvFile::open(&paths.relationships)?;
    let actions_f = CsvFile::open(&paths.action_logs)?;
    let labels_f = CsvFile::open(&paths.labels)?;

    let mut resolver = Resolver { mode, dropped: 0 };
    let problems = read_problems(problems_f)?;
    let assignments = read_assignments(assignments_f)?;
    let relationships = read_relationships(relationships_f, &assignments, &mut resolver)?;
    let (events, unknown_actions) = read_actions(
        actions_f,
        &problems,
        &assignments,
        &relationships,
        &mut resolver,
    )?;
    let rows = read_labels(labels_f, &problems, &assignments, &mut resolver)?;

    let dataset = Dataset {
        events,
        relationships,
        problems,
        assignments,
        rows,
    };
    Ok((
        dataset,
        LoadStats {
            drop_count: resolver.dropped,
            unknown_actions,
        },
    ))
}

fn read_problems(mut f: CsvFile) -> Result<IndexMap<String, Problem>, DataError> {
    f.expect_prefix(&PROBLEM_HEADER)?;
    let dim = f.header.len() - PROBLEM_HEADER.len();
    for i in 0..dim {
        let got = &f.header[PROBLEM_HEADER.len() + i];
        if got != format!("emb_{i}") {
            return Err(f.schema(got, &format!("expected `emb_{i}`")));
        }
    }
    let name = f.name.clone();
    let mut out = IndexMap::new();
    for rec in f.records() {
        let (line, rec) = rec?;
        let problem_id = id_field(&name, line, &rec, 0, "problem_id")?;
        let raw_type = field(&name, line, &rec, 1, "problem_type")?;
        let problem_type: ProblemType = raw_type
            .parse()
            .map_err(|_| invalid(&name, line, "problem_type", raw_type))?;
        let skill_code = field(&name, line, &rec, 2, "skill_code")?.to_string();
        let cells: Vec<&str> = (0..dim)
            .map(|i| field(&name, line, &rec, 3 + i, &format!("emb_{i}")))
            .collect::<Result<_, _>>()?;
        let embedding = if dim == 0 || cells.iter().all(|c| c.is_empty()) {
            None
        } else {
            let mut v = Vec::with_capacity(dim);
            for (i, c) in cells.iter().enumerate() {
                let x: f64 = c
                    .parse()
                    .ok()
                    .filter(|x: &f64| x.is_finite())
                    .ok_or_else(|| invalid(&name, line, &format!("emb_{i}"), c))?;
                v.push(x);
            }
            Some(v)
        };
        if out.contains_key(&problem_id) {
            return Err(DataError::DuplicateRow {
                file: name,
                line,
                key: problem_id,
            });
        }
        out.insert(
            problem_id.clone(),
            Problem {
                problem_id,
                problem_type,
                skill_code,
                embedding,
            },
        );
    }
    Ok(out)
}

fn read_assignments(mut f: CsvFile) -> Result<IndexMap<String, AssignmentInstance>, DataError> {
    f.expect_exact(&ASSIGNMENT_HEADER)?;
    let name = f.name.clone();
    let mut out = IndexMap::new();
    for rec in f.records() {
        let (line, rec) = rec?;
        let assignment_id = id_field(&name, line, &rec, 0, "assignment_id")?;
        let student_id = id_field(&name, line, &rec, 1, "student_id")?;
        let mut levels: [String; 4] = Default::default();
        for (i, level) in levels.iter_mut().enumerate() {
            let raw = field(&name, line, &rec, 2 + i, ASSIGNMENT_HEADER[2 + i])?;
            *level = if raw.is_empty() {
                UNKNOWN_LEVEL.to_string()
            } else {
                raw.to_string()
            };
        }
        let raw_flag = field(&name, line, &rec, 6, "is_end_unit")?;
        let is_end_unit =
            parse_bool(raw_flag).ok_or_else(|| invalid(&name, line, "is_end_unit", raw_flag))?;
        if out.contains_key(&assignment_id) {
            return Err(DataError::DuplicateRow {
                file: name,
                line,
                key: assignment_id,
            });
        }
        out.insert(
            assignment_id.clone(),
            AssignmentInstance {
                assignment_id,
                student_id,
                sequence_path: levels,
                is_end_unit,
            },
        );
    }
    Ok(out)
}

fn read_relationships(
    mut f: CsvFile,
    assignments: &IndexMap<String, AssignmentInstance>,
    resolver: &mut Resolver,
) -> Result<IndexMap<String, Vec<String>>, DataError> {
    f.expect_exact(&RELATIONSHIP_HEADER)?;
    let name = f.name.clone();
    let mut out: IndexMap<String, Vec<String>> = IndexMap::new();
    let mut seen = HashSet::new();
    for rec in f.records() {
        let (line, rec) = rec?;
        let eu = id_field(&name, line, &rec, 0, "end_unit_assignment_id")?;
        let iu = id_field(&name, line, &rec, 1, "in_unit_assignment_id")?;
        if eu == iu {
            return Err(DataError::SelfLink { line, id: eu });
        }
        if !resolver.check(
            assignments.contains_key(&eu),
            &name,
            line,
            "assignment",
            &eu,
        )? || !resolver.check(
            assignments.contains_key(&iu),
            &name,
            line,
            "assignment",
            &iu,
        )? {
            continue;
        }
        if !seen.insert((eu.clone(), iu.clone())) {
            return Err(DataError::DuplicateRow {
                file: name,
                line,
                key: format!("{eu},{iu}"),
            });
        }
        out.entry(eu).or_default().push(iu);
    }
    Ok(out)
}

fn read_actions(
    mut f: CsvFile,
    problems: &IndexMap<String, Problem>,
    assignments: &IndexMap<String, AssignmentInstance>,
    relationships: &IndexMap<String, Vec<String>>,
    resolver: &mut Resolver,
) -> Result<(Vec<ActionEvent>, usize), DataError> {
    f.expect_exact(&ACTION_HEADER)?;
    let mut links: HashMap<&str, Vec<&str>> = HashMap::new();
    for (eu, ius) in relationships {
        for iu in ius {
            links.entry(iu.as_str()).or_default().push(eu.as_str());
        }
    }
    let name = f.name.clone();
    let mode = resolver.mode;
    let mut events = Vec::new();
    let mut unknown = 0usize;
    for (log_index, rec) in f.records().enumerate() {
        let (line, rec) = rec?;
        let raw_ts = field(&name, line, &rec, 0, "timestamp")?;
        let timestamp: u64 = raw_ts
            .parse()
            .map_err(|_| invalid(&name, line, "timestamp", raw_ts))?;
        let student_id = id_field(&name, line, &rec, 1, "student_id")?;
        let iu = id_field(&name, line, &rec, 2, "in_unit_assignment_id")?;
        let problem_id = id_field(&name, line, &rec, 3, "problem_id")?;
        let raw_action = field(&name, line, &rec, 4, "action")?;
        let kind = match raw_action.parse::<ActionKind>() {
            Ok(k) => k,
            Err(_) if mode == LoadMode::Lenient => {
                unknown += 1;
                continue;
            }
            Err(_) => return Err(invalid(&name, line, "action", raw_action)),
        };
        if !resolver.check(
            problems.contains_key(&problem_id),
            &name,
            line,
            "problem",
            &problem_id,
        )? || !resolver.check(
            assignments.contains_key(&iu),
            &name,
            line,
            "assignment",
            &iu,
        )? {
            continue;
        }
        let linked = links.get(iu.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        if !resolver.check(!linked.is_empty(), &name, line, "relationship for", &iu)? {
            continue;
        }
        for eu in linked {
            events.push(ActionEvent {
                timestamp,
                student_id: student_id.clone(),
                end_unit_assignment_id: eu.to_string(),
                in_unit_assignment_id: iu.clone(),
                problem_id: problem_id.clone(),
                kind,
                log_index,
            });
        }
    }
    Ok((events, unknown))
}

fn read_labels(
    mut f: CsvFile,
    problems: &IndexMap<String, Problem>,
    assignments: &IndexMap<String, AssignmentInstance>,
    resolver: &mut Resolver,
) -> Result<Vec<LabeledRow>, DataError> {
    let has_score = f.header.len() == LABEL_HEADER.len();
    if has_score {
        f.expect_exact(&LABEL_HEADER)?;
    } else {
        f.expect_exact(&LABEL_HEADER[..2])?;
    }
    let name = f.name.clone();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for rec in f.records() {
        let (line, rec) = rec?;
        let eu = id_field(&name, line, &rec, 0, "end_unit_assignment_id")?;
        let problem_id = id_field(&name, line, &rec, 1, "problem_id")?;
        let score = if has_score {
            match field(&name, line, &rec, 2, "score")?.trim() {
                "" => None,
                "0" => Some(0),
                "1" => Some(1),
                other => return Err(invalid(&name, line, "score", other)),
            }
        } else {
            None
        };
        if !resolver.check(
            assignments.contains_key(&eu),
            &name,
            line,
            "assignment",
            &eu,
        )? || !resolver.check(
            problems.contains_key(&problem_id),
            &name,
            line,
            "problem",
            &problem_id,
        )? {
            continue;
        }
        if !seen.insert((eu.clone(), problem_id.clone())) {
            return Err(DataError::DuplicateRow {
                file: name,
                line,
                key: format!("{eu},{problem_id}"),
            });
        }
        rows.push(LabeledRow {
            end_unit_assignment_id: eu,
            problem_id,
            score,
        });
    }
    Ok(rows)
}

fn create_writer(dir: &Path, file: &str) -> Result<(PathBuf, Writer<File>), DataError> {
    let path = dir.join(file);
    let handle = File::create(&path).map_err(|source| DataError::Io {
        path: path.clone(),
        source,
    })?;
    Ok((path, Writer::from_writer(handle)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> DataError + '_ {
    move |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the five CSVs into `dir`, creating it if needed. Events are written
/// once per `log_index`, so `load_dataset` reproduces the dataset.
pub fn write_dataset(d: &Dataset, dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::with_capacity(5);

    let (path, mut w) = create_writer(dir, ACTION_LOGS)?;
    w.write_record(ACTION_HEADER).map_err(csv_err(&path))?;
    let mut seen = HashSet::new();
    for e in &d.events {
        if !seen.insert(e.log_index) {
            continue;
        }
        w.write_record([
            e.timestamp.to_string().as_str(),
            &e.student_id,
            &e.in_unit_assignment_id,
            &e.problem_id,
            e.kind.as_str(),
        ])
        .map_err(csv_err(&path))?;
    }
    finish(w, &path)?;
    written.push(path);

    let (path, mut w) = create_writer(dir, RELATIONSHIPS)?;
    w.write_record(RELATIONSHIP_HEADER)
        .map_err(csv_err(&path))?;
    for (eu, ius) in &d.relationships {
        for iu in ius {
            w.write_record([eu, iu]).map_err(csv_err(&path))?;
        }
    }
    finish(w, &path)?;
    written.push(path);

    let (path, mut w) = create_writer(dir, PROBLEMS)?;
    let dim = d.embedding_dim().unwrap_or(0);
    let mut header: Vec<String> = PROBLEM_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|i| format!("emb_{i}")));
    w.write_record(&header).map_err(csv_err(&path))?;
    for p in d.problems.values() {
        let mut rec = vec![
            p.problem_id.clone(),
            p.problem_type.as_str().to_string(),
            p.skill_code.clone(),
        ];
        match &p.embedding {
            Some(v) => rec.extend(v.iter().map(|x| x.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), dim)),
        }
        w.write_record(&rec).map_err(csv_err(&path))?;
    }
    finish(w, &path)?;
    written.push(path);

    let (path, mut w) = create_writer(dir, ASSIGNMENTS)?;
    w.write_record(ASSIGNMENT_HEADER).map_err(csv_err(&path))?;
    for a in d.assignments.values() {
        let [l1, l2, l3, l4] = &a.sequence_path;
        w.write_record([
            a.assignment_id.as_str(),
            &a.student_id,
            l1,
            l2,
            l3,
            l4,
            if a.is_end_unit { "true" } else { "false" },
        ])
        .map_err(csv_err(&path))?;
    }
    finish(w, &path)?;
    written.push(path);

    let (path, mut w) = create_writer(dir, LABELS)?;
    let has_score = d.rows.is_empty() || d.rows.iter().any(|r| r.score.is_some());
    if has_score {
        w.write_record(LABEL_HEADER).map_err(csv_err(&path))?;
    } else {
        w.write_record(&LABEL_HEADER[..2]).map_err(csv_err(&path))?;
    }
    for r in &d.rows {
        if has_score {
            let score = r.score.map(|s| s.to_string()).unwrap_or_default();
            w.write_record([r.end_unit_assignment_id.as_str(), &r.problem_id, &score])
        } else {
            w.write_record([r.end_unit_assignment_id.as_str(), &r.problem_id])
        }
        .map_err(csv_err(&path))?;
    }
    finish(w, &path)?;
    written.push(path);

    Ok(written)
}

fn finish(mut w: Writer<File>, path: &Path) -> Result<(), DataError> {
    w.flush().map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

//! Alpaca-format dataset assembly and leakage auditing.
//!
//! Domain text maps to `instruction`, problem text to `input` and the plan
//! to `output`. A dataset directory holds `train.json`, `valid.json`,
//! `test.json`, `spillover.json` (unused records, kept for growing the
//! dataset later) and `manifest.json`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{normalize_problem_name, Fingerprint};
use crate::generate::rng_for;
use crate::io_util::write_atomic;
use crate::layout::SessionLayout;
use crate::pddl::{parse_domain, parse_problem, Domain};
use crate::planner::{read_planning_log, PlanStatus, PLANNING_LOG};
use crate::symbol::Symbol;
use crate::validate::{parse_plan, validate};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("record field {0} is empty")]
    EmptyField(&'static str),
    #[error("duplicate record {0}")]
    Duplicate(Fingerprint),
    #[error("not enough records: {}", format_shortfalls(.0))]
    Insufficient(Vec<Shortfall>),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortfall {
    pub domain: Symbol,
    pub available: usize,
    pub required: usize,
}

fn format_shortfalls(s: &[Shortfall]) -> String {
    s.iter()
        .map(|x| format!("{} has {} of {} required", x.domain, x.available, x.required))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Identity of a record: instruction plus input with the problem name
/// normalized, so renaming a problem does not make it new.
pub fn record_fingerprint(instruction: &str, input: &str) -> Fingerprint {
    Fingerprint::of_parts(&[instruction.as_bytes(), normalize_problem_name(input).as_bytes()])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub fingerprint: Fingerprint,
    pub domain_tag: Symbol,
}

impl DatasetRecord {
    pub fn new(
        instruction: String,
        input: String,
        output: String,
        domain_tag: Symbol,
    ) -> Result<Self, DatasetError> {
        for (name, v) in [("instruction", &instruction), ("input", &input), ("output", &output)] {
            if v.trim().is_empty() {
                return Err(DatasetError::EmptyField(name));
            }
        }
        let fingerprint = record_fingerprint(&instruction, &input);
        Ok(DatasetRecord {
            instruction,
            input,
            output,
            fingerprint,
            domain_tag,
        })
    }
}

/// The on-disk record: exactly these three keys, in this order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlpacaRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

#[derive(Serialize)]
struct AlpacaRef<'a> {
    instruction: &'a str,
    input: &'a str,
    output: &'a str,
}

impl<'a> From<&'a DatasetRecord> for AlpacaRef<'a> {
    fn from(r: &'a DatasetRecord) -> Self {
        AlpacaRef {
            instruction: &r.instruction,
            input: &r.input,
            output: &r.output,
        }
    }
}

/// One record as a pretty-printed JSON object.
pub fn to_alpaca(r: &DatasetRecord) -> String {
    serde_json::to_string_pretty(&AlpacaRef::from(r)).expect("strings serialize")
}

fn alpaca_array(records: &[DatasetRecord]) -> String {
    let refs: Vec<AlpacaRef> = records.iter().map(AlpacaRef::from).collect();
    let mut s = serde_json::to_string_pretty(&refs).expect("strings serialize");
    s.push('\n');
    s
}

/// Spillover keeps the domain tag so the records can be reused later.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpilloverRecord {
    domain: String,
    instruction: String,
    input: String,
    output: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// Per-domain quotas; split totals are their sums.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub seed: u64,
    pub domains: BTreeMap<Symbol, SplitCounts>,
}

impl SplitSpec {
    pub fn single(domain: Symbol, counts: SplitCounts, seed: u64) -> Self {
        SplitSpec {
            seed,
            domains: BTreeMap::from([(domain, counts)]),
        }
    }

    /// Splits the totals evenly across `domains`; the first domains take
    /// the remainder when a total does not divide evenly.
    pub fn balanced(domains: &[Symbol], totals: SplitCounts, seed: u64) -> Self {
        let n = domains.len().max(1);
        let share = |total: usize, i: usize| total / n + usize::from(i < total % n);
        SplitSpec {
            seed,
            domains: domains
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    (
                        d.clone(),
                        SplitCounts {
                            train: share(totals.train, i),
                            val: share(totals.val, i),
                            test: share(totals.test, i),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn totals(&self) -> SplitCounts {
        self.domains.values().fold(SplitCounts::default(), |a, c| SplitCounts {
            train: a.train + c.train,
            val: a.val + c.val,
            test: a.test + c.test,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assembly {
    pub train: Vec<DatasetRecord>,
    pub val: Vec<DatasetRecord>,
    pub test: Vec<DatasetRecord>,
    pub spillover: Vec<DatasetRecord>,
}

/// Splits `records` according to `spec`.
///
/// The result depends only on the set of records and the spec: records
/// are put in fingerprint order before the seeded shuffle, so the order
/// in which they are supplied does not matter.
pub fn assemble(records: Vec<DatasetRecord>, spec: &SplitSpec) -> Result<Assembly, DatasetError> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in &records {
        if !seen.insert(r.fingerprint) {
            return Err(DatasetError::Duplicate(r.fingerprint));
        }
    }
    let mut by_domain: BTreeMap<Symbol, Vec<DatasetRecord>> = BTreeMap::new();
    for r in records {
        by_domain.entry(r.domain_tag.clone()).or_default().push(r);
    }
    let shortfalls: Vec<Shortfall> = spec
        .domains
        .iter()
        .filter_map(|(d, counts)| {
            let available = by_domain.get(d).map_or(0, Vec::len);
            (available < counts.total()).then(|| Shortfall {
                domain: d.clone(),
                available,
                required: counts.total(),
            })
        })
        .collect();
    if !shortfalls.is_empty() {
        return Err(DatasetError::Insufficient(shortfalls));
    }

    let mut rng = rng_for(spec.seed, 0);
    let mut out = Assembly {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        spillover: Vec::new(),
    };
    for (domain, mut pool) in by_domain {
        pool.sort_by_key(|r| r.fingerprint);
        let Some(counts) = spec.domains.get(&domain) else {
            out.spillover.extend(pool);
            continue;
        };
        pool.shuffle(&mut rng);
        let mut rest = pool.into_iter();
        out.train.extend(rest.by_ref().take(counts.train));
        out.val.extend(rest.by_ref().take(counts.val));
        out.test.extend(rest.by_ref().take(counts.test));
        out.spillover.extend(rest);
    }
    // Mix domains within each split.
    out.train.shuffle(&mut rng);
    out.val.shuffle(&mut rng);
    out.test.shuffle(&mut rng);
    out.spillover.sort_by_key(|r| r.fingerprint);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub file: String,
    pub count: usize,
    pub per_domain: BTreeMap<String, usize>,
    /// Fingerprint of the file bytes.
    pub content_hash: Fingerprint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool_version: String,
    pub seed: u64,
    pub splits: BTreeMap<String, SplitManifest>,
    pub spillover: usize,
    pub sources: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_prefix: Option<String>,
}

pub const SPLIT_FILES: [(&str, &str); 3] = [("train", "train.json"), ("val", "valid.json"), ("test", "test.json")];

/// Writes the split files and manifest into `dir`.
pub fn write_dataset(
    dir: &Path,
    a: &Assembly,
    spec: &SplitSpec,
    sources: &[String],
    instruction_prefix: Option<&str>,
) -> Result<Manifest, DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut splits = BTreeMap::new();
    for ((name, file), records) in SPLIT_FILES.iter().zip([&a.train, &a.val, &a.test]) {
        let text = alpaca_array(records);
        let path = dir.join(file);
        write_atomic(&path, text.as_bytes()).map_err(io_err(&path))?;
        let mut per_domain = BTreeMap::new();
        for r in records.iter() {
            *per_domain.entry(r.domain_tag.to_string()).or_insert(0) += 1;
        }
        splits.insert(
            name.to_string(),
            SplitManifest {
                file: file.to_string(),
                count: records.len(),
                per_domain,
                content_hash: Fingerprint::of(text.as_bytes()),
            },
        );
    }
    let spill: Vec<SpilloverRecord> = a
        .spillover
        .iter()
        .map(|r| SpilloverRecord {
            domain: r.domain_tag.to_string(),
            instruction: r.instruction.clone(),
            input: r.input.clone(),
            output: r.output.clone(),
        })
        .collect();
    let path = dir.join("spillover.json");
    let mut text = serde_json::to_string_pretty(&spill).expect("strings serialize");
    text.push('\n');
    write_atomic(&path, text.as_bytes()).map_err(io_err(&path))?;

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: spec.seed,
        splits,
        spillover: a.spillover.len(),
        sources: sources.to_vec(),
        instruction_prefix: instruction_prefix.map(str::to_string),
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&path, text.as_bytes()).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Reads the spillover file of an earlier assembly.
pub fn read_spillover(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let recs: Vec<SpilloverRecord> = serde_json::from_str(&text).map_err(|e| DatasetError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    recs.into_iter()
        .map(|r| {
            let tag = Symbol::new(&r.domain).map_err(|e| DatasetError::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            DatasetRecord::new(r.instruction, r.input, r.output, tag)
        })
        .collect()
}

pub fn read_split(path: &Path) -> Result<Vec<AlpacaRecord>, DatasetError> {
    let text = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&text).map_err(|e| DatasetError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Dataset records for every solved problem of a planning session.
///
/// `instruction_prefix`, when given, is prepended to the domain text
/// followed by a blank line.
pub fn records_from_session(
    session_dir: &Path,
    instruction_prefix: Option<&str>,
) -> Result<Vec<DatasetRecord>, DatasetError> {
    let layout = SessionLayout::new(session_dir);
    let dpath = layout.domain_file();
    let domain_text = fs::read_to_string(&dpath).map_err(io_err(&dpath))?;
    let domain = parse_domain(&domain_text).map_err(|e| DatasetError::Format {
        path: dpath.clone(),
        message: e.to_string(),
    })?;
    let instruction = match instruction_prefix {
        Some(p) => format!("{p}\n\n{domain_text}"),
        None => domain_text,
    };
    let log_path = layout.log(PLANNING_LOG);
    let log = read_planning_log(&log_path).map_err(|e| DatasetError::Format {
        path: log_path,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for entry in log.iter().filter(|e| e.status == PlanStatus::Solved) {
        let ppath = layout.problem_file(&entry.problem);
        let plan_path = layout.plan_file(&entry.problem);
        let input = fs::read_to_string(&ppath).map_err(io_err(&ppath))?;
        let output = fs::read_to_string(&plan_path).map_err(io_err(&plan_path))?;
        if output.trim().is_empty() {
            // An empty plan solves a problem whose goal holds initially;
            // such a record would have no output and is left out.
            continue;
        }
        out.push(DatasetRecord::new(instruction.clone(), input, output, domain.name.clone())?);
    }
    Ok(out)
}

/// Start of the domain definition inside an instruction that may carry a prefix.
fn domain_text(instruction: &str) -> &str {
    instruction
        .find("(define")
        .map_or(instruction, |i| &instruction[i..])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevalidationFailure {
    pub index: usize,
    pub message: String,
}

/// Checks that every output is a valid plan for its instruction and input.
///
/// Records are checked in parallel; failures are returned in index order.
pub fn revalidate(records: &[AlpacaRecord]) -> Vec<RevalidationFailure> {
    let mut domains: HashMap<&str, Result<Domain, String>> = HashMap::new();
    for r in records {
        let text = domain_text(&r.instruction);
        domains
            .entry(text)
            .or_insert_with(|| parse_domain(text).map_err(|e| e.to_string()));
    }
    let mut failures: Vec<RevalidationFailure> = records
        .par_iter()
        .enumerate()
        .filter_map(|(index, r)| {
            let fail = |message: String| Some(RevalidationFailure { index, message });
            let d = match &domains[domain_text(&r.instruction)] {
                Ok(d) => d,
                Err(e) => return fail(format!("instruction: {e}")),
            };
            let p = match parse_problem(&r.input, d) {
                Ok(p) => p,
                Err(e) => return fail(format!("input: {e}")),
            };
            let plan = match parse_plan(&r.output) {
                Ok(p) => p,
                Err(e) => return fail(format!("output: {e}")),
            };
            let report = validate(d, &p, &plan);
            if report.valid {
                None
            } else {
                fail(report.to_string())
            }
        })
        .collect();
    failures.sort_by_key(|f| f.index);
    failures
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overlap {
    pub first: String,
    pub second: String,
    pub fingerprints: Vec<Fingerprint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageReport {
    pub counts: Vec<(String, usize)>,
    /// Pairwise intersections, only non-empty ones.
    pub overlaps: Vec<Overlap>,
    /// Records repeated inside one split.
    pub repeats: Vec<(String, Fingerprint)>,
}

impl LeakageReport {
    pub fn passed(&self) -> bool {
        self.overlaps.is_empty() && self.repeats.is_empty()
    }
}

impl fmt::Display for LeakageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, n) in &self.counts {
            writeln!(f, "{name}: {n} records")?;
        }
        for o in &self.overlaps {
            for fp in &o.fingerprints {
                writeln!(f, "leak: {} shared by {} and {}", fp, o.first, o.second)?;
            }
        }
        for (name, fp) in &self.repeats {
            writeln!(f, "repeat: {fp} appears more than once in {name}")?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Recomputes record fingerprints from the split files themselves and
/// reports every fingerprint shared between two splits.
pub fn audit_leakage(splits: &[(&str, &Path)]) -> Result<LeakageReport, DatasetError> {
    let sets: Vec<(String, Vec<Fingerprint>)> = splits
        .par_iter()
        .map(|(name, path)| {
            let records = read_split(path)?;
            let fps = records
                .par_iter()
                .map(|r| record_fingerprint(&r.instruction, &r.input))
                .collect();
            Ok((name.to_string(), fps))
        })
        .collect::<Result<_, DatasetError>>()?;

    let mut report = LeakageReport {
        counts: sets.iter().map(|(n, v)| (n.clone(), v.len())).collect(),
        overlaps: Vec::new(),
        repeats: Vec::new(),
    };
    let mut unique: Vec<HashSet<Fingerprint>> = Vec::with_capacity(sets.len());
    for (name, fps) in &sets {
        let mut set = HashSet::with_capacity(fps.len());
        for fp in fps {
            if !set.insert(*fp) {
                report.repeats.push((name.clone(), *fp));
            }
        }
        unique.push(set);
    }
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let mut shared: Vec<Fingerprint> = unique[i].intersection(&unique[j]).copied().collect();
            if !shared.is_empty() {
                shared.sort();
                report.overlaps.push(Overlap {
                    first: sets[i].0.clone(),
                    second: sets[j].0.clone(),
                    fingerprints: shared,
                });
            }
        }
    }
    Ok(report)
}

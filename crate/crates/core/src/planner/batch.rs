//! Planning every problem of a generation session.
//!
//! Writes `plans/<problem>.plan` for solved problems and appends one line
//! per problem to `logs/planning.log`:
//!
//! ```text
//! problem  status  wall_time  plan_length
//! ```
//!
//! Problems already present in the log are skipped, so an interrupted
//! batch can simply be rerun.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use thiserror::Error;

use super::{resolve_executable, solve, PlanResult, PlanStatus, PlannerAdapter};
use crate::io_util::write_atomic;
use crate::layout::SessionLayout;
use crate::pddl::{parse_domain, parse_problem, Domain};
use crate::stats::Summary;
use crate::validate::validate;

pub const PLANNING_LOG: &str = "planning.log";
const DIAGNOSTICS: &str = "planning.diag";
const LOG_HEADER: &str = "problem\tstatus\twall_time\tplan_length";

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{path}:{line}: malformed planning log line {text:?}")]
    Log { path: PathBuf, line: usize, text: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BatchError + '_ {
    move |source| BatchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    /// Overrides the adapter's default timeout.
    pub timeout: Option<Duration>,
    pub workers: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            timeout: None,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningLogEntry {
    pub problem: String,
    pub status: PlanStatus,
    pub wall_time: f64,
    pub plan_length: Option<usize>,
}

impl PlanningLogEntry {
    fn line(&self) -> String {
        let len = self.plan_length.map_or_else(|| "-".to_string(), |n| n.to_string());
        format!("{}\t{}\t{:.6}\t{len}", self.problem, self.status.as_str(), self.wall_time)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    /// Entries produced by this run, in problem order.
    pub entries: Vec<PlanningLogEntry>,
    /// Problems skipped because an earlier run logged them.
    pub skipped: usize,
    /// Logged problems (this run and earlier ones) without a valid plan;
    /// the number of replacement problems to generate.
    pub shortfall: usize,
    pub crashed: usize,
}

impl BatchReport {
    pub fn solved(&self) -> usize {
        self.entries.iter().filter(|e| e.status == PlanStatus::Solved).count()
    }

    /// Wall-time statistics over this run's entries.
    pub fn wall_time_summary(&self) -> Option<Summary> {
        Summary::of(&self.entries.iter().map(|e| e.wall_time).collect::<Vec<_>>())
    }
}

pub fn read_planning_log(path: &Path) -> Result<Vec<PlanningLogEntry>, BatchError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = || BatchError::Log {
            path: path.to_path_buf(),
            line: i + 1,
            text: line.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [problem, status, wall, len] = fields.as_slice() else {
            return Err(bad());
        };
        out.push(PlanningLogEntry {
            problem: problem.to_string(),
            status: PlanStatus::parse(status).ok_or_else(bad)?,
            wall_time: wall.parse().map_err(|_| bad())?,
            plan_length: match *len {
                "-" => None,
                n => Some(n.parse().map_err(|_| bad())?),
            },
        });
    }
    Ok(out)
}

/// Sorted `(id, path)` of every problem file in `problems/`.
pub(crate) fn list_problems(session_dir: &Path) -> Result<Vec<(String, PathBuf)>, BatchError> {
    let dir = SessionLayout::new(session_dir).problems();
    let mut out = Vec::new();
    for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
        let path = entry.map_err(io_err(&dir))?.path();
        if path.extension().is_some_and(|e| e == "pddl") {
            let id = path.file_stem().unwrap().to_string_lossy().into_owned();
            out.push((id, path));
        }
    }
    out.sort();
    Ok(out)
}

struct Outcome {
    entry: PlanningLogEntry,
    plan_text: Option<String>,
    diagnostic: Option<String>,
}

/// Solves and, for solved results, checks the plan against its problem.
fn attempt(
    adapter: &PlannerAdapter,
    domain: &Domain,
    domain_file: &Path,
    id: &str,
    problem_file: &Path,
    timeout: Option<Duration>,
) -> Outcome {
    let result = match solve(adapter, domain_file, problem_file, timeout) {
        Ok(r) => r,
        Err(e) => PlanResult::unsolved(PlanStatus::Crashed, 0.0, String::new(), Some(e.to_string())),
    };
    let mut status = result.status;
    let mut diagnostic = result.diagnostic.clone();
    let mut plan_text = None;
    if let Some(plan) = &result.plan {
        let gate = fs::read_to_string(problem_file)
            .map_err(|e| e.to_string())
            .and_then(|t| parse_problem(&t, domain).map_err(|e| e.to_string()))
            .map(|p| validate(domain, &p, plan));
        match gate {
            Ok(report) if report.valid => plan_text = Some(plan.to_text()),
            Ok(report) => {
                status = PlanStatus::Crashed;
                diagnostic = Some(format!("plan failed validation: {report}"));
            }
            Err(e) => {
                status = PlanStatus::Crashed;
                diagnostic = Some(format!("problem unreadable for validation: {e}"));
            }
        }
    }
    Outcome {
        entry: PlanningLogEntry {
            problem: id.to_string(),
            status,
            wall_time: result.wall_time,
            plan_length: plan_text.as_ref().and(result.plan_length()),
        },
        plan_text,
        diagnostic,
    }
}

/// Plans every problem of `session_dir` not yet in its planning log.
///
/// Workers pull problems from a shared queue; results are written by the
/// calling thread in problem order, so the log does not depend on the
/// worker count (apart from measured times).
pub fn plan_batch(
    adapter: &PlannerAdapter,
    session_dir: &Path,
    opts: &BatchOptions,
) -> Result<BatchReport, BatchError> {
    adapter.check().map_err(|e| BatchError::Input {
        path: session_dir.to_path_buf(),
        message: e.to_string(),
    })?;
    if let Some(exe) = &adapter.executable {
        if resolve_executable(exe).is_none() {
            return Err(BatchError::Input {
                path: exe.clone(),
                message: "planner executable not found".into(),
            });
        }
    }
    let layout = SessionLayout::new(session_dir);
    let domain_file = layout.domain_file();
    let domain_text = fs::read_to_string(&domain_file).map_err(io_err(&domain_file))?;
    let domain = parse_domain(&domain_text).map_err(|e| BatchError::Input {
        path: domain_file.clone(),
        message: e.to_string(),
    })?;

    let log_path = layout.log(PLANNING_LOG);
    let previous = read_planning_log(&log_path)?;
    let done: HashSet<&str> = previous.iter().map(|e| e.problem.as_str()).collect();
    let pending: Vec<(String, PathBuf)> = list_problems(session_dir)?
        .into_iter()
        .filter(|(id, _)| !done.contains(id.as_str()))
        .collect();
    let skipped = done.len();

    let plans_dir = layout.plans();
    for d in [&plans_dir, &layout.logs()] {
        fs::create_dir_all(d).map_err(io_err(d))?;
    }
    if !log_path.exists() {
        fs::write(&log_path, format!("{LOG_HEADER}\n")).map_err(io_err(&log_path))?;
    }
    let mut log = OpenOptions::new()
        .append(true)
        .open(&log_path)
        .map_err(io_err(&log_path))?;
    let diag_path = layout.log(DIAGNOSTICS);
    let mut diag = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&diag_path)
        .map_err(io_err(&diag_path))?;

    let next = AtomicUsize::new(0);
    let workers = opts.workers.clamp(1, pending.len().max(1));
    let mut entries = Vec::with_capacity(pending.len());
    thread::scope(|scope| -> Result<(), BatchError> {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending, domain, domain_file) = (&next, &pending, &domain, &domain_file);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((id, path)) = pending.get(i) else { break };
                let outcome = attempt(adapter, domain, domain_file, id, path, opts.timeout);
                if tx.send((i, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut buffer: BTreeMap<usize, Outcome> = BTreeMap::new();
        let mut written = 0;
        for (i, outcome) in rx {
            buffer.insert(i, outcome);
            while let Some(o) = buffer.remove(&written) {
                if let Some(text) = &o.plan_text {
                    let path = plans_dir.join(format!("{}.plan", o.entry.problem));
                    write_atomic(&path, text.as_bytes()).map_err(io_err(&path))?;
                }
                if let Some(d) = &o.diagnostic {
                    let one_line = d.replace(['\n', '\t'], " ");
                    writeln!(diag, "{}\t{one_line}", o.entry.problem).map_err(io_err(&diag_path))?;
                }
                writeln!(log, "{}", o.entry.line())
                    .and_then(|()| log.flush())
                    .map_err(io_err(&log_path))?;
                entries.push(o.entry);
                written += 1;
            }
        }
        Ok(())
    })?;

    let unsolved_before = previous.iter().filter(|e| e.status != PlanStatus::Solved).count();
    let unsolved_now = entries.iter().filter(|e| e.status != PlanStatus::Solved).count();
    let crashed = entries.iter().filter(|e| e.status == PlanStatus::Crashed).count();
    Ok(BatchReport {
        entries,
        skipped,
        shortfall: unsolved_before + unsolved_now,
        crashed,
    })
}

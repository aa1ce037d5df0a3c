//! Planner adapters, subprocess execution and the built-in reference planner.
//!
//! Adapters are plain data, usually loaded from a registry file:
//!
//! ```json
//! {"adapters": [
//!   {"name": "probe", "executable": "/opt/probe/probe",
//!    "args": ["-d", "{domain}", "-i", "{problem}", "-o", "{output}"],
//!    "output": "plan_file", "dialect": "probe", "timeout": 60},
//!   {"name": "bfs", "builtin": "bfs", "timeout": 60}
//! ]}
//! ```

mod batch;
mod bfs;
mod normalize;

pub use batch::{
    plan_batch, read_planning_log, BatchOptions, BatchReport, PlanningLogEntry, PLANNING_LOG,
};
pub use bfs::{reference_plan, SearchLimits, EXPANSION_BUDGET};
pub use normalize::{normalize_output, ConversionError};

use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{parse_domain, parse_problem, PddlError};
use crate::validate::{parse_plan, Plan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Solved,
    Timeout,
    NoSolution,
    Crashed,
}

impl PlanStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanStatus::Solved => "solved",
            PlanStatus::Timeout => "timeout",
            PlanStatus::NoSolution => "no_solution",
            PlanStatus::Crashed => "crashed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            PlanStatus::Solved,
            PlanStatus::Timeout,
            PlanStatus::NoSolution,
            PlanStatus::Crashed,
        ]
        .into_iter()
        .find(|st| st.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub status: PlanStatus,
    /// Present iff `status` is `Solved`.
    pub plan: Option<Plan>,
    /// Seconds, rounded to microseconds.
    pub wall_time: f64,
    pub raw_output: String,
    /// Why the run did not produce a plan, when known.
    pub diagnostic: Option<String>,
    /// The reference planner gave up on its expansion budget.
    pub budget_exhausted: bool,
}

impl PlanResult {
    fn unsolved(status: PlanStatus, wall_time: f64, raw_output: String, diagnostic: Option<String>) -> Self {
        PlanResult {
            status,
            plan: None,
            wall_time,
            raw_output,
            diagnostic,
            budget_exhausted: false,
        }
    }

    pub fn plan_length(&self) -> Option<usize> {
        self.plan.as_ref().map(Plan::len)
    }
}

pub(crate) fn round_micros(seconds: f64) -> f64 {
    (seconds * 1e6).round() / 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    PlanFile,
    Stdout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    /// Already one `(action args)` per line.
    ValNative,
    /// Step-numbered listing followed by search statistics.
    Probe,
    /// Lines matching `action` carry a step (capture group `step`, or the
    /// whole match); lines matching `ignore` are noise; anything else is an error.
    Custom {
        action: String,
        #[serde(default)]
        ignore: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// Breadth-first search; see [`reference_plan`].
    Bfs,
}

fn default_output() -> OutputMode {
    OutputMode::Stdout
}

fn default_dialect() -> Dialect {
    Dialect::ValNative
}

fn default_timeout() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerAdapter {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub executable: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    /// Argument template; `{domain}`, `{problem}` and `{output}` are substituted.
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_output")]
    pub output: OutputMode,
    #[serde(default = "default_dialect")]
    pub dialect: Dialect,
    /// Default timeout in seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter {name}: {message}")]
    Invalid { name: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("no planner adapter named {0:?}")]
    Unknown(String),
}

const PLACEHOLDERS: [&str; 3] = ["{domain}", "{problem}", "{output}"];

impl PlannerAdapter {
    /// The in-process breadth-first reference planner.
    pub fn builtin_bfs() -> Self {
        PlannerAdapter {
            name: "bfs".into(),
            executable: None,
            builtin: Some(Builtin::Bfs),
            args: Vec::new(),
            output: OutputMode::Stdout,
            dialect: Dialect::ValNative,
            timeout: default_timeout(),
        }
    }

    pub fn check(&self) -> Result<(), AdapterError> {
        let invalid = |message: &str| AdapterError::Invalid {
            name: self.name.clone(),
            message: message.into(),
        };
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(invalid("timeout must be positive"));
        }
        match (&self.executable, &self.builtin) {
            (Some(_), Some(_)) => return Err(invalid("set either executable or builtin, not both")),
            (None, None) => return Err(invalid("one of executable or builtin is required")),
            (None, Some(_)) => return Ok(()),
            (Some(_), None) => {}
        }
        let joined = self.args.join(" ");
        for needed in ["{domain}", "{problem}"] {
            if !joined.contains(needed) {
                return Err(invalid(&format!("argument template lacks {needed}")));
            }
        }
        if self.output == OutputMode::PlanFile && !joined.contains("{output}") {
            return Err(invalid("plan_file output needs {output} in the argument template"));
        }
        for arg in &self.args {
            let mut rest = arg.as_str();
            while let Some(open) = rest.find('{') {
                let tail = &rest[open..];
                match PLACEHOLDERS.iter().find(|p| tail.starts_with(**p)) {
                    Some(p) => rest = &tail[p.len()..],
                    None => {
                        return Err(invalid(&format!("unknown placeholder in argument {arg:?}")));
                    }
                }
            }
        }
        if let Dialect::Custom { action, ignore } = &self.dialect {
            for re in std::iter::once(action).chain(ignore) {
                regex::Regex::new(re).map_err(|e| invalid(&format!("bad dialect regex: {e}")))?;
            }
        }
        Ok(())
    }

    fn substitute(&self, domain: &Path, problem: &Path, output: &Path) -> Vec<String> {
        self.args
            .iter()
            .map(|a| {
                a.replace("{domain}", &domain.to_string_lossy())
                    .replace("{problem}", &problem.to_string_lossy())
                    .replace("{output}", &output.to_string_lossy())
            })
            .collect()
    }
}

/// A named set of adapters. The built-in `bfs` adapter is always present
/// unless the registry file defines its own `bfs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterRegistry {
    pub adapters: Vec<PlannerAdapter>,
}

impl Default for AdapterRegistry {
    fn default() -> Self {
        AdapterRegistry {
            adapters: vec![PlannerAdapter::builtin_bfs()],
        }
    }
}

impl AdapterRegistry {
    pub fn parse(text: &str, path: &Path) -> Result<Self, AdapterError> {
        let mut reg: AdapterRegistry = serde_json::from_str(text).map_err(|source| AdapterError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        for a in &reg.adapters {
            a.check()?;
            if reg.adapters.iter().filter(|b| b.name == a.name).count() > 1 {
                return Err(AdapterError::Invalid {
                    name: a.name.clone(),
                    message: "defined more than once".into(),
                });
            }
        }
        if !reg.adapters.iter().any(|a| a.name == "bfs") {
            reg.adapters.push(PlannerAdapter::builtin_bfs());
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, AdapterError> {
        let text = fs::read_to_string(path).map_err(|source| AdapterError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn get(&self, name: &str) -> Result<&PlannerAdapter, AdapterError> {
        self.adapters
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| AdapterError::Unknown(name.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("planner executable {0} not found")]
    ExecutableMissing(PathBuf),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: PddlError },
}

fn resolve_executable(exe: &Path) -> Option<PathBuf> {
    if exe.components().count() > 1 || exe.is_absolute() {
        return exe.is_file().then(|| exe.to_path_buf());
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(exe))
        .find(|p| p.is_file())
}

fn scratch_path() -> PathBuf {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("pddlforge-{}-{n}.plan", std::process::id()))
}

fn read_input(path: &Path) -> Result<String, SolveError> {
    fs::read_to_string(path).map_err(|source| SolveError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// How long to wait for output pipes after the child is gone.
const PIPE_GRACE: Duration = Duration::from_millis(500);

/// Runs `adapter` on one domain/problem pair.
///
/// `timeout` overrides the adapter default. The child is killed (with its
/// whole process group on unix) when the timeout expires.
pub fn solve(
    adapter: &PlannerAdapter,
    domain_file: &Path,
    problem_file: &Path,
    timeout: Option<Duration>,
) -> Result<PlanResult, SolveError> {
    adapter.check()?;
    let timeout = timeout.unwrap_or_else(|| Duration::from_secs_f64(adapter.timeout));
    for f in [domain_file, problem_file] {
        if !f.is_file() {
            return Err(SolveError::Io {
                path: f.to_path_buf(),
                source: io::Error::new(io::ErrorKind::NotFound, "no such file"),
            });
        }
    }
    match (adapter.builtin, &adapter.executable) {
        (Some(Builtin::Bfs), _) => solve_builtin(domain_file, problem_file, timeout),
        (None, Some(exe)) => {
            let exe = resolve_executable(exe).ok_or_else(|| SolveError::ExecutableMissing(exe.clone()))?;
            solve_external(adapter, &exe, domain_file, problem_file, timeout)
        }
        (None, None) => unreachable!("checked adapter"),
    }
}

fn solve_builtin(domain_file: &Path, problem_file: &Path, timeout: Duration) -> Result<PlanResult, SolveError> {
    let d = parse_domain(&read_input(domain_file)?).map_err(|source| SolveError::Input {
        path: domain_file.to_path_buf(),
        source,
    })?;
    let p = parse_problem(&read_input(problem_file)?, &d).map_err(|source| SolveError::Input {
        path: problem_file.to_path_buf(),
        source,
    })?;
    let limits = SearchLimits {
        deadline: Some(Instant::now() + timeout),
        ..SearchLimits::default()
    };
    Ok(reference_plan(&d, &p, limits))
}

fn spawn_reader<R: Read + Send + 'static>(mut pipe: R) -> mpsc::Receiver<Vec<u8>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        let _ = tx.send(buf);
    });
    rx
}

fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    {
        // The child leads its own process group; take down everything it started.
        // SAFETY: kill(2) has no memory-safety preconditions.
        unsafe {
            libc::kill(-(child.id() as i32), libc::SIGKILL);
        }
    }
    let _ = child.kill();
    let _ = child.wait();
}

fn tail(text: &str, max_lines: usize) -> String {
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(max_lines)..].join("\n")
}

fn solve_external(
    adapter: &PlannerAdapter,
    exe: &Path,
    domain_file: &Path,
    problem_file: &Path,
    timeout: Duration,
) -> Result<PlanResult, SolveError> {
    let output_file = scratch_path();
    let args = adapter.substitute(domain_file, problem_file, &output_file);
    let mut cmd = Command::new(exe);
    cmd.args(&args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }

    let started = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => {
            return Ok(PlanResult::unsolved(
                PlanStatus::Crashed,
                0.0,
                String::new(),
                Some(format!("spawn failed: {e}")),
            ))
        }
    };
    let stdout = spawn_reader(child.stdout.take().expect("piped"));
    let stderr = spawn_reader(child.stderr.take().expect("piped"));

    let deadline = started + timeout;
    let mut pause = Duration::from_millis(1);
    let exit = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {}
            Err(e) => {
                kill_tree(&mut child);
                let _ = fs::remove_file(&output_file);
                return Ok(PlanResult::unsolved(
                    PlanStatus::Crashed,
                    round_micros(started.elapsed().as_secs_f64()),
                    String::new(),
                    Some(format!("wait failed: {e}")),
                ));
            }
        }
        let now = Instant::now();
        if now >= deadline {
            break None;
        }
        thread::sleep(pause.min(deadline - now));
        pause = (pause * 2).min(Duration::from_millis(20));
    };
    let wall_time = round_micros(started.elapsed().as_secs_f64());
    if exit.is_none() {
        kill_tree(&mut child);
    }
    let out = String::from_utf8_lossy(&stdout.recv_timeout(PIPE_GRACE).unwrap_or_default()).into_owned();
    let err = String::from_utf8_lossy(&stderr.recv_timeout(PIPE_GRACE).unwrap_or_default()).into_owned();
    let plan_file = fs::read_to_string(&output_file).ok();
    let _ = fs::remove_file(&output_file);

    let Some(status) = exit else {
        return Ok(PlanResult::unsolved(
            PlanStatus::Timeout,
            wall_time,
            out,
            Some(format!("killed after {:.3}s", timeout.as_secs_f64())),
        ));
    };
    if !status.success() {
        return Ok(PlanResult::unsolved(
            PlanStatus::Crashed,
            wall_time,
            out,
            Some(format!("exited with {status}: {}", tail(&err, 5))),
        ));
    }
    let raw = match adapter.output {
        OutputMode::Stdout => out,
        OutputMode::PlanFile => match plan_file {
            Some(text) => text,
            // Planners that write a plan file only write it when they find a plan.
            None => return Ok(PlanResult::unsolved(PlanStatus::NoSolution, wall_time, out, None)),
        },
    };
    Ok(interpret_output(&adapter.dialect, raw, wall_time))
}

fn interpret_output(dialect: &Dialect, raw: String, wall_time: f64) -> PlanResult {
    if raw.trim().is_empty() {
        return PlanResult::unsolved(PlanStatus::NoSolution, wall_time, raw, None);
    }
    let normalized = match normalize_output(dialect, &raw) {
        Ok(n) => n,
        Err(ConversionError::NoSteps) => {
            return PlanResult::unsolved(PlanStatus::NoSolution, wall_time, raw, None)
        }
        Err(e) => return PlanResult::unsolved(PlanStatus::Crashed, wall_time, raw, Some(e.to_string())),
    };
    match parse_plan(&normalized) {
        Ok(plan) => PlanResult {
            status: PlanStatus::Solved,
            plan: Some(plan),
            wall_time,
            raw_output: raw,
            diagnostic: None,
            budget_exhausted: false,
        },
        Err(e) => PlanResult::unsolved(PlanStatus::Crashed, wall_time, raw, Some(e.to_string())),
    }
}

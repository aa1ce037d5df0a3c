//! Evaluation of model-generated plans served by a text-completion endpoint.
//!
//! [`run_inference`] sends one request per test case and records the raw
//! completion with its client-side latency; [`score`] validates every
//! completion against its problem and aggregates validity, plan-length and
//! latency statistics; [`export_report`] writes them as JSON and as an
//! aligned text table.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dataset::AlpacaRecord;
use crate::io_util::write_atomic;
use crate::pddl::{parse_domain, parse_problem, Domain};
use crate::stats::Summary;
use crate::validate::{parse_plan, validate, validity_rate, ValidationReport, ValidityRate};

pub mod mock;

pub const DEFAULT_PROMPT_TEMPLATE: &str = "Below is an instruction that describes a task, paired with an input that provides further context. Write a response that appropriately completes the request.\n\n### Instruction:\n{instruction}\n\n### Input:\n{input}\n\n### Response:\n";

pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_TXT: &str = "metrics.txt";
pub const INFERENCES_JSONL: &str = "inferences.jsonl";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("endpoint config: {0}")]
    Config(String),
    #[error("endpoint {url} unreachable: {reason}")]
    Unreachable { url: String, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn default_body() -> Value {
    serde_json::json!({
        "prompt": "{prompt}",
        "temperature": "{temperature}",
        "max_tokens": "{max_tokens}",
    })
}

fn default_pointer() -> Option<String> {
    Some("/choices/0/text".into())
}

fn default_name() -> String {
    "model".into()
}

fn default_template() -> String {
    DEFAULT_PROMPT_TEMPLATE.into()
}

fn default_temperature() -> f64 {
    0.01
}

fn default_context() -> usize {
    3096
}

fn default_chars_per_token() -> f64 {
    4.0
}

fn default_timeout() -> f64 {
    300.0
}

fn default_workers() -> usize {
    1
}

/// How to reach a completion endpoint and build its requests.
///
/// In `body`, the string values `"{prompt}"`, `"{temperature}"` and
/// `"{max_tokens}"` are replaced by the prompt text and the numbers;
/// `{prompt}` is also substituted inside longer strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Label of the solver in reports.
    #[serde(default = "default_name")]
    pub name: String,
    pub url: String,
    /// Uses `{instruction}` and `{input}`.
    #[serde(default = "default_template")]
    pub prompt_template: String,
    #[serde(default = "default_body")]
    pub body: Value,
    /// JSON pointer to the completion in the response; `null` takes the raw body.
    #[serde(default = "default_pointer")]
    pub response_pointer: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Combined prompt and completion budget in tokens.
    #[serde(default = "default_context")]
    pub context_tokens: usize,
    /// Characters per token used to estimate prompt length.
    #[serde(default = "default_chars_per_token")]
    pub chars_per_token: f64,
    /// Completion length; defaults to whatever the prompt leaves of the budget.
    #[serde(default)]
    pub max_tokens: Option<usize>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Retry once after a transport failure.
    #[serde(default)]
    pub retry: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        EndpointConfig {
            name: default_name(),
            url: url.into(),
            prompt_template: default_template(),
            body: default_body(),
            response_pointer: default_pointer(),
            temperature: default_temperature(),
            context_tokens: default_context(),
            chars_per_token: default_chars_per_token(),
            max_tokens: None,
            timeout_secs: default_timeout(),
            retry: false,
            workers: default_workers(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let c: EndpointConfig = serde_json::from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text).map_err(|e| EvalError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    // negated comparisons so that NaN is rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn check(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Config(m.into()));
        if !(self.temperature >= 0.0) {
            return bad("temperature must be non-negative");
        }
        if !(self.chars_per_token > 0.0) {
            return bad("chars_per_token must be positive");
        }
        if !(self.timeout_secs > 0.0) {
            return bad("timeout_secs must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if let Err(e) = url::Url::parse(&self.url) {
            return Err(EvalError::Config(format!("url {:?}: {e}", self.url)));
        }
        Ok(())
    }

    pub fn prompt(&self, case: &EvalCase) -> String {
        self.prompt_template
            .replace("{instruction}", &case.instruction)
            .replace("{input}", &case.input)
    }

    pub fn estimate_tokens(&self, text: &str) -> usize {
        (text.chars().count() as f64 / self.chars_per_token).ceil() as usize
    }

    /// Completion budget for a prompt, or `None` if the prompt alone exceeds the context.
    pub fn completion_budget(&self, prompt: &str) -> Option<usize> {
        let left = self.context_tokens.checked_sub(self.estimate_tokens(prompt))?;
        if left == 0 {
            return None;
        }
        Some(self.max_tokens.map_or(left, |m| m.min(left)))
    }

    pub fn request_body(&self, prompt: &str, max_tokens: usize) -> Value {
        fn fill(v: &Value, prompt: &str, temperature: f64, max_tokens: usize) -> Value {
            match v {
                Value::String(s) => match s.as_str() {
                    "{prompt}" => Value::String(prompt.to_string()),
                    "{temperature}" => serde_json::json!(temperature),
                    "{max_tokens}" => serde_json::json!(max_tokens),
                    _ => Value::String(s.replace("{prompt}", prompt)),
                },
                Value::Array(a) => Value::Array(a.iter().map(|x| fill(x, prompt, temperature, max_tokens)).collect()),
                Value::Object(o) => Value::Object(
                    o.iter()
                        .map(|(k, x)| (k.clone(), fill(x, prompt, temperature, max_tokens)))
                        .collect(),
                ),
                other => other.clone(),
            }
        }
        fill(&self.body, prompt, self.temperature, max_tokens)
    }
}

/// One test item: the domain and problem a completion is requested for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalCase {
    pub id: String,
    pub instruction: String,
    pub input: String,
}

/// Cases numbered by their position in a dataset split.
pub fn cases_from_split(records: &[AlpacaRecord]) -> Vec<EvalCase> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| EvalCase {
            id: format!("{i:05}"),
            instruction: r.instruction.clone(),
            input: r.input.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceStatus {
    Ok,
    Timeout,
    TransportError,
    HttpError,
    BadResponse,
    /// Not sent: the estimated prompt length leaves no room in the context.
    PromptTooLong,
}

impl InferenceStatus {
    fn retryable(self) -> bool {
        matches!(self, InferenceStatus::Timeout | InferenceStatus::TransportError)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRecord {
    pub id: String,
    /// Completion exactly as returned.
    pub text: String,
    /// Seconds, measured around the request.
    pub latency: f64,
    pub status: InferenceStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceRun {
    pub records: Vec<InferenceRecord>,
    /// Requests overlapped, so latencies are not comparable to sequential runs.
    pub parallel: bool,
}

fn check_reachable(url: &str, timeout: Duration) -> Result<(), EvalError> {
    let unreachable = |reason: String| EvalError::Unreachable {
        url: url.to_string(),
        reason,
    };
    let parsed = url::Url::parse(url).map_err(|e| unreachable(e.to_string()))?;
    let addrs = parsed
        .socket_addrs(|| None)
        .map_err(|e| unreachable(e.to_string()))?;
    let mut last = String::from("no address");
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(_) => return Ok(()),
            Err(e) => last = e.to_string(),
        }
    }
    Err(unreachable(last))
}

fn extract(pointer: Option<&str>, body: String) -> Result<String, String> {
    let Some(ptr) = pointer else { return Ok(body) };
    let v: Value = serde_json::from_str(&body).map_err(|e| format!("response is not JSON: {e}"))?;
    match v.pointer(ptr) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(format!("{ptr} is not a string: {other}")),
        None => Err(format!("response has no {ptr}")),
    }
}

fn request_once(agent: &ureq::Agent, cfg: &EndpointConfig, body: &Value) -> (InferenceStatus, String, Option<String>) {
    let mut resp = match agent.post(&cfg.url).send_json(body) {
        Ok(r) => r,
        Err(ureq::Error::Timeout(t)) => return (InferenceStatus::Timeout, String::new(), Some(format!("timeout: {t}"))),
        Err(e) => return (InferenceStatus::TransportError, String::new(), Some(e.to_string())),
    };
    let code = resp.status().as_u16();
    let text = match resp.body_mut().read_to_string() {
        Ok(t) => t,
        Err(ureq::Error::Timeout(t)) => return (InferenceStatus::Timeout, String::new(), Some(format!("timeout: {t}"))),
        Err(e) => return (InferenceStatus::TransportError, String::new(), Some(e.to_string())),
    };
    if !(200..300).contains(&code) {
        return (InferenceStatus::HttpError, String::new(), Some(format!("http status {code}")));
    }
    match extract(cfg.response_pointer.as_deref(), text) {
        Ok(t) => (InferenceStatus::Ok, t, None),
        Err(e) => (InferenceStatus::BadResponse, String::new(), Some(e)),
    }
}

fn infer_one(agent: &ureq::Agent, cfg: &EndpointConfig, case: &EvalCase) -> InferenceRecord {
    let prompt = cfg.prompt(case);
    let Some(budget) = cfg.completion_budget(&prompt) else {
        return InferenceRecord {
            id: case.id.clone(),
            text: String::new(),
            latency: 0.0,
            status: InferenceStatus::PromptTooLong,
            error: Some(format!(
                "prompt of ~{} tokens exceeds the {}-token context",
                cfg.estimate_tokens(&prompt),
                cfg.context_tokens
            )),
        };
    };
    let body = cfg.request_body(&prompt, budget);
    let attempts = if cfg.retry { 2 } else { 1 };
    let mut out = None;
    for _ in 0..attempts {
        let start = Instant::now();
        let (status, text, error) = request_once(agent, cfg, &body);
        let latency = start.elapsed().as_secs_f64();
        let done = !status.retryable();
        out = Some(InferenceRecord {
            id: case.id.clone(),
            text,
            latency,
            status,
            error,
        });
        if done {
            break;
        }
    }
    out.expect("at least one attempt")
}

/// Queries the endpoint once per case, in case order.
///
/// Aborts before sending anything if the endpoint's host does not accept
/// TCP connections; per-request failures are recorded instead.
pub fn run_inference(cfg: &EndpointConfig, cases: &[EvalCase]) -> Result<InferenceRun, EvalError> {
    cfg.check()?;
    let timeout = Duration::from_secs_f64(cfg.timeout_secs);
    check_reachable(&cfg.url, timeout.min(Duration::from_secs(10)))?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let workers = cfg.workers.clamp(1, cases.len().max(1));
    if workers == 1 {
        let records = cases.iter().map(|c| infer_one(&agent, cfg, c)).collect();
        return Ok(InferenceRun {
            records,
            parallel: false,
        });
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<InferenceRecord>>> = Mutex::new(vec![None; cases.len()]);
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(case) = cases.get(i) else { break };
                let r = infer_one(&agent, cfg, case);
                slots.lock().expect("no panics while held")[i] = Some(r);
            });
        }
    });
    let records = slots
        .into_inner()
        .expect("no panics while held")
        .into_iter()
        .map(|r| r.expect("every case attempted"))
        .collect();
    Ok(InferenceRun {
        records,
        parallel: true,
    })
}

/// Verdict on one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub domain: String,
    pub valid: bool,
    /// A validator failure kind, or `no_response`, `parse_error`, `bad_case`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Present when the inference completed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// Domain name, or the domain names joined by ` & ` for the mixed row.
    pub domains: String,
    pub validity: ValidityRate,
    pub validity_percent: f64,
    /// Lengths of valid plans.
    pub steps: Option<Summary>,
    /// Latencies of completed inferences, valid or not.
    pub time_seconds: Option<Summary>,
    pub failures: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub solver: String,
    pub parallel: bool,
    pub overall: MetricsRow,
    /// One row per domain, in name order.
    pub per_domain: Vec<MetricsRow>,
    /// Sorted by id.
    pub verdicts: Vec<Verdict>,
}

impl EvalMetrics {
    pub fn is_multi_domain(&self) -> bool {
        self.per_domain.len() > 1
    }
}

fn judge(
    case: &EvalCase,
    rec: Option<&InferenceRecord>,
    domains: &HashMap<&str, Result<Domain, String>>,
) -> (Verdict, ValidationReport) {
    let invalid = ValidationReport {
        valid: false,
        failure_step: None,
        failure_kind: None,
        failed_literal: None,
        steps_executed: 0,
    };
    let mut v = Verdict {
        id: case.id.clone(),
        domain: String::from("?"),
        valid: false,
        failure: None,
        steps: None,
        latency: None,
    };
    let domain = match &domains[domain_text(&case.instruction)] {
        Ok(d) => d,
        Err(_) => {
            v.failure = Some("bad_case".into());
            return (v, invalid);
        }
    };
    v.domain = domain.name.to_string();
    let rec = match rec {
        Some(r) if r.status == InferenceStatus::Ok => r,
        _ => {
            v.failure = Some("no_response".into());
            return (v, invalid);
        }
    };
    v.latency = Some(rec.latency);
    let Ok(problem) = parse_problem(&case.input, domain) else {
        v.failure = Some("bad_case".into());
        return (v, invalid);
    };
    let Ok(plan) = parse_plan(&rec.text) else {
        v.failure = Some("parse_error".into());
        return (v, invalid);
    };
    let report = validate(domain, &problem, &plan);
    v.valid = report.valid;
    if report.valid {
        v.steps = Some(plan.len());
    } else {
        v.failure = report.failure_kind.map(|k| k.as_str().to_string());
    }
    (v, report)
}

fn domain_text(instruction: &str) -> &str {
    instruction
        .find("(define")
        .map_or(instruction, |i| &instruction[i..])
}

fn row(domains: String, items: &[&(Verdict, ValidationReport)]) -> MetricsRow {
    let reports: Vec<ValidationReport> = items.iter().map(|(_, r)| r.clone()).collect();
    let validity = validity_rate(&reports).unwrap_or(ValidityRate { valid: 0, total: 0 });
    let steps: Vec<f64> = items.iter().filter_map(|(v, _)| v.steps).map(|s| s as f64).collect();
    let times: Vec<f64> = items.iter().filter_map(|(v, _)| v.latency).collect();
    let mut failures = BTreeMap::new();
    for (v, _) in items {
        if let Some(f) = &v.failure {
            *failures.entry(f.clone()).or_insert(0) += 1;
        }
    }
    MetricsRow {
        domains,
        validity_percent: if validity.total == 0 { 0.0 } else { validity.percent() },
        validity,
        steps: Summary::of(&steps),
        time_seconds: Summary::of(&times),
        failures,
    }
}

/// Validates every completion and aggregates the results.
///
/// Cases without a completed inference count as invalid (`no_response`)
/// and are left out of the latency statistics.
pub fn score(solver: &str, cases: &[EvalCase], run: &InferenceRun) -> EvalMetrics {
    let by_id: HashMap<&str, &InferenceRecord> = run.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut domains: HashMap<&str, Result<Domain, String>> = HashMap::new();
    for c in cases {
        let text = domain_text(&c.instruction);
        domains
            .entry(text)
            .or_insert_with(|| parse_domain(text).map_err(|e| e.to_string()));
    }
    let mut judged: Vec<(Verdict, ValidationReport)> = cases
        .iter()
        .map(|c| judge(c, by_id.get(c.id.as_str()).copied(), &domains))
        .collect();
    judged.sort_by(|a, b| a.0.id.cmp(&b.0.id));

    let mut groups: BTreeMap<&str, Vec<&(Verdict, ValidationReport)>> = BTreeMap::new();
    for j in &judged {
        groups.entry(j.0.domain.as_str()).or_default().push(j);
    }
    let all: Vec<&(Verdict, ValidationReport)> = judged.iter().collect();
    let names: Vec<&str> = groups.keys().copied().collect();
    let overall = row(names.join(" & "), &all);
    let per_domain = groups.iter().map(|(d, items)| row(d.to_string(), items)).collect();
    EvalMetrics {
        solver: solver.to_string(),
        parallel: run.parallel,
        overall,
        per_domain,
        verdicts: judged.into_iter().map(|(v, _)| v).collect(),
    }
}

fn fmt_int_or_tenth(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.1}")
    }
}

/// Validity and plan-length cells, in table column order.
pub fn steps_cells(r: &MetricsRow) -> Vec<String> {
    let mut cells = vec![format!("{:.1}", r.validity_percent)];
    match &r.steps {
        Some(s) => cells.extend([
            format!("{:.2}", s.avg),
            format!("{:.0}", s.min),
            format!("{:.0}", s.max),
            fmt_int_or_tenth(s.median),
        ]),
        None => cells.extend(std::iter::repeat_n("-".to_string(), 4)),
    }
    cells
}

/// Latency cells, in table column order.
pub fn time_cells(r: &MetricsRow) -> Vec<String> {
    match &r.time_seconds {
        Some(t) => [t.avg, t.min, t.max, t.median, t.std]
            .iter()
            .map(|x| format!("{x:.3}"))
            .collect(),
        None => vec!["-".to_string(); 5],
    }
}

pub const STEPS_COLUMNS: [&str; 5] = ["Validity (%)", "Avg_steps", "Min_steps", "Max_steps", "Median_steps"];
pub const TIME_COLUMNS: [&str; 5] = ["Avg_t (s)", "Min_t (s)", "Max_t (s)", "Median_t (s)", "Std_t (s)"];

fn aligned(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for line in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let mut s = String::new();
        for (c, w) in line.iter().zip(&widths) {
            let _ = write!(s, "{c:<w$}  ");
        }
        out.push_str(s.trim_end());
        out.push('\n');
    }
    out
}

fn table(m: &EvalMetrics, columns: &[&str], cells: fn(&MetricsRow) -> Vec<String>) -> String {
    let multi = m.is_multi_domain();
    let mut header = vec!["Solver".to_string()];
    if multi {
        header.push("Domains".into());
    }
    header.extend(columns.iter().map(|c| c.to_string()));
    let rows_of = |r: &MetricsRow| {
        let mut line = vec![m.solver.clone()];
        if multi {
            line.push(r.domains.clone());
        }
        line.extend(cells(r));
        line
    };
    let mut rows = vec![rows_of(&m.overall)];
    if multi {
        rows.extend(m.per_domain.iter().map(rows_of));
    }
    aligned(&header, &rows)
}

/// The plain-text report: validity and plan length, latency, then failure counts.
pub fn render_text(m: &EvalMetrics) -> String {
    let mut out = String::new();
    out.push_str("# Step statistics cover valid plans only.\n");
    out.push_str("# Timing covers every completed inference, including invalid plans.\n");
    if m.parallel {
        out.push_str("# Requests ran in parallel: latencies are not comparable to sequential runs.\n");
    }
    out.push('\n');
    out.push_str(&table(m, &STEPS_COLUMNS, steps_cells));
    out.push('\n');
    out.push_str(&table(m, &TIME_COLUMNS, time_cells));
    out.push('\n');
    let header = vec!["Failure".to_string(), "Count".to_string()];
    let rows: Vec<Vec<String>> = m
        .overall
        .failures
        .iter()
        .map(|(k, n)| vec![k.clone(), n.to_string()])
        .collect();
    if rows.is_empty() {
        out.push_str("Failure  Count\n(none)\n");
    } else {
        out.push_str(&aligned(&header, &rows));
    }
    out
}

/// Writes `metrics.json` and `metrics.txt` into `dir`.
pub fn export_report(m: &EvalMetrics, dir: &Path) -> Result<(), EvalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut json = serde_json::to_string_pretty(m).expect("metrics serialize");
    json.push('\n');
    let jpath = dir.join(METRICS_JSON);
    write_atomic(&jpath, json.as_bytes()).map_err(io_err(&jpath))?;
    let tpath = dir.join(METRICS_TXT);
    write_atomic(&tpath, render_text(m).as_bytes()).map_err(io_err(&tpath))
}

/// Writes one JSON object per inference to `inferences.jsonl` in `dir`.
pub fn write_inferences(records: &[InferenceRecord], dir: &Path) -> Result<(), EvalError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    let path = dir.join(INFERENCES_JSONL);
    write_atomic(&path, out.as_bytes()).map_err(io_err(&path))
}

pub fn read_inferences(path: &Path) -> Result<Vec<InferenceRecord>, EvalError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Format {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

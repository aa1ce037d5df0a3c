//! Plan parsing and exact validation by forward simulation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{apply, holds, CondItem, Domain, GroundAction, Problem, State};
use crate::symbol::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanFormat {
    Bare,
    Timestamped,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlanStep {
    pub action: Symbol,
    pub args: Vec<Symbol>,
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.action)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub source_format: PlanFormat,
}

impl Plan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        Plan {
            steps,
            source_format: PlanFormat::Bare,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One `(action args...)` per line, newline-terminated.
    pub fn to_text(&self) -> String {
        self.steps.iter().map(|s| format!("{s}\n")).collect()
    }
}

impl From<&[GroundAction]> for Plan {
    fn from(actions: &[GroundAction]) -> Self {
        Plan::new(
            actions
                .iter()
                .map(|a| PlanStep {
                    action: a.name().clone(),
                    args: a.args.clone(),
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: malformed plan line: {message}")]
pub struct PlanParseError {
    pub line: usize,
    pub message: String,
}

fn parse_step(body: &str, line: usize) -> Result<PlanStep, PlanParseError> {
    let err = |message: String| PlanParseError { line, message };
    let inner = body
        .strip_prefix('(')
        .and_then(|b| b.strip_suffix(')'))
        .ok_or_else(|| err(format!("expected (action args...), found {body:?}")))?;
    if inner.contains(['(', ')']) {
        return Err(err(format!("nested parentheses in {body:?}")));
    }
    let mut words = inner.split_whitespace();
    let action = words
        .next()
        .ok_or_else(|| err("empty action".into()))
        .and_then(|w| Symbol::new(w).map_err(|e| err(e.to_string())))?;
    let args = words
        .map(|w| Symbol::new(w).map_err(|e| err(e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(PlanStep { action, args })
}

/// Accepts `(action a b)` lines and timestamped `0: (action a b)` lines
/// (an optional trailing `[duration]` is ignored). Blank lines and `;`
/// comments are skipped.
pub fn parse_plan(text: &str) -> Result<Plan, PlanParseError> {
    let mut steps = Vec::new();
    let mut format = PlanFormat::Bare;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut body = line;
        if let Some((stamp, rest)) = line.split_once(':') {
            let stamp = stamp.trim();
            if !stamp.is_empty() && stamp.parse::<f64>().is_ok() && !stamp.starts_with('(') {
                format = PlanFormat::Timestamped;
                body = rest.trim();
            }
        }
        if let Some(open) = body.rfind('[') {
            if body.ends_with(']') && body[..open].trim_end().ends_with(')') {
                body = body[..open].trim_end();
            }
        }
        steps.push(parse_step(body, i + 1)?);
    }
    Ok(Plan {
        steps,
        source_format: format,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    UnknownAction,
    BadArity,
    TypeError,
    PreconditionFailed,
    GoalUnreached,
}

impl FailureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::UnknownAction => "unknown_action",
            FailureKind::BadArity => "bad_arity",
            FailureKind::TypeError => "type_error",
            FailureKind::PreconditionFailed => "precondition_failed",
            FailureKind::GoalUnreached => "goal_unreached",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub valid: bool,
    /// 0-based index of the failing step; absent for valid plans and unreached goals.
    pub failure_step: Option<usize>,
    pub failure_kind: Option<FailureKind>,
    /// The first false precondition conjunct, or the first unsatisfied goal conjunct.
    pub failed_literal: Option<CondItem>,
    pub steps_executed: usize,
}

impl ValidationReport {
    fn valid(steps: usize) -> Self {
        ValidationReport {
            valid: true,
            failure_step: None,
            failure_kind: None,
            failed_literal: None,
            steps_executed: steps,
        }
    }

    fn failed(kind: FailureKind, step: Option<usize>, literal: Option<CondItem>, executed: usize) -> Self {
        ValidationReport {
            valid: false,
            failure_step: step,
            failure_kind: Some(kind),
            failed_literal: literal,
            steps_executed: executed,
        }
    }

    /// `index<TAB>verdict<TAB>failure_kind<TAB>step`, with `-` for absent fields.
    pub fn log_line(&self, index: usize) -> String {
        format!(
            "{index}\t{}\t{}\t{}",
            if self.valid { "valid" } else { "invalid" },
            self.failure_kind.map_or("-", FailureKind::as_str),
            self.failure_step.map_or_else(|| "-".to_string(), |s| s.to_string()),
        )
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.valid {
            return write!(f, "valid: plan of {} steps reaches the goal", self.steps_executed);
        }
        write!(f, "invalid: {}", self.failure_kind.map_or("-", FailureKind::as_str))?;
        if let Some(step) = self.failure_step {
            write!(f, " at step {step}")?;
        }
        if let Some(lit) = &self.failed_literal {
            write!(f, " ({lit})")?;
        }
        write!(f, "; {} steps executed", self.steps_executed)
    }
}

/// Resolves a plan step to a ground action, or the failure kind that prevents it.
pub fn resolve_step(
    domain: &Domain,
    problem: &Problem,
    step: &PlanStep,
) -> Result<GroundAction, FailureKind> {
    let schema = domain
        .action(step.action.as_str())
        .ok_or(FailureKind::UnknownAction)?;
    if schema.parameters.len() != step.args.len() {
        return Err(FailureKind::BadArity);
    }
    for (arg, param) in step.args.iter().zip(&schema.parameters) {
        let ty = problem
            .object(arg.as_str())
            .or_else(|| domain.constant(arg.as_str()))
            .map(|o| &o.ty)
            .ok_or(FailureKind::TypeError)?;
        if !domain.is_subtype(ty.as_str(), param.ty.as_str()) {
            return Err(FailureKind::TypeError);
        }
    }
    Ok(GroundAction::new(schema.clone(), step.args.clone()))
}

/// Simulates `plan` from the initial state; returns the report and the last state reached.
pub fn simulate(domain: &Domain, problem: &Problem, plan: &Plan) -> (ValidationReport, State) {
    let mut state = State::initial(problem);
    for (i, step) in plan.steps.iter().enumerate() {
        let action = match resolve_step(domain, problem, step) {
            Ok(a) => a,
            Err(kind) => return (ValidationReport::failed(kind, Some(i), None, i), state),
        };
        match apply(&state, &action) {
            Ok(next) => state = next,
            Err(e) => {
                let report = ValidationReport::failed(
                    FailureKind::PreconditionFailed,
                    Some(i),
                    Some(e.failed),
                    i,
                );
                return (report, state);
            }
        }
    }
    let n = plan.steps.len();
    let unmet = problem
        .goal
        .items
        .iter()
        .find(|item| !holds(&state, &crate::pddl::Condition::new(vec![(*item).clone()])).unwrap_or(false));
    let report = match unmet {
        None => ValidationReport::valid(n),
        Some(item) => ValidationReport::failed(FailureKind::GoalUnreached, None, Some(item.clone()), n),
    };
    (report, state)
}

/// Valid iff every step is applicable in sequence and the final state satisfies the goal.
pub fn validate(domain: &Domain, problem: &Problem, plan: &Plan) -> ValidationReport {
    simulate(domain, problem, plan).0
}

/// Fraction of valid reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityRate {
    pub valid: usize,
    pub total: usize,
}

impl ValidityRate {
    pub fn fraction(&self) -> f64 {
        self.valid as f64 / self.total as f64
    }

    /// Percentage rounded to one decimal, as reported in result tables.
    pub fn percent(&self) -> f64 {
        (self.valid as f64 * 1000.0 / self.total as f64).round() / 10.0
    }
}

impl fmt::Display for ValidityRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}%", self.percent())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("validity rate of an empty report list")]
pub struct EmptyReports;

pub fn validity_rate(reports: &[ValidationReport]) -> Result<ValidityRate, EmptyReports> {
    if reports.is_empty() {
        return Err(EmptyReports);
    }
    Ok(ValidityRate {
        valid: reports.iter().filter(|r| r.valid).count(),
        total: reports.len(),
    })
}

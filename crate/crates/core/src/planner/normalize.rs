//! Conversion of planner output to one `(action args)` per line.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::Dialect;
use crate::validate::parse_plan;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConversionError {
    #[error("planner output is empty")]
    Empty,
    #[error("planner output contains no plan steps")]
    NoSteps,
    #[error("line {line}: unrecognized planner output {text:?}")]
    Unrecognized { line: usize, text: String },
    #[error("invalid dialect pattern: {0}")]
    Pattern(String),
}

fn probe_step() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^(?:step\s+)?\d+(?:\.\d+)?\s*[:.)]\s*(.+)$").unwrap())
}

fn probe_noise() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?ix)^(?:
                ;.*
              | (?:plan|total|nodes?|expanded|generated|evaluated|search|time|cost|probes?
                  |landmarks?|memory|peak|solution|parsing|grounding|preprocessing|translating
                  |initial|heuristic|found|done|num|number|max|goal|actions|fluents|bfs|greedy
                  |best|solved|dead)\b.*
            )$",
        )
        .unwrap()
    })
}

fn words() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\(?\s*([A-Za-z][\w-]*(?:\s+[A-Za-z0-9][\w-]*)*)\s*\)?$").unwrap())
}

/// `(a b c)` from `(A  B C)`, `a b c` or `(a b c)`; None if not an action shape.
fn canonical_step(body: &str) -> Option<String> {
    let body = body.trim();
    let balanced = body.starts_with('(') == body.ends_with(')');
    let caps = words().captures(body).filter(|_| balanced)?;
    let inner: Vec<String> = caps[1].split_whitespace().map(str::to_ascii_lowercase).collect();
    Some(format!("({})\n", inner.join(" ")))
}

/// Converts raw planner output into a plan text `parse_plan` accepts.
///
/// `val_native` output is checked and returned unchanged. The other
/// dialects are rewritten to lowercase `(action args)` lines.
pub fn normalize_output(dialect: &Dialect, raw: &str) -> Result<String, ConversionError> {
    if raw.trim().is_empty() {
        return Err(ConversionError::Empty);
    }
    match dialect {
        Dialect::ValNative => {
            let plan = parse_plan(raw).map_err(|e| ConversionError::Unrecognized {
                line: e.line,
                text: raw.lines().nth(e.line - 1).unwrap_or("").to_string(),
            })?;
            if plan.is_empty() {
                return Err(ConversionError::NoSteps);
            }
            Ok(raw.to_string())
        }
        Dialect::Probe => convert(raw, |line| {
            if let Some(c) = probe_step().captures(line) {
                return canonical_step(&c[1]).map(Some);
            }
            if line.starts_with('(') {
                return canonical_step(line).map(Some);
            }
            probe_noise().is_match(line).then_some(None)
        }),
        Dialect::Custom { action, ignore } => {
            let action = Regex::new(action).map_err(|e| ConversionError::Pattern(e.to_string()))?;
            let ignore = ignore
                .as_deref()
                .map(Regex::new)
                .transpose()
                .map_err(|e| ConversionError::Pattern(e.to_string()))?;
            convert(raw, |line| {
                if ignore.as_ref().is_some_and(|r| r.is_match(line)) {
                    return Some(None);
                }
                let c = action.captures(line)?;
                let body = c.name("step").unwrap_or_else(|| c.get(0).unwrap());
                canonical_step(body.as_str()).map(Some)
            })
        }
    }
}

/// `classify` returns Some(Some(step)), Some(None) for noise, None for unrecognized.
fn convert(
    raw: &str,
    classify: impl Fn(&str) -> Option<Option<String>>,
) -> Result<String, ConversionError> {
    let mut out = String::new();
    for (i, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match classify(line) {
            Some(Some(step)) => out.push_str(&step),
            Some(None) => {}
            None => {
                return Err(ConversionError::Unrecognized {
                    line: i + 1,
                    text: line.to_string(),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(ConversionError::NoSteps);
    }
    Ok(out)
}

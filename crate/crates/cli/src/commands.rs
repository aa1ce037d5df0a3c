use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use pddlforge_core::dataset::{
    assemble, audit_leakage, read_split, records_from_session, revalidate, write_dataset, Manifest,
    SplitCounts, SplitSpec, SPLIT_FILES,
};
use pddlforge_core::dpgc::{parse_config, validate_against_domain, DpgcConfig, Severity};
use pddlforge_core::eval::{
    cases_from_split, export_report, read_inferences, render_text, run_inference, score, write_inferences,
    EndpointConfig, InferenceRun, INFERENCES_JSONL,
};
use pddlforge_core::generate::GenerationSession;
use pddlforge_core::layout::{SessionLayout, Stage};
use pddlforge_core::pddl::{parse_domain, parse_problem, Domain};
use pddlforge_core::planner::{plan_batch, AdapterRegistry, BatchOptions, BatchReport, PlanStatus, PlannerAdapter};
use pddlforge_core::validate::{parse_plan, validate as validate_plan};
use pddlforge_core::Symbol;

use crate::{AssembleArgs, EvalArgs, GenArgs, PlanArgs, UsageError, ValidateArgs, EXIT_FAILURE, EXIT_OK};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub(crate) fn load_domain(path: &Path) -> Result<Domain> {
    parse_domain(&read(path)?).with_context(|| format!("{}", path.display()))
}

/// Parses a generation config and checks it against `domain`; warnings go to stderr.
pub(crate) fn load_dpgc(path: &Path, domain: &Domain) -> Result<DpgcConfig> {
    let config = parse_config(&read(path)?).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let diags = validate_against_domain(&config, domain);
    for d in &diags {
        eprintln!("{}: {d}", path.display());
    }
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    if errors > 0 {
        bail!("{}: {errors} error(s) against domain {}", path.display(), domain.name);
    }
    Ok(config)
}

/// Brings the session in `dir` to `target` problems, creating it if needed.
///
/// Returns the number of problems emitted by this call. A session already
/// marked complete at the same target is left untouched.
pub(crate) fn ensure_generated(
    dir: &Path,
    domain: &Domain,
    config: &DpgcConfig,
    seed: u64,
    target: u64,
) -> Result<u64> {
    let layout = SessionLayout::new(dir);
    let mut session = if GenerationSession::exists(dir) {
        let manifest = GenerationSession::read_manifest(dir)?;
        if manifest.seed != seed {
            bail!(
                "session {} was created with seed {}, not {seed}",
                dir.display(),
                manifest.seed
            );
        }
        if manifest.target_count == target && layout.is_done(Stage::Generation) {
            return Ok(0);
        }
        let mut s = GenerationSession::open(dir)?;
        s.check_inputs(domain, config)?;
        if s.manifest().target_count != target {
            s.set_target(target)?;
        }
        s
    } else {
        GenerationSession::create(dir, domain.clone(), config.clone(), seed, target)?
    };
    let before = session.emitted();
    let step = (target / 10).max(1);
    let name = domain.name.to_string();
    session.run(|rec| {
        let n = rec.index + 1;
        if n % step == 0 || n == target {
            eprintln!("{name}: generated {n}/{target}");
        }
        ControlFlow::Continue(())
    })?;
    let emitted = session.emitted() - before;
    if emitted > 0 {
        layout.clear(Stage::Planning)?;
        layout.clear(Stage::Assembly)?;
    }
    Ok(emitted)
}

struct GenerationTotals {
    problems: usize,
    trivial: usize,
    redraws: u64,
}

fn generation_totals(dir: &Path) -> Result<GenerationTotals> {
    let path = SessionLayout::new(dir).log("generation.log");
    let mut t = GenerationTotals {
        problems: 0,
        trivial: 0,
        redraws: 0,
    };
    for line in read(&path)?.lines().skip(1) {
        let fields: Vec<&str> = line.split('\t').collect();
        if let [_, _, redraws, _, trivial] = fields.as_slice() {
            t.problems += 1;
            t.redraws += redraws.parse::<u64>().unwrap_or(0);
            t.trivial += usize::from(*trivial == "true");
        }
    }
    Ok(t)
}

pub(crate) fn gen_problems(a: &GenArgs) -> Result<i32> {
    if a.count == 0 {
        return Err(UsageError("--count must be at least 1".into()).into());
    }
    let domain = load_domain(&a.domain)?;
    let config = load_dpgc(&a.dpgc, &domain)?;
    let emitted = ensure_generated(&a.out, &domain, &config, a.seed, a.count)?;
    if emitted == 0 {
        println!("generation already complete in {}", a.out.display());
    }
    let session = GenerationSession::read_manifest(&a.out)?;
    let journal = read(&a.out.join("journal.fp"))?;
    let unique: HashSet<&str> = journal.lines().collect();
    let totals = generation_totals(&a.out)?;
    println!(
        "{} problems for {} in {}: {} unique fingerprints, {} trivial, {} duplicate draws discarded",
        totals.problems,
        session.domain_name,
        a.out.display(),
        unique.len(),
        totals.trivial,
        totals.redraws,
    );
    Ok(EXIT_OK)
}

pub(crate) fn load_adapter(registry: Option<&Path>, name: &str, timeout: Option<f64>) -> Result<PlannerAdapter> {
    let reg = match registry {
        Some(p) => AdapterRegistry::load(p)?,
        None => AdapterRegistry::default(),
    };
    let mut adapter = reg.get(name)?.clone();
    if let Some(t) = timeout {
        if t.is_nan() || t <= 0.0 {
            return Err(UsageError("--timeout must be positive".into()).into());
        }
        adapter.timeout = t;
    }
    Ok(adapter)
}

/// Plans every unplanned problem of a session and marks planning done.
pub(crate) fn plan_session(dir: &Path, adapter: &PlannerAdapter, workers: usize) -> Result<BatchReport> {
    let layout = SessionLayout::new(dir);
    if !layout.domain_file().is_file() || !layout.problems().is_dir() {
        bail!("{} is not a generation session", dir.display());
    }
    let opts = BatchOptions {
        timeout: Some(Duration::from_secs_f64(adapter.timeout)),
        workers,
    };
    let report = plan_batch(adapter, dir, &opts)?;
    layout.mark_done(
        Stage::Planning,
        &format!("{} planned, shortfall {}", report.entries.len() + report.skipped, report.shortfall),
    )?;
    Ok(report)
}

pub(crate) fn describe_batch(report: &BatchReport) -> String {
    let count = |s: PlanStatus| report.entries.iter().filter(|e| e.status == s).count();
    let mut out = format!(
        "planned {} problems ({} already logged): {} solved, {} timeout, {} no_solution, {} crashed; shortfall {}",
        report.entries.len(),
        report.skipped,
        count(PlanStatus::Solved),
        count(PlanStatus::Timeout),
        count(PlanStatus::NoSolution),
        count(PlanStatus::Crashed),
        report.shortfall,
    );
    if let Some(s) = report.wall_time_summary() {
        out.push_str(&format!(
            "\nwall time (s): avg {:.3} min {:.3} max {:.3} median {:.3} std {:.3}",
            s.avg, s.min, s.max, s.median, s.std
        ));
    }
    out
}

pub(crate) fn plan(a: &PlanArgs) -> Result<i32> {
    if a.workers == 0 {
        return Err(UsageError("--workers must be at least 1".into()).into());
    }
    let adapter = load_adapter(a.adapters.as_deref(), &a.adapter, a.timeout)?;
    let report = plan_session(&a.session, &adapter, a.workers)?;
    println!("{}", describe_batch(&report));
    Ok(EXIT_OK)
}

/// Domain names of the given sessions, sorted and deduplicated.
pub(crate) fn session_domains(sessions: &[PathBuf]) -> Result<Vec<Symbol>> {
    let mut names = BTreeSet::new();
    for s in sessions {
        let m = GenerationSession::read_manifest(s)?;
        names.insert(Symbol::new(&m.domain_name).map_err(|e| anyhow::anyhow!("{e}"))?);
    }
    Ok(names.into_iter().collect())
}

fn manifest_counts(m: &Manifest) -> SplitCounts {
    let n = |k: &str| m.splits.get(k).map_or(0, |s| s.count);
    SplitCounts {
        train: n("train"),
        val: n("val"),
        test: n("test"),
    }
}

/// Assembles, writes and audits a dataset; a matching dataset already in
/// `out` is kept as is.
pub(crate) fn assemble_sessions(
    sessions: &[PathBuf],
    spec: &SplitSpec,
    out: &Path,
    prefix: Option<&str>,
) -> Result<bool> {
    let manifest_path = out.join("manifest.json");
    if manifest_path.is_file() {
        let existing: Manifest = serde_json::from_str(&read(&manifest_path)?)
            .with_context(|| format!("{}", manifest_path.display()))?;
        if existing.seed == spec.seed && manifest_counts(&existing) == spec.totals() {
            return Ok(false);
        }
        bail!(
            "{} holds a dataset with different seed or quotas; remove it first",
            out.display()
        );
    }
    let mut records = Vec::new();
    for s in sessions {
        records.extend(records_from_session(s, prefix)?);
    }
    let assembly = assemble(records, spec)?;
    let sources: Vec<String> = sessions.iter().map(|s| s.display().to_string()).collect();
    write_dataset(out, &assembly, spec, &sources, prefix)?;
    Ok(true)
}

/// Leakage and plan re-validation checks read back from the split files.
pub(crate) fn audit_dataset(dir: &Path) -> Result<String> {
    let paths: Vec<(&str, PathBuf)> = SPLIT_FILES.iter().map(|(n, f)| (*n, dir.join(f))).collect();
    let refs: Vec<(&str, &Path)> = paths.iter().map(|(n, p)| (*n, p.as_path())).collect();
    let report = audit_leakage(&refs)?;
    let mut text = report.to_string();
    if !report.passed() {
        bail!("leakage audit failed:\n{text}");
    }
    for (name, path) in &paths {
        let failures = revalidate(&read_split(path)?);
        if let Some(f) = failures.first() {
            bail!("{name}: {} record(s) fail re-validation, first #{}: {}", failures.len(), f.index, f.message);
        }
    }
    text.push_str("\nall outputs re-validate");
    Ok(text)
}

pub(crate) fn assemble_cmd(a: &AssembleArgs) -> Result<i32> {
    let domains = session_domains(&a.sessions)?;
    let totals = SplitCounts {
        train: a.train,
        val: a.val,
        test: a.test,
    };
    let spec = SplitSpec::balanced(&domains, totals, a.seed);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| SessionLayout::new(&a.sessions[0]).dataset());
    let written = assemble_sessions(&a.sessions, &spec, &out, a.instruction_prefix.as_deref())?;
    if !written {
        println!("dataset already assembled in {}", out.display());
    }
    println!("{}", audit_dataset(&out)?);
    if a.out.is_none() {
        SessionLayout::new(&a.sessions[0]).mark_done(Stage::Assembly, &format!("{}", totals.total()))?;
    }
    Ok(EXIT_OK)
}

pub(crate) fn validate(a: &ValidateArgs) -> Result<i32> {
    let domain = load_domain(&a.domain)?;
    let problem = parse_problem(&read(&a.problem)?, &domain).with_context(|| format!("{}", a.problem.display()))?;
    let plan = parse_plan(&read(&a.plan)?).with_context(|| format!("{}", a.plan.display()))?;
    let report = validate_plan(&domain, &problem, &plan);
    println!("{report}");
    Ok(if report.valid { EXIT_OK } else { EXIT_FAILURE })
}

pub(crate) fn eval(a: &EvalArgs) -> Result<i32> {
    let mut endpoint = EndpointConfig::load(&a.endpoint)?;
    if let Some(w) = a.workers {
        if w == 0 {
            return Err(UsageError("--workers must be at least 1".into()).into());
        }
        endpoint.workers = w;
    }
    endpoint.retry |= a.retry;
    let split = if a.dataset.is_dir() {
        a.dataset.join("test.json")
    } else {
        a.dataset.clone()
    };
    let cases = cases_from_split(&read_split(&split)?);
    if cases.is_empty() {
        bail!("{} has no records", split.display());
    }
    let layout = SessionLayout::new(&a.out);
    let dump = a.out.join(INFERENCES_JSONL);
    let previous = match layout.read_marker(Stage::Eval) {
        Some(stamp) if !a.rerun && dump.is_file() => {
            let records = read_inferences(&dump)?;
            let same_ids = records.len() == cases.len() && records.iter().zip(&cases).all(|(r, c)| r.id == c.id);
            same_ids.then(|| InferenceRun {
                records,
                parallel: stamp.trim() == "parallel",
            })
        }
        _ => None,
    };
    let run = match previous {
        Some(run) => {
            eprintln!("reusing {} inferences from {}", run.records.len(), dump.display());
            run
        }
        None => {
            layout.clear(Stage::Eval)?;
            let run = run_inference(&endpoint, &cases)?;
            write_inferences(&run.records, &a.out)?;
            layout.mark_done(Stage::Eval, if run.parallel { "parallel" } else { "sequential" })?;
            run
        }
    };
    let metrics = score(&endpoint.name, &cases, &run);
    export_report(&metrics, &a.out)?;
    print!("{}", render_text(&metrics));
    Ok(EXIT_OK)
}

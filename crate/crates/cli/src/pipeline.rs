//! The whole data factory from one config document.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "out": "run",
//!   "domains": [{"domain": "artic3.pddl", "dpgc": "artic3.dpgc.json"}],
//!   "adapter": "bfs",
//!   "splits": {"train": 160, "val": 20, "test": 20}
//! }
//! ```
//!
//! Relative paths are resolved against the config file's directory. Each
//! domain gets a session directory `<out>/<domain name>/`; the dataset is
//! written to `<out>/dataset/`. Split totals are divided evenly between
//! domains. Problems that end up without a usable plan are replaced by
//! generating more, up to [`MAX_SHORTFALL_ITERATIONS`] rounds.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pddlforge_core::dataset::{records_from_session, SplitCounts, SplitSpec};
use pddlforge_core::dpgc::DpgcConfig;
use pddlforge_core::generate::GenerationSession;
use pddlforge_core::layout::{SessionLayout, Stage};
use pddlforge_core::pddl::Domain;
use pddlforge_core::{Fingerprint, Symbol};
use serde::Deserialize;

use crate::commands::{
    assemble_sessions, audit_dataset, describe_batch, ensure_generated, load_adapter, load_domain, load_dpgc,
    plan_session,
};
use crate::{PipelineArgs, UsageError, EXIT_OK};

pub const MAX_SHORTFALL_ITERATIONS: usize = 10;

fn default_adapter() -> String {
    "bfs".into()
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainEntry {
    pub domain: PathBuf,
    pub dpgc: PathBuf,
    /// Problems generated up front; defaults to the domain's share of the splits.
    #[serde(default)]
    pub count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub domains: Vec<DomainEntry>,
    #[serde(default = "default_adapter")]
    pub adapter: String,
    /// Adapter registry; falls back to the environment variable.
    #[serde(default)]
    pub adapters: Option<PathBuf>,
    /// Seconds per problem.
    #[serde(default)]
    pub timeout: Option<f64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub splits: SplitCounts,
    #[serde(default)]
    pub instruction_prefix: Option<String>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut c: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut c.domains {
            resolve(&mut d.domain);
            resolve(&mut d.dpgc);
        }
        if let Some(p) = &mut c.out {
            resolve(p);
        }
        if let Some(p) = &mut c.adapters {
            resolve(p);
        }
        Ok(c)
    }
}

/// Seed of one domain's generation session, derived from the run seed.
pub fn domain_seed(seed: u64, domain: &str) -> u64 {
    let fp = Fingerprint::of_parts(&[&seed.to_le_bytes(), domain.as_bytes()]);
    u64::from_le_bytes(fp.as_bytes()[..8].try_into().expect("8 bytes"))
}

struct Source {
    name: Symbol,
    domain: Domain,
    config: DpgcConfig,
    dir: PathBuf,
    seed: u64,
    initial: u64,
    quota: usize,
}

struct RunLog(std::fs::File);

impl RunLog {
    fn line(&mut self, text: &str) -> Result<()> {
        eprintln!("{text}");
        writeln!(self.0, "{text}")?;
        Ok(())
    }
}

pub fn run_pipeline(a: &PipelineArgs) -> Result<i32> {
    let config = PipelineConfig::load(&a.config)?;
    let seed = a
        .seed
        .or(config.seed)
        .ok_or_else(|| UsageError("no seed: pass --seed or set \"seed\" in the config".into()))?;
    let out = a
        .out
        .clone()
        .or(config.out.clone())
        .ok_or_else(|| UsageError("no output directory: pass --out or set \"out\" in the config".into()))?;
    if config.domains.is_empty() {
        return Err(UsageError("the config lists no domains".into()).into());
    }
    if config.workers == 0 {
        return Err(UsageError("workers must be at least 1".into()).into());
    }
    let adapters = config.adapters.clone().or_else(|| std::env::var_os(crate::ADAPTERS_ENV).map(PathBuf::from));
    let adapter = load_adapter(adapters.as_deref(), &config.adapter, config.timeout)?;

    let root = SessionLayout::new(&out);
    let stamp = format!(
        "seed {seed} splits {}/{}/{}",
        config.splits.train, config.splits.val, config.splits.test
    );
    if root.read_marker(Stage::Assembly).as_deref().map(str::trim) == Some(stamp.as_str()) {
        println!("pipeline already complete in {}", out.display());
        println!("{}", audit_dataset(&root.dataset())?);
        return Ok(EXIT_OK);
    }
    fs::create_dir_all(root.logs())?;
    let log_path = root.log("pipeline.log");
    let mut log = RunLog(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .with_context(|| format!("cannot open {}", log_path.display()))?,
    );

    let mut loaded = Vec::new();
    for entry in &config.domains {
        let domain = load_domain(&entry.domain)?;
        let dpgc = load_dpgc(&entry.dpgc, &domain)?;
        loaded.push((entry, domain, dpgc));
    }
    let names: Vec<Symbol> = loaded.iter().map(|(_, d, _)| d.name.clone()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != names.len() {
        return Err(UsageError("each domain may appear only once".into()).into());
    }
    let spec = SplitSpec::balanced(&sorted, config.splits, seed);
    let mut sources: Vec<Source> = loaded
        .into_iter()
        .map(|(entry, domain, dpgc)| {
            let name = domain.name.clone();
            let quota = spec.domains[&name].total();
            Source {
                dir: out.join(name.as_str()),
                seed: domain_seed(seed, name.as_str()),
                initial: entry.count.unwrap_or(quota as u64).max(1),
                quota,
                name,
                domain,
                config: dpgc,
            }
        })
        .collect();
    sources.sort_by(|a, b| a.name.cmp(&b.name));

    log.line(&format!("pipeline: {stamp}, adapter {}", adapter.name))?;
    let mut targets: BTreeMap<Symbol, u64> = BTreeMap::new();
    for s in &sources {
        let target = match GenerationSession::exists(&s.dir) {
            true => GenerationSession::read_manifest(&s.dir)?.target_count,
            false => s.initial,
        };
        targets.insert(s.name.clone(), target);
    }
    for s in &sources {
        let target = targets[&s.name];
        let n = ensure_generated(&s.dir, &s.domain, &s.config, s.seed, target)?;
        log.line(&format!("{}: generated {n} problems (target {target})", s.name))?;
        let report = plan_session(&s.dir, &adapter, config.workers)?;
        log.line(&format!("{}: {}", s.name, describe_batch(&report).replace('\n', "; ")))?;
    }

    let prefix = config.instruction_prefix.as_deref();
    for iteration in 0..=MAX_SHORTFALL_ITERATIONS {
        let mut short = Vec::new();
        for s in &sources {
            let usable = records_from_session(&s.dir, prefix)?.len();
            if usable < s.quota {
                short.push((s, s.quota - usable));
            }
        }
        if short.is_empty() {
            break;
        }
        let summary: Vec<String> = short.iter().map(|(s, d)| format!("{} short by {d}", s.name)).collect();
        if iteration == MAX_SHORTFALL_ITERATIONS {
            bail!(
                "quotas still unmet after {MAX_SHORTFALL_ITERATIONS} regeneration rounds: {}",
                summary.join(", ")
            );
        }
        log.line(&format!("shortfall round {}: {}", iteration + 1, summary.join(", ")))?;
        for (s, deficit) in short {
            let target = targets[&s.name] + deficit as u64;
            targets.insert(s.name.clone(), target);
            let n = ensure_generated(&s.dir, &s.domain, &s.config, s.seed, target)?;
            log.line(&format!("{}: generated {n} replacement problems (target {target})", s.name))?;
            let report = plan_session(&s.dir, &adapter, config.workers)?;
            log.line(&format!("{}: {}", s.name, describe_batch(&report).replace('\n', "; ")))?;
        }
    }

    let dirs: Vec<PathBuf> = sources.iter().map(|s| s.dir.clone()).collect();
    assemble_sessions(&dirs, &spec, &root.dataset(), prefix)?;
    let audit = audit_dataset(&root.dataset())?;
    log.line(&format!("dataset written to {}", root.dataset().display()))?;
    println!("{audit}");
    root.mark_done(Stage::Assembly, &stamp)?;
    Ok(EXIT_OK)
}

//! Journaled, resumable batch generation.
//!
//! Session directory:
//!
//! ```text
//! session.json        seed, target, input hashes
//! config.dpgc.json    canonical config snapshot
//! domain.pddl         canonical domain snapshot
//! problems/           <domain>_<index>.pddl
//! journal.fp          one fingerprint per emitted problem, in order
//! logs/generation.log index, fingerprint, redraws, ms, trivial
//! markers/            generation.done once the target is reached
//! ```
//!
//! Attempt `k` draws from substream `k` of the session seed, so the
//! emitted sequence depends only on (seed, config, domain). Resuming
//! replays the attempts from the start, checks them against the journal
//! and continues from the first attempt not yet accounted for.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{generate_problem, instantiate_objects, is_trivial, rng_for, GenerationError, ObjectTable};
use crate::dpgc::{parse_config, serialize_config, ConfigError, DpgcConfig};
use crate::fingerprint::{problem_fingerprint, Fingerprint};
use crate::layout::{SessionLayout, Stage};
use crate::pddl::{parse_domain, serialize_domain, serialize_problem, Domain, PddlError, Problem};
use crate::symbol::Symbol;

/// Consecutive duplicate draws after which generation gives up.
pub const MAX_CONSECUTIVE_DUPLICATES: u64 = 1000;

const MANIFEST: &str = "session.json";
const CONFIG: &str = "config.dpgc.json";
const DOMAIN: &str = "domain.pddl";
const JOURNAL: &str = "journal.fp";
const LOG: &str = "generation.log";
const LOG_HEADER: &str = "index\tfingerprint\tredraws\tms\ttrivial";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Domain { path: PathBuf, source: PddlError },
    #[error("{path}: malformed session manifest: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{path}:{line}: malformed journal entry {text:?}")]
    Journal { path: PathBuf, line: usize, text: String },
    #[error("session already exists at {0}")]
    AlreadyExists(PathBuf),
    #[error("session inputs do not match: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(
        "no new problem in {MAX_CONSECUTIVE_DUPLICATES} consecutive draws after {emitted} of {target} \
         ({attempts} attempts); the config probably admits fewer distinct problems than requested"
    )]
    NonConvergence { emitted: u64, target: u64, attempts: u64 },
    #[error("target {requested} is below the {emitted} problems already emitted")]
    TargetTooSmall { requested: u64, emitted: u64 },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SessionError + '_ {
    move |source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionManifest {
    pub seed: u64,
    pub target_count: u64,
    pub domain_name: String,
    pub config_hash: Fingerprint,
    pub domain_hash: Fingerprint,
}

/// One emitted problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionRecord {
    pub index: u64,
    pub fingerprint: Fingerprint,
    /// Duplicate draws discarded before this problem.
    pub redraws: u64,
    pub elapsed_ms: f64,
    /// Every goal conjunct already holds initially.
    pub trivial: bool,
    pub path: PathBuf,
}

impl EmissionRecord {
    fn log_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.3}\t{}",
            self.index, self.fingerprint, self.redraws, self.elapsed_ms, self.trivial
        )
    }
}

pub struct GenerationSession {
    dir: PathBuf,
    manifest: SessionManifest,
    domain: Domain,
    config: DpgcConfig,
    table: ObjectTable,
    journal: Vec<Fingerprint>,
    seen: HashSet<Fingerprint>,
    next_attempt: u64,
}

fn config_hash(c: &DpgcConfig) -> Fingerprint {
    Fingerprint::of(serialize_config(c).as_bytes())
}

fn domain_hash(d: &Domain) -> Fingerprint {
    Fingerprint::of(serialize_domain(d).as_bytes())
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), SessionError> {
    crate::io_util::write_atomic(path, contents).map_err(io_err(path))
}

impl GenerationSession {
    /// Starts a new session in `dir` (created if missing, must not hold a session).
    pub fn create(
        dir: impl Into<PathBuf>,
        domain: Domain,
        config: DpgcConfig,
        seed: u64,
        target_count: u64,
    ) -> Result<Self, SessionError> {
        let dir = dir.into();
        if dir.join(MANIFEST).exists() {
            return Err(SessionError::AlreadyExists(dir));
        }
        let table = instantiate_objects(&config)?;
        let layout = SessionLayout::new(&dir);
        for p in [layout.problems(), layout.markers(), layout.logs()] {
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        let manifest = SessionManifest {
            seed,
            target_count,
            domain_name: domain.name.to_string(),
            config_hash: config_hash(&config),
            domain_hash: domain_hash(&domain),
        };
        write_atomic(&dir.join(CONFIG), serialize_config(&config).as_bytes())?;
        write_atomic(&dir.join(DOMAIN), serialize_domain(&domain).as_bytes())?;
        let journal = dir.join(JOURNAL);
        File::create(&journal).map_err(io_err(&journal))?;
        let log = layout.log(LOG);
        fs::write(&log, format!("{LOG_HEADER}\n")).map_err(io_err(&log))?;
        let session = GenerationSession {
            dir,
            manifest,
            domain,
            config,
            table,
            journal: Vec::new(),
            seen: HashSet::new(),
            next_attempt: 0,
        };
        session.write_manifest()?;
        Ok(session)
    }

    pub fn exists(dir: &Path) -> bool {
        dir.join(MANIFEST).is_file()
    }

    /// The manifest alone, without replaying the journal.
    pub fn read_manifest(dir: &Path) -> Result<SessionManifest, SessionError> {
        let mpath = dir.join(MANIFEST);
        let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
        serde_json::from_str(&text).map_err(|e| SessionError::Manifest {
            path: mpath.clone(),
            message: e.to_string(),
        })
    }

    /// Reopens a session, verifying its snapshots and replaying its journal.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let dir = dir.into();
        let manifest = Self::read_manifest(&dir)?;

        let dpath = dir.join(DOMAIN);
        let dtext = fs::read_to_string(&dpath).map_err(io_err(&dpath))?;
        let domain = parse_domain(&dtext).map_err(|source| SessionError::Domain {
            path: dpath.clone(),
            source,
        })?;
        let cpath = dir.join(CONFIG);
        let ctext = fs::read_to_string(&cpath).map_err(io_err(&cpath))?;
        let config = parse_config(&ctext).map_err(|source| SessionError::Config {
            path: cpath.clone(),
            source,
        })?;
        if domain_hash(&domain) != manifest.domain_hash {
            return Err(SessionError::Mismatch(format!("{} was modified", dpath.display())));
        }
        if config_hash(&config) != manifest.config_hash {
            return Err(SessionError::Mismatch(format!("{} was modified", cpath.display())));
        }

        let journal = read_journal(&dir.join(JOURNAL))?;
        let table = instantiate_objects(&config)?;
        let mut session = GenerationSession {
            dir,
            manifest,
            domain,
            config,
            table,
            journal: Vec::new(),
            seen: HashSet::new(),
            next_attempt: 0,
        };
        session.replay(journal)?;
        Ok(session)
    }

    /// Fails unless `d` and `c` are the inputs this session was created with.
    pub fn check_inputs(&self, d: &Domain, c: &DpgcConfig) -> Result<(), SessionError> {
        if domain_hash(d) != self.manifest.domain_hash {
            return Err(SessionError::Mismatch("domain differs from the session snapshot".into()));
        }
        if config_hash(c) != self.manifest.config_hash {
            return Err(SessionError::Mismatch("config differs from the session snapshot".into()));
        }
        Ok(())
    }

    /// Re-derives the journaled prefix of the sequence and restores the
    /// files a crash may have left inconsistent.
    fn replay(&mut self, journal: Vec<Fingerprint>) -> Result<(), SessionError> {
        let mut log_lines = Vec::with_capacity(journal.len());
        let mut redraws = 0;
        while self.journal.len() < journal.len() {
            let attempt = self.next_attempt;
            let (problem, fp) = self.draw(attempt)?;
            self.next_attempt += 1;
            if self.seen.contains(&fp) {
                redraws += 1;
                continue;
            }
            let index = self.journal.len() as u64;
            if journal[index as usize] != fp {
                return Err(SessionError::Mismatch(format!(
                    "journal entry {index} is {}, but replay produced {fp}",
                    journal[index as usize]
                )));
            }
            let path = self.problem_path(index);
            if !path.exists() {
                write_atomic(&path, serialize_problem(&problem).as_bytes())?;
            }
            log_lines.push(EmissionRecord {
                index,
                fingerprint: fp,
                redraws,
                elapsed_ms: 0.0,
                trivial: is_trivial(&problem),
                path,
            });
            redraws = 0;
            self.seen.insert(fp);
            self.journal.push(fp);
        }
        // The log is written after the journal, so it may be one entry
        // short (or, after manual edits, anything else). Keep the timings
        // already recorded and refill the rest from the replay.
        let lpath = self.layout().log(LOG);
        let existing = fs::read_to_string(&lpath).unwrap_or_default();
        let mut out = format!("{LOG_HEADER}\n");
        let kept: Vec<&str> = existing
            .lines()
            .skip(1)
            .take(self.journal.len())
            .take_while(|l| l.ends_with("true") || l.ends_with("false"))
            .collect();
        for l in &kept {
            out.push_str(l);
            out.push('\n');
        }
        for rec in &log_lines[kept.len()..] {
            out.push_str(&rec.log_line());
            out.push('\n');
        }
        if out != existing {
            write_atomic(&lpath, out.as_bytes())?;
        }
        Ok(())
    }

    fn draw(&self, attempt: u64) -> Result<(Problem, Fingerprint), SessionError> {
        let mut rng = rng_for(self.manifest.seed, attempt);
        let name = Symbol::new(&format!("{}_{:05}", self.manifest.domain_name, self.journal.len()))
            .expect("domain names are symbols");
        let p = generate_problem(&self.domain, &self.config, &self.table, name, &mut rng)?;
        let fp = problem_fingerprint(&p);
        Ok((p, fp))
    }

    pub fn problem_path(&self, index: u64) -> PathBuf {
        self.layout()
            .problem_file(&format!("{}_{index:05}", self.manifest.domain_name))
    }

    pub fn layout(&self) -> SessionLayout {
        SessionLayout::new(&self.dir)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &SessionManifest {
        &self.manifest
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn config(&self) -> &DpgcConfig {
        &self.config
    }

    pub fn emitted(&self) -> u64 {
        self.journal.len() as u64
    }

    pub fn journal(&self) -> &[Fingerprint] {
        &self.journal
    }

    pub fn is_complete(&self) -> bool {
        self.emitted() >= self.manifest.target_count
    }

    /// Raises (or lowers, down to the emitted count) the target.
    pub fn set_target(&mut self, target: u64) -> Result<(), SessionError> {
        if target < self.emitted() {
            return Err(SessionError::TargetTooSmall {
                requested: target,
                emitted: self.emitted(),
            });
        }
        self.manifest.target_count = target;
        self.write_manifest()?;
        if !self.is_complete() {
            let marker = self.layout().marker(Stage::Generation);
            if marker.exists() {
                fs::remove_file(&marker).map_err(io_err(&marker))?;
            }
        }
        Ok(())
    }

    fn write_manifest(&self) -> Result<(), SessionError> {
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST), text.as_bytes())
    }

    /// Generates until the target is reached or `on_emit` breaks.
    ///
    /// Each problem file is written atomically before its fingerprint is
    /// appended to the journal, so an interruption at any point leaves a
    /// resumable session.
    pub fn run(
        &mut self,
        mut on_emit: impl FnMut(&EmissionRecord) -> ControlFlow<()>,
    ) -> Result<(), SessionError> {
        let jpath = self.dir.join(JOURNAL);
        let mut journal = OpenOptions::new()
            .append(true)
            .open(&jpath)
            .map_err(io_err(&jpath))?;
        let lpath = self.layout().log(LOG);
        let mut log = OpenOptions::new()
            .append(true)
            .open(&lpath)
            .map_err(io_err(&lpath))?;

        while !self.is_complete() {
            let started = Instant::now();
            let mut redraws = 0;
            let (problem, fp) = loop {
                let attempt = self.next_attempt;
                let drawn = self.draw(attempt)?;
                self.next_attempt += 1;
                if !self.seen.contains(&drawn.1) {
                    break drawn;
                }
                redraws += 1;
                if redraws >= MAX_CONSECUTIVE_DUPLICATES {
                    return Err(SessionError::NonConvergence {
                        emitted: self.emitted(),
                        target: self.manifest.target_count,
                        attempts: self.next_attempt,
                    });
                }
            };
            let index = self.emitted();
            let path = self.problem_path(index);
            write_atomic(&path, serialize_problem(&problem).as_bytes())?;
            journal
                .write_all(format!("{fp}\n").as_bytes())
                .and_then(|()| journal.flush())
                .map_err(io_err(&jpath))?;
            self.seen.insert(fp);
            self.journal.push(fp);

            let record = EmissionRecord {
                index,
                fingerprint: fp,
                redraws,
                elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
                trivial: is_trivial(&problem),
                path,
            };
            log.write_all(format!("{}\n", record.log_line()).as_bytes())
                .map_err(io_err(&lpath))?;
            if on_emit(&record).is_break() {
                return Ok(());
            }
        }
        let marker = self.layout().marker(Stage::Generation);
        fs::write(&marker, format!("{}\n", self.emitted())).map_err(io_err(&marker))?;
        Ok(())
    }
}

/// Reads a journal, dropping a torn final line left by an interrupted write.
fn read_journal(path: &Path) -> Result<Vec<Fingerprint>, SessionError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    if complete.len() != text.len() {
        fs::write(path, complete).map_err(io_err(path))?;
    }
    complete
        .lines()
        .enumerate()
        .map(|(i, line)| {
            line.parse().map_err(|_| SessionError::Journal {
                path: path.to_path_buf(),
                line: i + 1,
                text: line.to_string(),
            })
        })
        .collect()
}

//! Fixed layout of a session directory shared by all stages.
//!
//! ```text
//! <root>/
//!   session.json  config.dpgc.json  domain.pddl  journal.fp
//!   problems/     generated problems
//!   plans/        one .plan per solved problem
//!   dataset/      assembled splits
//!   logs/         generation.log, planning.log, planning.diag
//!   markers/      <stage>.done
//! ```

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::io_util::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Generation,
    Planning,
    Assembly,
    Eval,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Generation => "generation",
            Stage::Planning => "planning",
            Stage::Assembly => "assembly",
            Stage::Eval => "eval",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionLayout {
    root: PathBuf,
}

impl SessionLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        SessionLayout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn domain_file(&self) -> PathBuf {
        self.root.join("domain.pddl")
    }

    pub fn problems(&self) -> PathBuf {
        self.root.join("problems")
    }

    pub fn plans(&self) -> PathBuf {
        self.root.join("plans")
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn logs(&self) -> PathBuf {
        self.root.join("logs")
    }

    pub fn log(&self, name: &str) -> PathBuf {
        self.logs().join(name)
    }

    pub fn markers(&self) -> PathBuf {
        self.root.join("markers")
    }

    pub fn problem_file(&self, id: &str) -> PathBuf {
        self.problems().join(format!("{id}.pddl"))
    }

    pub fn plan_file(&self, id: &str) -> PathBuf {
        self.plans().join(format!("{id}.plan"))
    }

    pub fn marker(&self, stage: Stage) -> PathBuf {
        self.markers().join(format!("{stage}.done"))
    }

    pub fn is_done(&self, stage: Stage) -> bool {
        self.marker(stage).is_file()
    }

    /// Contents of a stage marker, if present.
    pub fn read_marker(&self, stage: Stage) -> Option<String> {
        fs::read_to_string(self.marker(stage)).ok()
    }

    /// Records `stage` as complete; `stamp` describes what was produced.
    pub fn mark_done(&self, stage: Stage, stamp: &str) -> io::Result<()> {
        fs::create_dir_all(self.markers())?;
        write_atomic(&self.marker(stage), format!("{stamp}\n").as_bytes())
    }

    pub fn clear(&self, stage: Stage) -> io::Result<()> {
        match fs::remove_file(self.marker(stage)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }
}

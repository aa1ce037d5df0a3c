//! Data factory and evaluation harness for neurosymbolic task planning.
//!
//! The pipeline parses PDDL domains, synthesizes random problems from
//! declarative generation configs, solves them with pluggable planners,
//! validates plans by exact forward simulation, assembles Alpaca-format
//! datasets and scores model-generated plans.

pub mod assets;
pub mod dataset;
pub mod dpgc;
pub mod eval;
pub mod fingerprint;
pub mod generate;
mod io_util;
pub mod layout;
pub mod pddl;
pub mod planner;
pub mod stats;
pub mod symbol;
pub mod validate;

pub use pddl::{
    apply, ground_actions, holds, parse_domain, parse_problem, serialize_domain,
    serialize_problem, Domain, GroundAction, GroundAtom, PddlError, Problem, State,
};
pub use dataset::{assemble, AlpacaRecord, DatasetRecord, SplitCounts, SplitSpec};
pub use dpgc::{parse_config, DpgcConfig};
pub use eval::{run_inference, score, EndpointConfig, EvalMetrics, InferenceRecord};
pub use fingerprint::Fingerprint;
pub use generate::GenerationSession;
pub use layout::{SessionLayout, Stage};
pub use planner::{plan_batch, solve, AdapterRegistry, PlanResult, PlanStatus, PlannerAdapter};
pub use symbol::Symbol;
pub use validate::{parse_plan, validate, Plan, ValidationReport};

//! Domain-Problem Generation Configuration documents.
//!
//! A document declares object pools, a constant initial-state section
//! copied verbatim into every problem, and variable initial/goal sections
//! made of predicate pools that are sampled per problem.
//!
//! ```json
//! {
//!   "domain": "artic3",
//!   "object_pools": [
//!     {"id": "link-pool", "type": "link", "quantity": 3,
//!      "naming": {"prefix": "link"}, "usage": "random"}
//!   ],
//!   "constant_init": ["(connects joint1 link1 link2)"],
//!   "variable_init": [
//!     {"id": "grasped", "predicates": [
//!       {"predicate": "in-hand", "arguments": ["link-pool$0"]},
//!       {"predicate": "in-hand", "arguments": ["link-pool$0+1"]}]}
//!   ],
//!   "variable_goal": [],
//!   "mutex_groups": []
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::sexpr::{read_all, Sexpr};
use crate::pddl::{Domain, GroundAtom};
use crate::symbol::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageMode {
    /// Uniform draw with replacement.
    Random,
    /// Each object drawn at most once per section.
    Mutex,
    /// Objects handed out in canonical order.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamingConvention {
    pub prefix: String,
    #[serde(default = "one")]
    pub start: u64,
    #[serde(default = "one")]
    pub step: u64,
}

fn one() -> u64 {
    1
}

fn yes() -> bool {
    true
}

fn default_probability() -> f64 {
    1.0
}

fn default_count() -> u32 {
    1
}

impl NamingConvention {
    /// Name of the `index`-th (0-based) object: prefix followed by `start + index * step`.
    pub fn name(&self, index: u32) -> String {
        format!("{}{}", self.prefix, self.start + u64::from(index) * self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectPool {
    pub id: Symbol,
    pub object_type: Symbol,
    pub quantity: u32,
    pub naming: NamingConvention,
    pub usage: UsageMode,
    /// When false the objects are domain constants and are not listed in `:objects`.
    pub declare: bool,
}

impl ObjectPool {
    /// Object names in canonical (index) order.
    pub fn object_names(&self) -> Vec<Symbol> {
        (0..self.quantity)
            .map(|i| Symbol::new(&self.naming.name(i)).expect("prefix validated at parse time"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tag {
    pub label: Symbol,
    pub offset: u32,
}

/// `pool`, `pool$label` or `pool$label+k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PoolSelector {
    pub pool_id: Symbol,
    pub tag: Option<Tag>,
}

impl fmt::Display for PoolSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pool_id)?;
        match &self.tag {
            None => Ok(()),
            Some(Tag { label, offset: 0 }) => write!(f, "${label}"),
            Some(Tag { label, offset }) => write!(f, "${label}+{offset}"),
        }
    }
}

impl PoolSelector {
    pub fn parse(text: &str) -> Result<Self, String> {
        let (pool, tag) = match text.split_once('$') {
            None => (text, None),
            Some((pool, rest)) => {
                let (label, offset) = match rest.split_once('+') {
                    None => (rest, 0),
                    Some((label, k)) => {
                        let k: u32 = k
                            .parse()
                            .map_err(|_| format!("tag offset {k:?} is not a non-negative integer"))?;
                        if k == 0 {
                            return Err("tag offset must be at least 1".into());
                        }
                        (label, k)
                    }
                };
                let label = Symbol::new(label).map_err(|e| format!("tag label: {e}"))?;
                (pool, Some(Tag { label, offset }))
            }
        };
        let pool_id = Symbol::new(pool).map_err(|e| format!("pool id: {e}"))?;
        Ok(PoolSelector { pool_id, tag })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateSpec {
    pub predicate: Symbol,
    pub probability: f64,
    pub count: u32,
    pub arguments: Vec<PoolSelector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredicatePool {
    pub id: Symbol,
    pub predicates: Vec<PredicateSpec>,
}

/// Exactly one member predicate pool is sampled per problem, chosen by weight.
#[derive(Debug, Clone, PartialEq)]
pub struct MutexGroup {
    pub members: Vec<Symbol>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpgcConfig {
    pub domain_name: Symbol,
    pub object_pools: Vec<ObjectPool>,
    pub constant_init: Vec<GroundAtom>,
    pub variable_init: Vec<PredicatePool>,
    pub variable_goal: Vec<PredicatePool>,
    pub mutex_groups: Vec<MutexGroup>,
}

impl DpgcConfig {
    pub fn pool(&self, id: &Symbol) -> Option<&ObjectPool> {
        self.object_pools.iter().find(|p| &p.id == id)
    }

    /// The mutex group containing predicate pool `id`, with its index.
    pub fn group_of(&self, id: &Symbol) -> Option<(usize, &MutexGroup)> {
        self.mutex_groups
            .iter()
            .enumerate()
            .find(|(_, g)| g.members.contains(id))
    }
}

// On-disk layout. Kept separate from the typed model so defaults are
// materialized and selectors/atoms are parsed exactly once.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    domain: String,
    object_pools: Vec<PoolDoc>,
    #[serde(default)]
    constant_init: Vec<String>,
    #[serde(default)]
    variable_init: Vec<PredicatePoolDoc>,
    #[serde(default)]
    variable_goal: Vec<PredicatePoolDoc>,
    #[serde(default)]
    mutex_groups: Vec<MutexGroupDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolDoc {
    id: String,
    #[serde(rename = "type")]
    object_type: String,
    quantity: u32,
    naming: NamingConvention,
    #[serde(default = "random_usage")]
    usage: UsageMode,
    #[serde(default = "yes")]
    declare: bool,
}

fn random_usage() -> UsageMode {
    UsageMode::Random
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredicatePoolDoc {
    id: String,
    predicates: Vec<SpecDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    predicate: String,
    #[serde(default = "default_probability")]
    probability: f64,
    #[serde(default = "default_count")]
    count: u32,
    #[serde(default)]
    arguments: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MutexGroupDoc {
    members: Vec<String>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Schema(String),
    DuplicatePoolId(String),
    ProbabilityOutOfRange(String),
    DanglingTag(String),
    UnknownReference(String),
    Invalid(String),
}

/// A config error located by a JSON path such as `$.variable_init[0].predicates[1]`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: error: {}", self.message())]
pub struct ConfigError {
    pub path: String,
    pub kind: ConfigErrorKind,
}

impl ConfigError {
    fn new(path: impl Into<String>, kind: ConfigErrorKind) -> Self {
        ConfigError {
            path: path.into(),
            kind,
        }
    }

    pub fn message(&self) -> String {
        match &self.kind {
            ConfigErrorKind::Schema(m) => format!("schema violation: {m}"),
            ConfigErrorKind::DuplicatePoolId(id) => format!("duplicate pool id {id}"),
            ConfigErrorKind::ProbabilityOutOfRange(p) => format!("probability {p} outside [0, 1]"),
            ConfigErrorKind::DanglingTag(s) => {
                format!("tagged selector {s} has no earlier binding of its label in this predicate pool")
            }
            ConfigErrorKind::UnknownReference(m) | ConfigErrorKind::Invalid(m) => m.clone(),
        }
    }
}

fn symbol(path: &str, text: &str) -> Result<Symbol, ConfigError> {
    Symbol::new(text).map_err(|e| ConfigError::new(path, ConfigErrorKind::Invalid(e.to_string())))
}

fn parse_ground_atom(path: &str, text: &str) -> Result<GroundAtom, ConfigError> {
    let invalid = |m: String| ConfigError::new(path, ConfigErrorKind::Invalid(m));
    let exprs = read_all(text).map_err(|e| invalid(e.to_string()))?;
    let [Sexpr::List(items, _)] = exprs.as_slice() else {
        return Err(invalid(format!("expected one ground atom, found {text:?}")));
    };
    let mut names = Vec::with_capacity(items.len());
    for item in items {
        let word = item
            .as_atom()
            .ok_or_else(|| invalid(format!("nested list in atom {text:?}")))?;
        names.push(symbol(path, word)?);
    }
    if names.is_empty() {
        return Err(invalid("empty atom".into()));
    }
    let predicate = names.remove(0);
    Ok(GroundAtom::new(predicate, names))
}

fn convert_section(
    section: &str,
    docs: Vec<PredicatePoolDoc>,
    pools: &[ObjectPool],
) -> Result<Vec<PredicatePool>, ConfigError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, doc) in docs.into_iter().enumerate() {
        let base = format!("$.{section}[{i}]");
        let id = symbol(&format!("{base}.id"), &doc.id)?;
        if !ids.insert(id.clone()) {
            return Err(ConfigError::new(
                format!("{base}.id"),
                ConfigErrorKind::Invalid(format!("duplicate predicate pool id {id}")),
            ));
        }
        if doc.predicates.is_empty() {
            return Err(ConfigError::new(
                format!("{base}.predicates"),
                ConfigErrorKind::Invalid("predicate pool must not be empty".into()),
            ));
        }
        let mut bound: HashSet<(Symbol, Symbol)> = HashSet::new();
        let mut predicates = Vec::new();
        for (j, spec) in doc.predicates.into_iter().enumerate() {
            let sp = format!("{base}.predicates[{j}]");
            if !(0.0..=1.0).contains(&spec.probability) {
                return Err(ConfigError::new(
                    format!("{sp}.probability"),
                    ConfigErrorKind::ProbabilityOutOfRange(spec.probability.to_string()),
                ));
            }
            if spec.count == 0 {
                return Err(ConfigError::new(
                    format!("{sp}.count"),
                    ConfigErrorKind::Invalid("count must be at least 1".into()),
                ));
            }
            let mut arguments = Vec::new();
            for (k, text) in spec.arguments.iter().enumerate() {
                let ap = format!("{sp}.arguments[{k}]");
                let sel = PoolSelector::parse(text)
                    .map_err(|m| ConfigError::new(&ap, ConfigErrorKind::Invalid(m)))?;
                if !pools.iter().any(|p| p.id == sel.pool_id) {
                    return Err(ConfigError::new(
                        &ap,
                        ConfigErrorKind::UnknownReference(format!("unknown object pool {}", sel.pool_id)),
                    ));
                }
                if let Some(tag) = &sel.tag {
                    let key = (sel.pool_id.clone(), tag.label.clone());
                    if tag.offset == 0 {
                        bound.insert(key);
                    } else if !bound.contains(&key) {
                        return Err(ConfigError::new(&ap, ConfigErrorKind::DanglingTag(sel.to_string())));
                    }
                }
                arguments.push(sel);
            }
            predicates.push(PredicateSpec {
                predicate: symbol(&format!("{sp}.predicate"), &spec.predicate)?,
                probability: spec.probability,
                count: spec.count,
                arguments,
            });
        }
        out.push(PredicatePool { id, predicates });
    }
    Ok(out)
}

/// Parses a JSON document into a fully materialized config.
pub fn parse_config(text: &str) -> Result<DpgcConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ConfigDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "$".to_string() } else { format!("$.{path}") };
        ConfigError::new(path, ConfigErrorKind::Schema(e.inner().to_string()))
    })?;

    let domain_name = symbol("$.domain", &doc.domain)?;
    let mut object_pools: Vec<ObjectPool> = Vec::new();
    for (i, p) in doc.object_pools.into_iter().enumerate() {
        let base = format!("$.object_pools[{i}]");
        let id = symbol(&format!("{base}.id"), &p.id)?;
        if object_pools.iter().any(|o| o.id == id) {
            return Err(ConfigError::new(
                format!("{base}.id"),
                ConfigErrorKind::DuplicatePoolId(id.to_string()),
            ));
        }
        if p.quantity == 0 {
            return Err(ConfigError::new(
                format!("{base}.quantity"),
                ConfigErrorKind::Invalid("quantity must be at least 1".into()),
            ));
        }
        if p.naming.step == 0 {
            return Err(ConfigError::new(
                format!("{base}.naming.step"),
                ConfigErrorKind::Invalid("step must be at least 1".into()),
            ));
        }
        symbol(&format!("{base}.naming.prefix"), &p.naming.name(0))?;
        object_pools.push(ObjectPool {
            id,
            object_type: symbol(&format!("{base}.type"), &p.object_type)?,
            quantity: p.quantity,
            naming: NamingConvention {
                prefix: p.naming.prefix.to_ascii_lowercase(),
                ..p.naming
            },
            usage: p.usage,
            declare: p.declare,
        });
    }

    let constant_init = doc
        .constant_init
        .iter()
        .enumerate()
        .map(|(i, t)| parse_ground_atom(&format!("$.constant_init[{i}]"), t))
        .collect::<Result<_, _>>()?;
    let variable_init = convert_section("variable_init", doc.variable_init, &object_pools)?;
    let variable_goal = convert_section("variable_goal", doc.variable_goal, &object_pools)?;

    let mut grouped: HashSet<Symbol> = HashSet::new();
    let mut mutex_groups = Vec::new();
    for (i, g) in doc.mutex_groups.into_iter().enumerate() {
        let base = format!("$.mutex_groups[{i}]");
        if g.members.len() != g.weights.len() {
            return Err(ConfigError::new(
                format!("{base}.weights"),
                ConfigErrorKind::Invalid(format!(
                    "{} weights for {} members",
                    g.weights.len(),
                    g.members.len()
                )),
            ));
        }
        if g.members.is_empty() {
            return Err(ConfigError::new(
                format!("{base}.members"),
                ConfigErrorKind::Invalid("mutex group needs at least one member".into()),
            ));
        }
        let mut members = Vec::new();
        let mut sections = BTreeSet::new();
        for (j, m) in g.members.iter().enumerate() {
            let mp = format!("{base}.members[{j}]");
            let id = symbol(&mp, m)?;
            if members.contains(&id) {
                return Err(ConfigError::new(
                    mp,
                    ConfigErrorKind::Invalid(format!("duplicate member {id}")),
                ));
            }
            if !grouped.insert(id.clone()) {
                return Err(ConfigError::new(
                    mp,
                    ConfigErrorKind::Invalid(format!("{id} already belongs to another mutex group")),
                ));
            }
            if variable_init.iter().any(|p| p.id == id) {
                sections.insert("variable_init");
            } else if variable_goal.iter().any(|p| p.id == id) {
                sections.insert("variable_goal");
            } else {
                return Err(ConfigError::new(
                    mp,
                    ConfigErrorKind::UnknownReference(format!("unknown predicate pool {id}")),
                ));
            }
            members.push(id);
        }
        if sections.len() > 1 {
            return Err(ConfigError::new(
                format!("{base}.members"),
                ConfigErrorKind::Invalid("members must come from the same section".into()),
            ));
        }
        for (j, w) in g.weights.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                return Err(ConfigError::new(
                    format!("{base}.weights[{j}]"),
                    ConfigErrorKind::Invalid(format!("weight {w} must be positive")),
                ));
            }
        }
        mutex_groups.push(MutexGroup {
            members,
            weights: g.weights,
        });
    }

    Ok(DpgcConfig {
        domain_name,
        object_pools,
        constant_init,
        variable_init,
        variable_goal,
        mutex_groups,
    })
}

fn section_doc(pools: &[PredicatePool]) -> Vec<PredicatePoolDoc> {
    pools
        .iter()
        .map(|p| PredicatePoolDoc {
            id: p.id.to_string(),
            predicates: p
                .predicates
                .iter()
                .map(|s| SpecDoc {
                    predicate: s.predicate.to_string(),
                    probability: s.probability,
                    count: s.count,
                    arguments: s.arguments.iter().map(ToString::to_string).collect(),
                })
                .collect(),
        })
        .collect()
}

/// Pretty JSON with every default written out.
pub fn serialize_config(c: &DpgcConfig) -> String {
    let doc = ConfigDoc {
        domain: c.domain_name.to_string(),
        object_pools: c
            .object_pools
            .iter()
            .map(|p| PoolDoc {
                id: p.id.to_string(),
                object_type: p.object_type.to_string(),
                quantity: p.quantity,
                naming: p.naming.clone(),
                usage: p.usage,
                declare: p.declare,
            })
            .collect(),
        constant_init: c.constant_init.iter().map(ToString::to_string).collect(),
        variable_init: section_doc(&c.variable_init),
        variable_goal: section_doc(&c.variable_goal),
        mutex_groups: c
            .mutex_groups
            .iter()
            .map(|g| MutexGroupDoc {
                members: g.members.iter().map(ToString::to_string).collect(),
                weights: g.weights.clone(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("config serializes");
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.path, self.severity, self.message)
    }
}

struct Diagnostics(Vec<Diagnostic>);

impl Diagnostics {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            path: path.into(),
            severity: Severity::Error,
            message: message.into(),
        });
    }

    fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            path: path.into(),
            severity: Severity::Warning,
            message: message.into(),
        });
    }
}

/// Cross-checks a config against the domain it generates problems for.
///
/// Returns no error diagnostics iff every referenced predicate exists with
/// matching arity and every pool type is declared and fits the predicate
/// parameters it is used for.
pub fn validate_against_domain(c: &DpgcConfig, d: &Domain) -> Vec<Diagnostic> {
    let mut diags = Diagnostics(Vec::new());
    if c.domain_name != d.name {
        diags.error(
            "$.domain",
            format!("config is for domain {}, not {}", c.domain_name, d.name),
        );
    }

    let mut owner: BTreeMap<Symbol, usize> = BTreeMap::new();
    let mut object_types: BTreeMap<Symbol, Symbol> =
        d.constants.iter().map(|k| (k.name.clone(), k.ty.clone())).collect();
    for (i, pool) in c.object_pools.iter().enumerate() {
        let base = format!("$.object_pools[{i}]");
        if !d.has_type(pool.object_type.as_str()) {
            diags.error(format!("{base}.type"), format!("undeclared type {}", pool.object_type));
        }
        for name in pool.object_names() {
            if let Some(prev) = owner.insert(name.clone(), i) {
                diags.error(
                    format!("{base}.naming"),
                    format!("object {name} is also generated by $.object_pools[{prev}]"),
                );
            }
            match (pool.declare, d.constant(name.as_str())) {
                (true, Some(_)) => diags.error(
                    format!("{base}.naming"),
                    format!("object {name} clashes with a domain constant"),
                ),
                (false, None) => diags.error(
                    format!("{base}.declare"),
                    format!("undeclared pool object {name} is not a domain constant"),
                ),
                (false, Some(k)) if !d.is_subtype(k.ty.as_str(), pool.object_type.as_str()) => diags
                    .error(
                        format!("{base}.type"),
                        format!("constant {name} has type {}, not {}", k.ty, pool.object_type),
                    ),
                _ => {}
            }
            object_types.entry(name).or_insert_with(|| pool.object_type.clone());
        }
    }

    for (i, atom) in c.constant_init.iter().enumerate() {
        let path = format!("$.constant_init[{i}]");
        let Some(sig) = d.predicate(atom.predicate.as_str()) else {
            diags.error(path, format!("undeclared predicate {}", atom.predicate));
            continue;
        };
        if sig.arity() != atom.args.len() {
            diags.error(
                path,
                format!("{} expects {} arguments, found {}", sig.name, sig.arity(), atom.args.len()),
            );
            continue;
        }
        for (arg, param) in atom.args.iter().zip(&sig.parameters) {
            match object_types.get(arg) {
                None => diags.error(&path, format!("unknown object {arg}")),
                Some(ty) if !d.is_subtype(ty.as_str(), param.ty.as_str()) => diags.error(
                    &path,
                    format!("{arg} has type {ty}, expected {}", param.ty),
                ),
                _ => {}
            }
        }
    }

    for (section, pools) in [("variable_init", &c.variable_init), ("variable_goal", &c.variable_goal)] {
        for (i, pp) in pools.iter().enumerate() {
            for (j, spec) in pp.predicates.iter().enumerate() {
                let sp = format!("$.{section}[{i}].predicates[{j}]");
                let Some(sig) = d.predicate(spec.predicate.as_str()) else {
                    diags.error(format!("{sp}.predicate"), format!("undeclared predicate {}", spec.predicate));
                    continue;
                };
                if sig.arity() != spec.arguments.len() {
                    diags.error(
                        format!("{sp}.arguments"),
                        format!(
                            "{} expects {} arguments, found {}",
                            sig.name,
                            sig.arity(),
                            spec.arguments.len()
                        ),
                    );
                    continue;
                }
                for (k, (sel, param)) in spec.arguments.iter().zip(&sig.parameters).enumerate() {
                    let ap = format!("{sp}.arguments[{k}]");
                    let Some(pool) = c.pool(&sel.pool_id) else { continue };
                    if d.has_type(pool.object_type.as_str())
                        && !d.is_subtype(pool.object_type.as_str(), param.ty.as_str())
                    {
                        diags.error(
                            &ap,
                            format!(
                                "pool {} has type {}, but {} expects {}",
                                pool.id, pool.object_type, sig.name, param.ty
                            ),
                        );
                    }
                    if let Some(tag) = &sel.tag {
                        if tag.offset >= pool.quantity {
                            diags.error(
                                &ap,
                                format!(
                                    "tag offset {} exceeds pool {} of {} objects",
                                    tag.offset, pool.id, pool.quantity
                                ),
                            );
                        } else if tag.offset > 0 && pool.usage == UsageMode::Sequential {
                            diags.warning(
                                &ap,
                                "base index of a sequential pool is not statically known; offset is checked at sampling time",
                            );
                        }
                    }
                }
            }
        }
    }
    diags.0
}

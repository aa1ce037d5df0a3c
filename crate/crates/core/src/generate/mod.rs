//! Random problem synthesis from generation configs.
//!
//! Sampling state (mutex bookkeeping, sequential cursors) is scoped to one
//! section of one problem: the initial-state section and the goal section
//! each start with every pool fresh. Tag bindings are scoped to one
//! predicate pool.

mod session;

pub use session::{
    EmissionRecord, GenerationSession, SessionError, SessionManifest, MAX_CONSECUTIVE_DUPLICATES,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dpgc::{DpgcConfig, ObjectPool, PoolSelector, PredicatePool, UsageMode};
use crate::pddl::{CondItem, Condition, Domain, GroundAtom, Literal, Problem, TypedParameter};
use crate::symbol::Symbol;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerationError {
    #[error("object {name} is generated by both pool {first} and pool {second}")]
    NameCollision {
        name: String,
        first: String,
        second: String,
    },
    #[error("mutex pool {pool} exhausted while sampling {predicate}")]
    MutexExhausted { pool: String, predicate: String },
    #[error("sequential pool {pool} exhausted while sampling {predicate}")]
    SequentialExhausted { pool: String, predicate: String },
    #[error("tag {selector} resolves outside pool {pool} of {quantity} objects")]
    TagOffsetOutOfBounds {
        selector: String,
        pool: String,
        quantity: u32,
    },
    #[error("selector references unknown pool {0}")]
    UnknownPool(String),
}

/// The seeded generator used everywhere randomness is needed.
///
/// ChaCha with 8 rounds: a documented, portable algorithm, so a seed gives
/// the same sequence on every platform and library version.
pub type SeededRng = ChaCha8Rng;

/// Independent deterministic substream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Objects of every pool, in canonical per-pool order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectTable {
    pools: HashMap<Symbol, Vec<Symbol>>,
    /// Objects that go into the problem's `:objects` section, sorted by name.
    pub declared: Vec<TypedParameter>,
}

impl ObjectTable {
    pub fn objects(&self, pool: &Symbol) -> Option<&[Symbol]> {
        self.pools.get(pool).map(Vec::as_slice)
    }
}

/// Names every pool's objects by its naming convention.
///
/// Pool objects are a pure function of the pool specification, so no
/// randomness is consumed here.
pub fn instantiate_objects(c: &DpgcConfig) -> Result<ObjectTable, GenerationError> {
    let mut owner: BTreeMap<Symbol, &Symbol> = BTreeMap::new();
    let mut pools = HashMap::new();
    let mut declared = Vec::new();
    for pool in &c.object_pools {
        let names = pool.object_names();
        for name in &names {
            if let Some(first) = owner.insert(name.clone(), &pool.id) {
                return Err(GenerationError::NameCollision {
                    name: name.to_string(),
                    first: first.to_string(),
                    second: pool.id.to_string(),
                });
            }
            if pool.declare {
                declared.push(TypedParameter::new(name.clone(), pool.object_type.clone()));
            }
        }
        pools.insert(pool.id.clone(), names);
    }
    declared.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(ObjectTable { pools, declared })
}

#[derive(Default)]
struct PoolState {
    used: BTreeSet<usize>,
    cursor: usize,
}

struct SectionSampler<'a> {
    config: &'a DpgcConfig,
    table: &'a ObjectTable,
    pools: HashMap<Symbol, PoolState>,
}

impl<'a> SectionSampler<'a> {
    fn new(config: &'a DpgcConfig, table: &'a ObjectTable) -> Self {
        SectionSampler {
            config,
            table,
            pools: HashMap::new(),
        }
    }

    /// Draws one object index from `pool` restricted to `0..=max_index`.
    fn draw(
        &mut self,
        pool: &ObjectPool,
        max_index: usize,
        predicate: &Symbol,
        rng: &mut SeededRng,
    ) -> Result<usize, GenerationError> {
        let state = self.pools.entry(pool.id.clone()).or_default();
        match pool.usage {
            UsageMode::Random => Ok(rng.gen_range(0..=max_index)),
            UsageMode::Mutex => {
                let free: Vec<usize> = (0..=max_index).filter(|i| !state.used.contains(i)).collect();
                if free.is_empty() {
                    return Err(GenerationError::MutexExhausted {
                        pool: pool.id.to_string(),
                        predicate: predicate.to_string(),
                    });
                }
                let i = free[rng.gen_range(0..free.len())];
                state.used.insert(i);
                Ok(i)
            }
            UsageMode::Sequential => {
                let i = state.cursor;
                if i >= pool.quantity as usize {
                    return Err(GenerationError::SequentialExhausted {
                        pool: pool.id.to_string(),
                        predicate: predicate.to_string(),
                    });
                }
                state.cursor += 1;
                Ok(i)
            }
        }
    }

    fn sample_pool(
        &mut self,
        pp: &PredicatePool,
        rng: &mut SeededRng,
        out: &mut Vec<GroundAtom>,
    ) -> Result<(), GenerationError> {
        // Largest offset used with each (pool, label) in this predicate pool;
        // the base draw must leave room for it.
        let mut max_offset: HashMap<(&Symbol, &Symbol), u32> = HashMap::new();
        for spec in &pp.predicates {
            for sel in &spec.arguments {
                if let Some(tag) = &sel.tag {
                    let e = max_offset.entry((&sel.pool_id, &tag.label)).or_default();
                    *e = (*e).max(tag.offset);
                }
            }
        }
        let mut bindings: HashMap<(Symbol, Symbol), usize> = HashMap::new();

        for spec in &pp.predicates {
            // One Bernoulli trial per spec; `count` atoms on success.
            if !rng.gen_bool(spec.probability) {
                continue;
            }
            for _ in 0..spec.count {
                let mut args = Vec::with_capacity(spec.arguments.len());
                for sel in &spec.arguments {
                    let index = self.resolve(sel, &max_offset, &mut bindings, &spec.predicate, rng)?;
                    let objects = self
                        .table
                        .objects(&sel.pool_id)
                        .ok_or_else(|| GenerationError::UnknownPool(sel.pool_id.to_string()))?;
                    args.push(objects[index].clone());
                }
                out.push(GroundAtom::new(spec.predicate.clone(), args));
            }
        }
        Ok(())
    }

    fn resolve(
        &mut self,
        sel: &PoolSelector,
        max_offset: &HashMap<(&Symbol, &Symbol), u32>,
        bindings: &mut HashMap<(Symbol, Symbol), usize>,
        predicate: &Symbol,
        rng: &mut SeededRng,
    ) -> Result<usize, GenerationError> {
        let pool = self
            .config
            .pool(&sel.pool_id)
            .ok_or_else(|| GenerationError::UnknownPool(sel.pool_id.to_string()))?;
        let last = pool.quantity as usize - 1;
        let Some(tag) = &sel.tag else {
            return self.draw(pool, last, predicate, rng);
        };
        let key = (sel.pool_id.clone(), tag.label.clone());
        let base = match bindings.get(&key) {
            Some(&b) => b,
            None => {
                let reach = max_offset[&(&sel.pool_id, &tag.label)] as usize;
                let out_of_bounds = || GenerationError::TagOffsetOutOfBounds {
                    selector: sel.to_string(),
                    pool: pool.id.to_string(),
                    quantity: pool.quantity,
                };
                if reach > last {
                    return Err(out_of_bounds());
                }
                let b = self.draw(pool, last - reach, predicate, rng)?;
                bindings.insert(key, b);
                b
            }
        };
        let index = base + tag.offset as usize;
        if index > last {
            return Err(GenerationError::TagOffsetOutOfBounds {
                selector: sel.to_string(),
                pool: pool.id.to_string(),
                quantity: pool.quantity,
            });
        }
        if pool.usage == UsageMode::Mutex && tag.offset > 0 {
            // The offset object is now taken too.
            self.pools.entry(pool.id.clone()).or_default().used.insert(index);
        }
        Ok(index)
    }
}

/// Members of mutex groups that were not chosen for this problem.
fn excluded_members(c: &DpgcConfig, rng: &mut SeededRng) -> BTreeSet<Symbol> {
    let mut excluded = BTreeSet::new();
    for g in &c.mutex_groups {
        let dist = WeightedIndex::new(&g.weights).expect("weights validated at parse time");
        let chosen = dist.sample(rng);
        excluded.extend(
            g.members
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != chosen)
                .map(|(_, m)| m.clone()),
        );
    }
    excluded
}

/// Samples one section, in pool order, skipping `excluded` predicate pools.
pub fn sample_section(
    c: &DpgcConfig,
    pools: &[PredicatePool],
    table: &ObjectTable,
    excluded: &BTreeSet<Symbol>,
    rng: &mut SeededRng,
) -> Result<Vec<GroundAtom>, GenerationError> {
    let mut sampler = SectionSampler::new(c, table);
    let mut out = Vec::new();
    for pp in pools.iter().filter(|pp| !excluded.contains(&pp.id)) {
        sampler.sample_pool(pp, rng, &mut out)?;
    }
    Ok(out)
}

/// One random problem.
///
/// Mutex-group choices are drawn first, then the initial-state section,
/// then the goal section. Goal atoms keep their sampling order with
/// repeats dropped.
pub fn generate_problem(
    d: &Domain,
    c: &DpgcConfig,
    table: &ObjectTable,
    name: Symbol,
    rng: &mut SeededRng,
) -> Result<Problem, GenerationError> {
    let excluded = excluded_members(c, rng);
    let sampled_init = sample_section(c, &c.variable_init, table, &excluded, rng)?;
    let sampled_goal = sample_section(c, &c.variable_goal, table, &excluded, rng)?;

    let init: BTreeSet<GroundAtom> = c.constant_init.iter().cloned().chain(sampled_init).collect();
    let mut seen = BTreeSet::new();
    let goal = sampled_goal
        .into_iter()
        .filter(|a| seen.insert(a.clone()))
        .map(|a| CondItem::Literal(Literal::positive(a.to_atom())))
        .collect();
    Ok(Problem {
        name,
        domain_name: d.name.clone(),
        objects: table.declared.clone(),
        init,
        goal: Condition::new(goal),
    })
}

/// True when every goal conjunct already holds in the initial state.
pub fn is_trivial(p: &Problem) -> bool {
    p.goal.items.iter().all(|item| match item {
        CondItem::Literal(l) => {
            let atom = GroundAtom::try_from(&l.atom).ok();
            atom.is_some_and(|a| p.init.contains(&a) != l.negated)
        }
        CondItem::Equality { .. } => false,
    })
}

#[cfg(test)]
mod tests;

//! Breadth-first reference planner over a compiled bitset representation.
//!
//! Static predicates (those no action adds or deletes) are evaluated once
//! against the initial state, which prunes most of a full grounding before
//! search starts.

use std::collections::{HashMap, HashSet, VecDeque};
use std::time::Instant;

use super::{round_micros, PlanResult, PlanStatus};
use crate::pddl::{ground_actions, CondItem, Condition, Domain, GroundAction, GroundAtom, Problem, Term};
use crate::symbol::Symbol;
use crate::validate::Plan;

/// Default cap on expanded states.
pub const EXPANSION_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy)]
pub struct SearchLimits {
    /// Longest plan considered.
    pub max_depth: Option<usize>,
    pub max_expansions: usize,
    pub deadline: Option<Instant>,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_depth: None,
            max_expansions: EXPANSION_BUDGET,
            deadline: None,
        }
    }
}

#[derive(Default)]
struct Guard {
    pos: Vec<u32>,
    neg: Vec<u32>,
}

struct CompiledEffect {
    when: Guard,
    adds: Vec<u32>,
    dels: Vec<u32>,
}

struct CompiledAction {
    source: GroundAction,
    pre: Guard,
    adds: Vec<u32>,
    dels: Vec<u32>,
    conditional: Vec<CompiledEffect>,
}

struct Compiler<'a> {
    statics: &'a HashSet<Symbol>,
    init: &'a std::collections::BTreeSet<GroundAtom>,
    index: HashMap<GroundAtom, u32>,
}

impl Compiler<'_> {
    fn intern(&mut self, atom: GroundAtom) -> u32 {
        let next = self.index.len() as u32;
        *self.index.entry(atom).or_insert(next)
    }

    /// Fluent part of a ground condition, or None if its static part is false.
    fn guard(&mut self, c: &Condition) -> Option<Guard> {
        let mut g = Guard::default();
        for item in &c.items {
            match item {
                CondItem::Equality { left, right, negated } => {
                    if (ground(left) == ground(right)) == *negated {
                        return None;
                    }
                }
                CondItem::Literal(l) => {
                    let atom = GroundAtom::try_from(&l.atom).expect("ground condition");
                    if self.statics.contains(&atom.predicate) {
                        if self.init.contains(&atom) == l.negated {
                            return None;
                        }
                    } else if l.negated {
                        g.neg.push(self.intern(atom));
                    } else {
                        g.pos.push(self.intern(atom));
                    }
                }
            }
        }
        Some(g)
    }

    fn atoms(&mut self, atoms: &[crate::pddl::Atom]) -> Vec<u32> {
        atoms
            .iter()
            .map(|a| self.intern(GroundAtom::try_from(a).expect("ground effect")))
            .collect()
    }

    fn action(&mut self, a: GroundAction) -> Option<CompiledAction> {
        let pre = self.guard(&a.precondition())?;
        let e = a.effect();
        let adds = self.atoms(&e.adds);
        let dels = self.atoms(&e.deletes);
        let mut conditional = Vec::new();
        for ce in &e.conditional {
            if let Some(when) = self.guard(&ce.condition) {
                conditional.push(CompiledEffect {
                    when,
                    adds: self.atoms(&ce.adds),
                    dels: self.atoms(&ce.deletes),
                });
            }
        }
        Some(CompiledAction {
            source: a,
            pre,
            adds,
            dels,
            conditional,
        })
    }
}

fn ground(t: &Term) -> &Symbol {
    match t {
        Term::Object(o) => o,
        Term::Var(v) => panic!("variable ?{v} in ground condition"),
    }
}

type Bits = Box<[u64]>;

fn test(bits: &[u64], i: u32) -> bool {
    bits[(i / 64) as usize] >> (i % 64) & 1 == 1
}

fn set(bits: &mut [u64], i: u32, on: bool) {
    let w = &mut bits[(i / 64) as usize];
    if on {
        *w |= 1 << (i % 64);
    } else {
        *w &= !(1 << (i % 64));
    }
}

fn satisfied(bits: &[u64], g: &Guard) -> bool {
    g.pos.iter().all(|&i| test(bits, i)) && g.neg.iter().all(|&i| !test(bits, i))
}

fn successor(bits: &[u64], a: &CompiledAction) -> Bits {
    let mut next: Bits = bits.into();
    let fired: Vec<&CompiledEffect> = a.conditional.iter().filter(|ce| satisfied(bits, &ce.when)).collect();
    for &d in a.dels.iter().chain(fired.iter().flat_map(|ce| &ce.dels)) {
        set(&mut next, d, false);
    }
    for &x in a.adds.iter().chain(fired.iter().flat_map(|ce| &ce.adds)) {
        set(&mut next, x, true);
    }
    next
}

/// Shortest plan by breadth-first search.
///
/// Successors are generated in [`ground_actions`] order, so among plans of
/// minimal length the first one in that order is returned.
pub fn reference_plan(d: &Domain, p: &Problem, limits: SearchLimits) -> PlanResult {
    let started = Instant::now();
    let finish = |status: PlanStatus, plan: Option<Plan>, diagnostic: Option<String>, budget: bool| {
        let raw_output = plan.as_ref().map(Plan::to_text).unwrap_or_default();
        PlanResult {
            status,
            plan,
            wall_time: round_micros(started.elapsed().as_secs_f64()),
            raw_output,
            diagnostic,
            budget_exhausted: budget,
        }
    };

    let statics: HashSet<Symbol> = d
        .predicates
        .iter()
        .map(|s| s.name.clone())
        .filter(|name| {
            !d.actions.iter().any(|a| {
                let e = &a.effect;
                e.adds
                    .iter()
                    .chain(&e.deletes)
                    .chain(e.conditional.iter().flat_map(|c| c.adds.iter().chain(&c.deletes)))
                    .any(|atom| &atom.predicate == name)
            })
        })
        .collect();
    let mut compiler = Compiler {
        statics: &statics,
        init: &p.init,
        index: HashMap::new(),
    };
    for atom in &p.init {
        if !statics.contains(&atom.predicate) {
            compiler.intern(atom.clone());
        }
    }
    let Some(goal) = compiler.guard(&p.goal) else {
        return finish(
            PlanStatus::NoSolution,
            None,
            Some("goal contradicts static facts".into()),
            false,
        );
    };
    let actions: Vec<CompiledAction> = ground_actions(d, p)
        .into_iter()
        .filter_map(|a| compiler.action(a))
        .collect();
    let words = compiler.index.len().div_ceil(64).max(1);
    let mut init: Bits = vec![0u64; words].into();
    for atom in &p.init {
        if let Some(&i) = compiler.index.get(atom) {
            set(&mut init, i, true);
        }
    }

    // Per visited state: parent state and the action leading to it.
    let mut parent: Vec<Option<(u32, u32)>> = vec![None];
    let mut depth: Vec<u32> = vec![0];
    let mut visited: HashMap<Bits, u32> = HashMap::new();
    let mut states: Vec<Bits> = vec![init.clone()];
    visited.insert(init, 0);

    let plan_to = |parent: &[Option<(u32, u32)>], mut s: u32| {
        let mut steps = Vec::new();
        while let Some((prev, a)) = parent[s as usize] {
            steps.push(actions[a as usize].source.clone());
            s = prev;
        }
        steps.reverse();
        Plan::from(steps.as_slice())
    };

    if satisfied(&states[0], &goal) {
        return finish(PlanStatus::Solved, Some(Plan::new(Vec::new())), None, false);
    }
    let mut queue = VecDeque::from([0u32]);
    let mut expansions = 0usize;
    let mut depth_cut = false;
    while let Some(s) = queue.pop_front() {
        if limits.max_depth.is_some_and(|m| depth[s as usize] as usize >= m) {
            depth_cut = true;
            continue;
        }
        if expansions >= limits.max_expansions {
            return finish(
                PlanStatus::NoSolution,
                None,
                Some(format!("expansion budget of {} exhausted", limits.max_expansions)),
                true,
            );
        }
        expansions += 1;
        if expansions.is_multiple_of(1024) && limits.deadline.is_some_and(|dl| Instant::now() >= dl) {
            return finish(PlanStatus::Timeout, None, Some("search deadline reached".into()), false);
        }
        let current = states[s as usize].clone();
        for (ai, a) in actions.iter().enumerate() {
            if !satisfied(&current, &a.pre) {
                continue;
            }
            let next = successor(&current, a);
            if visited.contains_key(&next) {
                continue;
            }
            let id = states.len() as u32;
            visited.insert(next.clone(), id);
            parent.push(Some((s, ai as u32)));
            depth.push(depth[s as usize] + 1);
            let reached = satisfied(&next, &goal);
            states.push(next);
            if reached {
                return finish(PlanStatus::Solved, Some(plan_to(&parent, id)), None, false);
            }
            queue.push_back(id);
        }
    }
    let diagnostic = if depth_cut {
        format!("no plan within {} steps", limits.max_depth.unwrap_or_default())
    } else {
        format!("state space exhausted after {expansions} expansions")
    };
    finish(PlanStatus::NoSolution, None, Some(diagnostic), false)
}

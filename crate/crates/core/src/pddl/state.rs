use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use super::ast::*;
use super::PddlError;
use crate::symbol::Symbol;

/// A closed-world state: the set of true ground atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct State(BTreeSet<GroundAtom>);

impl State {
    pub fn new(atoms: BTreeSet<GroundAtom>) -> Self {
        State(atoms)
    }

    pub fn initial(problem: &Problem) -> Self {
        State(problem.init.clone())
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.0.contains(atom)
    }

    pub fn atoms(&self) -> &BTreeSet<GroundAtom> {
        &self.0
    }

    pub fn into_atoms(self) -> BTreeSet<GroundAtom> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<GroundAtom> for State {
    fn from_iter<T: IntoIterator<Item = GroundAtom>>(iter: T) -> Self {
        State(iter.into_iter().collect())
    }
}

/// An action schema instantiated with concrete objects.
///
/// The instantiated precondition and effect are produced on demand from the
/// shared schema, which keeps full groundings of large domains small.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub schema: Arc<ActionSchema>,
    pub args: Vec<Symbol>,
}

impl GroundAction {
    pub fn new(schema: Arc<ActionSchema>, args: Vec<Symbol>) -> Self {
        debug_assert_eq!(schema.parameters.len(), args.len());
        GroundAction { schema, args }
    }

    pub fn name(&self) -> &Symbol {
        &self.schema.name
    }

    fn bind(&self, t: &Term) -> Symbol {
        match t {
            Term::Object(o) => o.clone(),
            Term::Var(v) => {
                let i = self
                    .schema
                    .param_index(v)
                    .expect("schema variables are declared parameters");
                self.args[i].clone()
            }
        }
    }

    pub(crate) fn ground_atom(&self, a: &Atom) -> GroundAtom {
        GroundAtom::new(a.predicate.clone(), a.args.iter().map(|t| self.bind(t)).collect())
    }

    fn ground_item(&self, item: &CondItem) -> CondItem {
        match item {
            CondItem::Literal(l) => CondItem::Literal(Literal {
                atom: self.ground_atom(&l.atom).to_atom(),
                negated: l.negated,
            }),
            CondItem::Equality {
                left,
                right,
                negated,
            } => CondItem::Equality {
                left: Term::Object(self.bind(left)),
                right: Term::Object(self.bind(right)),
                negated: *negated,
            },
        }
    }

    fn ground_condition(&self, c: &Condition) -> Condition {
        Condition::new(c.items.iter().map(|i| self.ground_item(i)).collect())
    }

    fn ground_atoms(&self, atoms: &[Atom]) -> Vec<Atom> {
        atoms.iter().map(|a| self.ground_atom(a).to_atom()).collect()
    }

    pub fn precondition(&self) -> Condition {
        self.ground_condition(&self.schema.precondition)
    }

    pub fn effect(&self) -> Effect {
        let e = &self.schema.effect;
        Effect {
            adds: self.ground_atoms(&e.adds),
            deletes: self.ground_atoms(&e.deletes),
            conditional: e
                .conditional
                .iter()
                .map(|ce| ConditionalEffect {
                    condition: self.ground_condition(&ce.condition),
                    adds: self.ground_atoms(&ce.adds),
                    deletes: self.ground_atoms(&ce.deletes),
                })
                .collect(),
        }
    }

    /// First conjunct of `c` (under this action's binding) that is false in `s`.
    pub(crate) fn first_unsatisfied<'c>(&self, s: &State, c: &'c Condition) -> Option<&'c CondItem> {
        c.items.iter().find(|item| !self.item_holds(s, item))
    }

    fn item_holds(&self, s: &State, item: &CondItem) -> bool {
        match item {
            CondItem::Literal(l) => s.contains(&self.ground_atom(&l.atom)) != l.negated,
            CondItem::Equality {
                left,
                right,
                negated,
            } => (self.bind(left) == self.bind(right)) != *negated,
        }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.schema.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

fn object_of(t: &Term) -> &Symbol {
    match t {
        Term::Object(o) => o,
        Term::Var(_) => unreachable!("groundness checked by caller"),
    }
}

/// Closed-world evaluation of a ground condition.
pub fn holds(s: &State, c: &Condition) -> Result<bool, PddlError> {
    if let Some(t) = c.terms().find(|t| !t.is_ground()) {
        return Err(PddlError::NonGround {
            what: t.to_string(),
        });
    }
    Ok(c.items.iter().all(|item| match item {
        CondItem::Literal(l) => {
            let args = l.atom.args.iter().map(|t| object_of(t).clone()).collect();
            s.contains(&GroundAtom::new(l.atom.predicate.clone(), args)) != l.negated
        }
        CondItem::Equality {
            left,
            right,
            negated,
        } => (object_of(left) == object_of(right)) != *negated,
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("precondition of {action} violated: {failed}")]
pub struct PreconditionViolated {
    pub action: String,
    /// The first failed conjunct, ground.
    pub failed: CondItem,
}

/// Successor of `s` under `a`.
///
/// Every conditional effect's condition is read from `s` (the pre-state);
/// all deletes are applied before all adds.
pub fn apply(s: &State, a: &GroundAction) -> Result<State, PreconditionViolated> {
    if let Some(item) = a.first_unsatisfied(s, &a.schema.precondition) {
        return Err(PreconditionViolated {
            action: a.to_string(),
            failed: a.ground_item(item),
        });
    }
    let e = &a.schema.effect;
    let mut deletes: Vec<GroundAtom> = e.deletes.iter().map(|x| a.ground_atom(x)).collect();
    let mut adds: Vec<GroundAtom> = e.adds.iter().map(|x| a.ground_atom(x)).collect();
    for ce in &e.conditional {
        if a.first_unsatisfied(s, &ce.condition).is_none() {
            deletes.extend(ce.deletes.iter().map(|x| a.ground_atom(x)));
            adds.extend(ce.adds.iter().map(|x| a.ground_atom(x)));
        }
    }
    let mut next = s.0.clone();
    for d in &deletes {
        next.remove(d);
    }
    next.extend(adds);
    Ok(State(next))
}

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::PddlError;
use crate::symbol::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Requirement {
    Strips,
    Typing,
    NegativePreconditions,
    Equality,
    ConditionalEffects,
    /// Accepted, but only the features of the other variants are honored.
    Adl,
}

impl Requirement {
    pub fn from_keyword(kw: &str) -> Option<Self> {
        Some(match kw {
            ":strips" => Requirement::Strips,
            ":typing" => Requirement::Typing,
            ":negative-preconditions" => Requirement::NegativePreconditions,
            ":equality" => Requirement::Equality,
            ":conditional-effects" => Requirement::ConditionalEffects,
            ":adl" => Requirement::Adl,
            _ => return None,
        })
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Requirement::Strips => ":strips",
            Requirement::Typing => ":typing",
            Requirement::NegativePreconditions => ":negative-preconditions",
            Requirement::Equality => ":equality",
            Requirement::ConditionalEffects => ":conditional-effects",
            Requirement::Adl => ":adl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypedParameter {
    pub name: Symbol,
    pub ty: Symbol,
}

impl TypedParameter {
    pub fn new(name: Symbol, ty: Symbol) -> Self {
        TypedParameter { name, ty }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: Symbol,
    pub parent: Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateSignature {
    pub name: Symbol,
    pub parameters: Vec<TypedParameter>,
}

impl PredicateSignature {
    pub fn arity(&self) -> usize {
        self.parameters.len()
    }
}

/// Argument of a lifted atom: a schema variable (stored without the `?`) or an object name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Symbol),
    Object(Symbol),
}

impl Term {
    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Object(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Object(o) => write!(f, "{o}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl Literal {
    pub fn positive(atom: Atom) -> Self {
        Literal {
            atom,
            negated: false,
        }
    }

    pub fn negative(atom: Atom) -> Self {
        Literal {
            atom,
            negated: true,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "(not {})", self.atom)
        } else {
            write!(f, "{}", self.atom)
        }
    }
}

/// One conjunct of a [`Condition`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CondItem {
    Literal(Literal),
    Equality {
        left: Term,
        right: Term,
        negated: bool,
    },
}

impl CondItem {
    fn terms(&self) -> Box<dyn Iterator<Item = &Term> + '_> {
        match self {
            CondItem::Literal(l) => Box::new(l.atom.args.iter()),
            CondItem::Equality { left, right, .. } => Box::new([left, right].into_iter()),
        }
    }
}

impl fmt::Display for CondItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CondItem::Literal(l) => write!(f, "{l}"),
            CondItem::Equality {
                left,
                right,
                negated: false,
            } => write!(f, "(= {left} {right})"),
            CondItem::Equality {
                left,
                right,
                negated: true,
            } => write!(f, "(not (= {left} {right}))"),
        }
    }
}

/// A conjunction; the empty conjunction is trivially true.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Condition {
    pub items: Vec<CondItem>,
}

impl Condition {
    pub fn new(items: Vec<CondItem>) -> Self {
        Condition { items }
    }

    pub fn is_ground(&self) -> bool {
        self.items.iter().all(|i| i.terms().all(Term::is_ground))
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.items.iter().flat_map(CondItem::terms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ConditionalEffect {
    pub condition: Condition,
    pub adds: Vec<Atom>,
    pub deletes: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Effect {
    pub adds: Vec<Atom>,
    pub deletes: Vec<Atom>,
    pub conditional: Vec<ConditionalEffect>,
}

impl Effect {
    pub fn is_empty(&self) -> bool {
        self.adds.is_empty() && self.deletes.is_empty() && self.conditional.is_empty()
    }

    /// Upper bound on atoms this effect can add to a state.
    pub fn add_count(&self) -> usize {
        self.adds.len() + self.conditional.iter().map(|c| c.adds.len()).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: Symbol,
    pub parameters: Vec<TypedParameter>,
    pub precondition: Condition,
    pub effect: Effect,
}

impl ActionSchema {
    pub fn param_index(&self, var: &Symbol) -> Option<usize> {
        self.parameters.iter().position(|p| &p.name == var)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub name: Symbol,
    pub requirements: Vec<Requirement>,
    pub types: Vec<TypeDecl>,
    pub constants: Vec<TypedParameter>,
    pub predicates: Vec<PredicateSignature>,
    pub actions: Vec<Arc<ActionSchema>>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSignature> {
        self.predicates.iter().find(|p| p.name.as_str() == name)
    }

    pub fn action(&self, name: &str) -> Option<&Arc<ActionSchema>> {
        self.actions.iter().find(|a| a.name.as_str() == name)
    }

    pub fn constant(&self, name: &str) -> Option<&TypedParameter> {
        self.constants.iter().find(|c| c.name.as_str() == name)
    }

    pub fn has_type(&self, ty: &str) -> bool {
        ty == "object" || self.types.iter().any(|t| t.name.as_str() == ty)
    }

    fn parent_of(&self, ty: &str) -> Option<&Symbol> {
        self.types
            .iter()
            .find(|t| t.name.as_str() == ty)
            .map(|t| &t.parent)
    }

    /// True when `sub` equals `sup` or descends from it in the type hierarchy.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sup == "object" || sub == sup {
            return true;
        }
        let mut cur = sub;
        // The hierarchy is acyclic (checked at parse time) so this terminates.
        while let Some(parent) = self.parent_of(cur) {
            if parent.as_str() == sup {
                return true;
            }
            cur = parent.as_str();
        }
        false
    }

    /// Types are compatible when one descends from the other.
    pub fn types_related(&self, a: &str, b: &str) -> bool {
        self.is_subtype(a, b) || self.is_subtype(b, a)
    }
}

/// A ground atom, the element of a [`State`](super::State).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: Symbol,
    pub args: Vec<Symbol>,
}

impl GroundAtom {
    pub fn new(predicate: Symbol, args: Vec<Symbol>) -> Self {
        GroundAtom { predicate, args }
    }

    /// Convenience constructor for tests and fixtures; panics on invalid symbols.
    pub fn parse_parts(predicate: &str, args: &[&str]) -> Self {
        GroundAtom {
            predicate: Symbol::new(predicate).expect("valid predicate"),
            args: args
                .iter()
                .map(|a| Symbol::new(a).expect("valid argument"))
                .collect(),
        }
    }

    pub fn to_atom(&self) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().cloned().map(Term::Object).collect(),
        }
    }
}

impl TryFrom<&Atom> for GroundAtom {
    type Error = PddlError;

    /// Fails when the atom still mentions a variable.
    fn try_from(a: &Atom) -> Result<Self, PddlError> {
        let args = a
            .args
            .iter()
            .map(|t| match t {
                Term::Object(o) => Ok(o.clone()),
                Term::Var(_) => Err(PddlError::NonGround { what: a.to_string() }),
            })
            .collect::<Result<_, _>>()?;
        Ok(GroundAtom::new(a.predicate.clone(), args))
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub name: Symbol,
    pub domain_name: Symbol,
    /// Sorted by object name; names are unique.
    pub objects: Vec<TypedParameter>,
    pub init: std::collections::BTreeSet<GroundAtom>,
    pub goal: Condition,
}

impl Problem {
    pub fn object(&self, name: &str) -> Option<&TypedParameter> {
        self.objects
            .binary_search_by(|o| o.name.as_str().cmp(name))
            .ok()
            .map(|i| &self.objects[i])
    }

    /// Type of every object visible to the problem: domain constants plus problem objects.
    pub fn object_types(&self, domain: &Domain) -> BTreeMap<Symbol, Symbol> {
        domain
            .constants
            .iter()
            .chain(self.objects.iter())
            .map(|o| (o.name.clone(), o.ty.clone()))
            .collect()
    }
}

//! The supported PDDL 2.1 subset: typing, negative preconditions, equality
//! and (one level of) conditional effects.

mod ast;
mod ground;
mod parse;
mod serialize;
pub mod sexpr;
mod state;

use thiserror::Error;

pub use ast::*;
pub use ground::{ground_actions, objects_of_type};
pub use parse::{parse_domain, parse_problem};
pub use serialize::{serialize_domain, serialize_problem};
pub use state::{apply, holds, GroundAction, PreconditionViolated, State};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("{line}:{col}: lexical error: {message}")]
    Lex {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unsupported requirement {requirement}")]
    UnsupportedRequirement { requirement: String },
    #[error("{line}:{col}: unsupported feature: {feature}")]
    Unsupported {
        feature: String,
        line: usize,
        col: usize,
    },
    #[error("unknown predicate {name}")]
    UnknownPredicate { name: String },
    #[error("arity mismatch in {atom}: expected {expected} arguments, found {found}")]
    Arity {
        atom: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown type {name}")]
    UnknownType { name: String },
    #[error("undeclared object {name}")]
    UnknownObject { name: String },
    #[error("undeclared variable {name} in {action}")]
    UndeclaredVariable { name: String, action: String },
    #[error("type mismatch in {context}: {argument} is {found}, expected {expected}")]
    TypeMismatch {
        context: String,
        argument: String,
        expected: String,
        found: String,
    },
    #[error("duplicate {kind} {name}")]
    Duplicate { kind: &'static str, name: String },
    #[error("cyclic type hierarchy through {name}")]
    CyclicTypes { name: String },
    #[error("problem is for domain {found}, expected {expected}")]
    DomainMismatch { expected: String, found: String },
    #[error("action {action} both adds and deletes {atom} in one branch")]
    ConflictingEffect { action: String, atom: String },
    #[error("condition is not ground: {what}")]
    NonGround { what: String },
}

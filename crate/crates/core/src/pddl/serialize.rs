//! Canonical PDDL text. The output is a pure function of the value:
//! lowercase, init atoms sorted, objects grouped by type, goal order kept.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::ast::*;
use crate::symbol::Symbol;

/// `a b - t c - u` with consecutive equal types merged.
fn typed_groups(params: &[TypedParameter], var: bool) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < params.len() {
        let ty = &params[i].ty;
        let mut j = i;
        while j < params.len() && &params[j].ty == ty {
            if !out.is_empty() {
                out.push(' ');
            }
            if var {
                out.push('?');
            }
            out.push_str(params[j].name.as_str());
            j += 1;
        }
        write!(out, " - {ty}").unwrap();
        i = j;
    }
    out
}

fn condition(c: &Condition) -> String {
    match c.items.as_slice() {
        [] => "(and)".to_string(),
        [one] => one.to_string(),
        items => {
            let parts: Vec<String> = items.iter().map(ToString::to_string).collect();
            format!("(and {})", parts.join(" "))
        }
    }
}

fn literal_effects(adds: &[Atom], deletes: &[Atom]) -> Vec<String> {
    deletes
        .iter()
        .map(|a| format!("(not {a})"))
        .chain(adds.iter().map(ToString::to_string))
        .collect()
}

fn effect(e: &Effect, indent: &str) -> String {
    let plain = literal_effects(&e.adds, &e.deletes);
    if e.conditional.is_empty() {
        return match plain.as_slice() {
            [] => "(and)".to_string(),
            [one] => one.clone(),
            _ => format!("(and {})", plain.join(" ")),
        };
    }
    let mut out = String::from("(and");
    if !plain.is_empty() {
        write!(out, " {}", plain.join(" ")).unwrap();
    }
    for ce in &e.conditional {
        let body = literal_effects(&ce.adds, &ce.deletes);
        let body = match body.as_slice() {
            [one] => one.clone(),
            _ => format!("(and {})", body.join(" ")),
        };
        write!(out, "\n{indent}  (when {} {body})", condition(&ce.condition)).unwrap();
    }
    out.push(')');
    out
}

pub fn serialize_domain(d: &Domain) -> String {
    let mut out = String::new();
    writeln!(out, "(define (domain {})", d.name).unwrap();
    if !d.requirements.is_empty() {
        let reqs: Vec<&str> = d.requirements.iter().map(|r| r.keyword()).collect();
        writeln!(out, "  (:requirements {})", reqs.join(" ")).unwrap();
    }
    if !d.types.is_empty() {
        let as_params: Vec<TypedParameter> = d
            .types
            .iter()
            .map(|t| TypedParameter::new(t.name.clone(), t.parent.clone()))
            .collect();
        writeln!(out, "  (:types {})", typed_groups(&as_params, false)).unwrap();
    }
    if !d.constants.is_empty() {
        writeln!(out, "  (:constants {})", typed_groups(&d.constants, false)).unwrap();
    }
    out.push_str("  (:predicates");
    for p in &d.predicates {
        write!(out, "\n    ({}", p.name).unwrap();
        if !p.parameters.is_empty() {
            write!(out, " {}", typed_groups(&p.parameters, true)).unwrap();
        }
        out.push(')');
    }
    out.push_str(")\n");
    for a in &d.actions {
        writeln!(out, "  (:action {}", a.name).unwrap();
        writeln!(out, "    :parameters ({})", typed_groups(&a.parameters, true)).unwrap();
        writeln!(out, "    :precondition {}", condition(&a.precondition)).unwrap();
        writeln!(out, "    :effect {})", effect(&a.effect, "    ")).unwrap();
    }
    out.push_str(")\n");
    out
}

pub fn serialize_problem(p: &Problem) -> String {
    let mut out = String::new();
    writeln!(out, "(define (problem {})", p.name).unwrap();
    writeln!(out, "  (:domain {})", p.domain_name).unwrap();
    let mut by_type: BTreeMap<&Symbol, Vec<&Symbol>> = BTreeMap::new();
    for o in &p.objects {
        by_type.entry(&o.ty).or_default().push(&o.name);
    }
    if !by_type.is_empty() {
        out.push_str("  (:objects\n");
        for (ty, mut names) in by_type {
            names.sort();
            let names: Vec<&str> = names.iter().map(|n| n.as_str()).collect();
            writeln!(out, "    {} - {ty}", names.join(" ")).unwrap();
        }
        out.push_str("  )\n");
    }
    out.push_str("  (:init\n");
    for a in &p.init {
        writeln!(out, "    {a}").unwrap();
    }
    out.push_str("  )\n");
    out.push_str("  (:goal (and\n");
    for item in &p.goal.items {
        writeln!(out, "    {item}").unwrap();
    }
    out.push_str("  ))\n)\n");
    out
}

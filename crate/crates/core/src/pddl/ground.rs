use std::collections::BTreeMap;

use super::ast::{Domain, Problem};
use super::state::GroundAction;
use crate::symbol::Symbol;

/// Objects (constants and problem objects) usable for a parameter of type `ty`, sorted.
pub fn objects_of_type(domain: &Domain, problem: &Problem, ty: &Symbol) -> Vec<Symbol> {
    // object_types is a BTreeMap, so names come out sorted.
    problem
        .object_types(domain)
        .into_iter()
        .filter(|(_, t)| domain.is_subtype(t.as_str(), ty.as_str()))
        .map(|(n, _)| n)
        .collect()
}

/// Every type-consistent instantiation of every schema, in schema order and
/// then lexicographic order of argument tuples.
pub fn ground_actions(domain: &Domain, problem: &Problem) -> Vec<GroundAction> {
    let mut by_type: BTreeMap<&Symbol, Vec<Symbol>> = BTreeMap::new();
    for schema in &domain.actions {
        for p in &schema.parameters {
            by_type
                .entry(&p.ty)
                .or_insert_with(|| objects_of_type(domain, problem, &p.ty));
        }
    }
    let mut out = Vec::new();
    for schema in &domain.actions {
        let candidates: Vec<&Vec<Symbol>> =
            schema.parameters.iter().map(|p| &by_type[&p.ty]).collect();
        if candidates.iter().any(|c| c.is_empty()) {
            continue;
        }
        // Odometer over the candidate lists, last position fastest.
        let mut idx = vec![0usize; candidates.len()];
        'tuples: loop {
            let args = idx
                .iter()
                .zip(&candidates)
                .map(|(&i, c)| c[i].clone())
                .collect();
            out.push(GroundAction::new(schema.clone(), args));
            let mut pos = candidates.len();
            loop {
                if pos == 0 {
                    break 'tuples;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < candidates[pos].len() {
                    continue 'tuples;
                }
                idx[pos] = 0;
            }
        }
    }
    out
}

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use super::ast::*;
use super::sexpr::{read_all, Pos, Sexpr};
use super::PddlError;
use crate::symbol::Symbol;

fn syntax(pos: Pos, message: impl Into<String>) -> PddlError {
    PddlError::Syntax {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    }
}

fn unsupported(pos: Pos, feature: impl Into<String>) -> PddlError {
    PddlError::Unsupported {
        feature: feature.into(),
        line: pos.line,
        col: pos.col,
    }
}

fn symbol_at(text: &str, pos: Pos) -> Result<Symbol, PddlError> {
    Symbol::new(text).map_err(|e| PddlError::Lex {
        line: pos.line,
        col: pos.col,
        message: e.to_string(),
    })
}

fn atom_symbol(e: &Sexpr) -> Result<Symbol, PddlError> {
    match e {
        Sexpr::Atom(s, p) => symbol_at(s, *p),
        Sexpr::List(_, p) => Err(syntax(*p, "expected a name, found a list")),
    }
}

fn expect_list<'a>(e: &'a Sexpr, what: &str) -> Result<&'a [Sexpr], PddlError> {
    e.as_list()
        .ok_or_else(|| syntax(e.pos(), format!("expected {what}")))
}

/// Parses the single `(define (<kind> NAME) ...)` form; returns the name and the remaining sections.
fn define_form<'a>(exprs: &'a [Sexpr], kind: &str) -> Result<(Symbol, &'a [Sexpr]), PddlError> {
    let top = match exprs {
        [one] => one,
        [] => return Err(syntax(Pos { line: 1, col: 1 }, "empty input")),
        [_, second, ..] => return Err(syntax(second.pos(), "trailing input after define form")),
    };
    let items = expect_list(top, "(define ...)")?;
    if items.first().and_then(Sexpr::as_atom) != Some("define") {
        return Err(syntax(top.pos(), "expected (define ...)"));
    }
    let header = items
        .get(1)
        .ok_or_else(|| syntax(top.pos(), format!("missing ({kind} NAME)")))?;
    match header.as_list() {
        Some([Sexpr::Atom(k, _), name]) if k == kind => Ok((atom_symbol(name)?, &items[2..])),
        _ => Err(syntax(header.pos(), format!("expected ({kind} NAME)"))),
    }
}

/// `a b - t c` style list. Entries keep their source position.
fn typed_list(items: &[Sexpr], vars: bool) -> Result<Vec<(Symbol, Symbol, Pos)>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<(Symbol, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        match &items[i] {
            Sexpr::Atom(s, p) if s == "-" => {
                let ty = items
                    .get(i + 1)
                    .ok_or_else(|| syntax(*p, "missing type after '-'"))?;
                if ty.head() == Some("either") {
                    return Err(unsupported(ty.pos(), "either types"));
                }
                let ty = atom_symbol(ty)?;
                if pending.is_empty() {
                    return Err(syntax(*p, "type annotation without names"));
                }
                out.extend(pending.drain(..).map(|(n, np)| (n, ty.clone(), np)));
                i += 2;
            }
            Sexpr::Atom(s, p) => {
                let name = if vars {
                    let v = s
                        .strip_prefix('?')
                        .ok_or_else(|| syntax(*p, format!("expected variable, found {s}")))?;
                    symbol_at(v, *p)?
                } else {
                    symbol_at(s, *p)?
                };
                pending.push((name, *p));
                i += 1;
            }
            Sexpr::List(_, p) => return Err(syntax(*p, "unexpected list in typed list")),
        }
    }
    out.extend(pending.into_iter().map(|(n, p)| (n, Symbol::object(), p)));
    Ok(out)
}

fn parse_term(e: &Sexpr) -> Result<Term, PddlError> {
    match e {
        Sexpr::Atom(s, p) => match s.strip_prefix('?') {
            Some(v) => Ok(Term::Var(symbol_at(v, *p)?)),
            None => Ok(Term::Object(symbol_at(s, *p)?)),
        },
        Sexpr::List(_, p) => Err(syntax(*p, "nested term (functions are not supported)")),
    }
}

fn parse_atom(e: &Sexpr) -> Result<Atom, PddlError> {
    let items = expect_list(e, "an atom")?;
    let (head, rest) = items
        .split_first()
        .ok_or_else(|| syntax(e.pos(), "empty atom"))?;
    let predicate = atom_symbol(head)?;
    let args = rest.iter().map(parse_term).collect::<Result<_, _>>()?;
    Ok(Atom { predicate, args })
}

const NUMERIC_HEADS: &[&str] = &[
    "increase",
    "decrease",
    "assign",
    "scale-up",
    "scale-down",
    "<",
    ">",
    "<=",
    ">=",
];

fn check_unsupported_head(e: &Sexpr) -> Result<(), PddlError> {
    match e.head() {
        Some(h @ ("or" | "imply")) => Err(unsupported(e.pos(), format!("disjunctive condition ({h})"))),
        Some(h @ ("forall" | "exists")) => Err(unsupported(e.pos(), format!("quantifier ({h})"))),
        Some(h) if NUMERIC_HEADS.contains(&h) => {
            Err(unsupported(e.pos(), format!("numeric fluents ({h})")))
        }
        Some("at" | "over") if e.as_list().map(|l| l.len()) == Some(3)
            && e.as_list().and_then(|l| l[1].as_atom()).map(|a| matches!(a, "start" | "end" | "all")).unwrap_or(false) =>
        {
            Err(unsupported(e.pos(), "durative conditions"))
        }
        _ => Ok(()),
    }
}

fn parse_condition(e: &Sexpr, out: &mut Vec<CondItem>) -> Result<(), PddlError> {
    check_unsupported_head(e)?;
    let items = expect_list(e, "a condition")?;
    match e.head() {
        None if items.is_empty() => Ok(()),
        Some("and") => items[1..].iter().try_for_each(|c| parse_condition(c, out)),
        Some("not") => {
            let [_, inner] = items else {
                return Err(syntax(e.pos(), "(not ...) takes exactly one argument"));
            };
            check_unsupported_head(inner)?;
            match inner.head() {
                Some("=") => out.push(parse_equality(inner, true)?),
                Some("and" | "not" | "when") => {
                    return Err(unsupported(inner.pos(), "negation of compound condition"))
                }
                _ => out.push(CondItem::Literal(Literal::negative(parse_atom(inner)?))),
            }
            Ok(())
        }
        Some("=") => {
            out.push(parse_equality(e, false)?);
            Ok(())
        }
        Some("when") => Err(syntax(e.pos(), "'when' is only allowed in effects")),
        _ => {
            out.push(CondItem::Literal(Literal::positive(parse_atom(e)?)));
            Ok(())
        }
    }
}

fn parse_equality(e: &Sexpr, negated: bool) -> Result<CondItem, PddlError> {
    match e.as_list() {
        Some([_, l, r]) => Ok(CondItem::Equality {
            left: parse_term(l)?,
            right: parse_term(r)?,
            negated,
        }),
        _ => Err(syntax(e.pos(), "(= a b) takes exactly two arguments")),
    }
}

fn parse_effect_literals(
    e: &Sexpr,
    adds: &mut Vec<Atom>,
    deletes: &mut Vec<Atom>,
    whens: Option<&mut Vec<ConditionalEffect>>,
) -> Result<(), PddlError> {
    check_unsupported_head(e)?;
    let items = expect_list(e, "an effect")?;
    match e.head() {
        None if items.is_empty() => Ok(()),
        Some("and") => {
            let mut whens = whens;
            for c in &items[1..] {
                parse_effect_literals(c, adds, deletes, whens.as_deref_mut())?;
            }
            Ok(())
        }
        Some("not") => {
            let [_, inner] = items else {
                return Err(syntax(e.pos(), "(not ...) takes exactly one argument"));
            };
            check_unsupported_head(inner)?;
            deletes.push(parse_atom(inner)?);
            Ok(())
        }
        Some("when") => {
            let Some(whens) = whens else {
                return Err(unsupported(e.pos(), "nested conditional effect"));
            };
            let [_, cond, body] = items else {
                return Err(syntax(e.pos(), "(when COND EFFECT) takes exactly two arguments"));
            };
            let mut condition = Vec::new();
            parse_condition(cond, &mut condition)?;
            let mut ce = ConditionalEffect {
                condition: Condition::new(condition),
                ..Default::default()
            };
            parse_effect_literals(body, &mut ce.adds, &mut ce.deletes, None)?;
            whens.push(ce);
            Ok(())
        }
        Some("=") => Err(syntax(e.pos(), "equality is not an effect")),
        _ => {
            adds.push(parse_atom(e)?);
            Ok(())
        }
    }
}

fn parse_effect(e: &Sexpr) -> Result<Effect, PddlError> {
    let mut eff = Effect::default();
    parse_effect_literals(e, &mut eff.adds, &mut eff.deletes, Some(&mut eff.conditional))?;
    Ok(eff)
}

/// Checks `atom` against the domain's signatures. `var_type` resolves schema variables.
fn check_atom(
    domain: &Domain,
    atom: &Atom,
    var_type: &dyn Fn(&Symbol) -> Result<Symbol, PddlError>,
    object_type: &dyn Fn(&Symbol) -> Result<Symbol, PddlError>,
    strict_objects: bool,
) -> Result<(), PddlError> {
    let sig = domain
        .predicate(atom.predicate.as_str())
        .ok_or_else(|| PddlError::UnknownPredicate {
            name: atom.predicate.to_string(),
        })?;
    if sig.arity() != atom.args.len() {
        return Err(PddlError::Arity {
            atom: atom.to_string(),
            expected: sig.arity(),
            found: atom.args.len(),
        });
    }
    for (arg, param) in atom.args.iter().zip(&sig.parameters) {
        let (ty, strict) = match arg {
            Term::Var(v) => (var_type(v)?, false),
            Term::Object(o) => (object_type(o)?, strict_objects),
        };
        let ok = if strict {
            domain.is_subtype(ty.as_str(), param.ty.as_str())
        } else {
            domain.types_related(ty.as_str(), param.ty.as_str())
        };
        if !ok {
            return Err(PddlError::TypeMismatch {
                context: atom.to_string(),
                argument: arg.to_string(),
                expected: param.ty.to_string(),
                found: ty.to_string(),
            });
        }
    }
    Ok(())
}

fn check_condition(
    domain: &Domain,
    cond: &Condition,
    var_type: &dyn Fn(&Symbol) -> Result<Symbol, PddlError>,
    object_type: &dyn Fn(&Symbol) -> Result<Symbol, PddlError>,
    strict_objects: bool,
) -> Result<(), PddlError> {
    for item in &cond.items {
        match item {
            CondItem::Literal(l) => {
                check_atom(domain, &l.atom, var_type, object_type, strict_objects)?
            }
            CondItem::Equality { left, right, .. } => {
                for t in [left, right] {
                    match t {
                        Term::Var(v) => drop(var_type(v)?),
                        Term::Object(o) => drop(object_type(o)?),
                    }
                }
            }
        }
    }
    Ok(())
}

fn check_no_conflict(adds: &[Atom], deletes: &[Atom], action: &Symbol) -> Result<(), PddlError> {
    if let Some(a) = adds.iter().find(|a| deletes.contains(a)) {
        return Err(PddlError::ConflictingEffect {
            action: action.to_string(),
            atom: a.to_string(),
        });
    }
    Ok(())
}

fn check_types_acyclic(types: &[TypeDecl]) -> Result<(), PddlError> {
    for t in types {
        let mut seen = HashSet::new();
        let mut cur = &t.name;
        while let Some(decl) = types.iter().find(|d| &d.name == cur) {
            if !seen.insert(cur.clone()) {
                return Err(PddlError::CyclicTypes {
                    name: t.name.to_string(),
                });
            }
            cur = &decl.parent;
        }
    }
    Ok(())
}

fn parse_action(domain: &Domain, items: &[Sexpr], pos: Pos) -> Result<ActionSchema, PddlError> {
    let name = atom_symbol(
        items
            .get(1)
            .ok_or_else(|| syntax(pos, "action without a name"))?,
    )?;
    let mut parameters = Vec::new();
    let mut precondition = Condition::default();
    let mut effect = Effect::default();
    let mut rest = &items[2..];
    while let [key, value, tail @ ..] = rest {
        match key.as_atom() {
            Some(":parameters") => {
                let list = expect_list(value, "parameter list")?;
                let mut seen = HashSet::new();
                for (n, ty, p) in typed_list(list, true)? {
                    if !seen.insert(n.clone()) {
                        return Err(PddlError::Duplicate {
                            kind: "parameter",
                            name: format!("?{n} (at {p})"),
                        });
                    }
                    parameters.push(TypedParameter::new(n, ty));
                }
            }
            Some(":precondition") => {
                let mut items = Vec::new();
                parse_condition(value, &mut items)?;
                precondition = Condition::new(items);
            }
            Some(":effect") => effect = parse_effect(value)?,
            Some(other) => return Err(syntax(key.pos(), format!("unknown action key {other}"))),
            None => return Err(syntax(key.pos(), "expected action key")),
        }
        rest = tail;
    }
    if let [dangling] = rest {
        return Err(syntax(dangling.pos(), "action key without value"));
    }
    for p in &parameters {
        if !domain.has_type(p.ty.as_str()) {
            return Err(PddlError::UnknownType {
                name: p.ty.to_string(),
            });
        }
    }
    let var_type = |v: &Symbol| {
        parameters
            .iter()
            .find(|p| &p.name == v)
            .map(|p| p.ty.clone())
            .ok_or_else(|| PddlError::UndeclaredVariable {
                name: format!("?{v}"),
                action: name.to_string(),
            })
    };
    let object_type = |o: &Symbol| {
        domain
            .constant(o.as_str())
            .map(|c| c.ty.clone())
            .ok_or_else(|| PddlError::UnknownObject {
                name: o.to_string(),
            })
    };
    check_condition(domain, &precondition, &var_type, &object_type, true)?;
    for a in effect.adds.iter().chain(&effect.deletes) {
        check_atom(domain, a, &var_type, &object_type, true)?;
    }
    check_no_conflict(&effect.adds, &effect.deletes, &name)?;
    for ce in &effect.conditional {
        check_condition(domain, &ce.condition, &var_type, &object_type, true)?;
        for a in ce.adds.iter().chain(&ce.deletes) {
            check_atom(domain, a, &var_type, &object_type, true)?;
        }
        check_no_conflict(&ce.adds, &ce.deletes, &name)?;
    }
    Ok(ActionSchema {
        name,
        parameters,
        precondition,
        effect,
    })
}

pub fn parse_domain(text: &str) -> Result<Domain, PddlError> {
    let exprs = read_all(text)?;
    let (name, sections) = define_form(&exprs, "domain")?;
    let mut domain = Domain {
        name,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    for section in sections {
        let items = expect_list(section, "a domain section")?;
        let pos = section.pos();
        match section.head() {
            Some(":requirements") => {
                for r in &items[1..] {
                    let kw = r.as_atom().ok_or_else(|| syntax(r.pos(), "expected requirement"))?;
                    let req = Requirement::from_keyword(kw).ok_or_else(|| {
                        PddlError::UnsupportedRequirement {
                            requirement: kw.to_string(),
                        }
                    })?;
                    if !domain.requirements.contains(&req) {
                        domain.requirements.push(req);
                    }
                }
            }
            Some(":types") => {
                for (n, parent, p) in typed_list(&items[1..], false)? {
                    if n.as_str() == "object" {
                        continue;
                    }
                    if domain.types.iter().any(|t| t.name == n) {
                        return Err(PddlError::Duplicate {
                            kind: "type",
                            name: format!("{n} (at {p})"),
                        });
                    }
                    domain.types.push(TypeDecl { name: n, parent });
                }
                // Parents named only after '-' are implicitly declared under `object`.
                let implicit: Vec<Symbol> = domain
                    .types
                    .iter()
                    .map(|t| t.parent.clone())
                    .filter(|p| !domain.has_type(p.as_str()))
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                for p in implicit {
                    domain.types.push(TypeDecl {
                        name: p,
                        parent: Symbol::object(),
                    });
                }
                check_types_acyclic(&domain.types)?;
            }
            Some(":constants") => {
                for (n, ty, p) in typed_list(&items[1..], false)? {
                    if !domain.has_type(ty.as_str()) {
                        return Err(PddlError::UnknownType { name: ty.to_string() });
                    }
                    if domain.constants.iter().any(|c| c.name == n) {
                        return Err(PddlError::Duplicate {
                            kind: "constant",
                            name: format!("{n} (at {p})"),
                        });
                    }
                    domain.constants.push(TypedParameter::new(n, ty));
                }
            }
            Some(":predicates") => {
                for pred in &items[1..] {
                    let list = expect_list(pred, "a predicate declaration")?;
                    let (head, rest) = list
                        .split_first()
                        .ok_or_else(|| syntax(pred.pos(), "empty predicate declaration"))?;
                    let name = atom_symbol(head)?;
                    if domain.predicate(name.as_str()).is_some() {
                        return Err(PddlError::Duplicate {
                            kind: "predicate",
                            name: name.to_string(),
                        });
                    }
                    let parameters = typed_list(rest, true)?
                        .into_iter()
                        .map(|(n, ty, _)| {
                            if domain.has_type(ty.as_str()) {
                                Ok(TypedParameter::new(n, ty))
                            } else {
                                Err(PddlError::UnknownType { name: ty.to_string() })
                            }
                        })
                        .collect::<Result<_, _>>()?;
                    domain.predicates.push(PredicateSignature { name, parameters });
                }
            }
            Some(":functions") => return Err(unsupported(pos, "numeric fluents (:functions)")),
            Some(":durative-action") => return Err(unsupported(pos, "durative actions")),
            Some(":derived") => return Err(unsupported(pos, "derived predicates")),
            Some(":action") => {
                let action = parse_action(&domain, items, pos)?;
                if domain.action(action.name.as_str()).is_some() {
                    return Err(PddlError::Duplicate {
                        kind: "action",
                        name: action.name.to_string(),
                    });
                }
                domain.actions.push(Arc::new(action));
            }
            Some(other) => return Err(syntax(pos, format!("unknown domain section {other}"))),
            None => return Err(syntax(pos, "expected a domain section")),
        }
    }
    Ok(domain)
}

pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, PddlError> {
    let exprs = read_all(text)?;
    let (name, sections) = define_form(&exprs, "problem")?;
    let mut domain_name = None;
    let mut objects: Vec<TypedParameter> = Vec::new();
    let mut init_atoms = Vec::new();
    let mut goal = None;
    for section in sections {
        let items = expect_list(section, "a problem section")?;
        let pos = section.pos();
        match section.head() {
            Some(":domain") => match items {
                [_, n] => domain_name = Some(atom_symbol(n)?),
                _ => return Err(syntax(pos, "expected (:domain NAME)")),
            },
            Some(":requirements") => {
                for r in &items[1..] {
                    let kw = r.as_atom().unwrap_or_default();
                    if Requirement::from_keyword(kw).is_none() {
                        return Err(PddlError::UnsupportedRequirement {
                            requirement: kw.to_string(),
                        });
                    }
                }
            }
            Some(":objects") => {
                for (n, ty, p) in typed_list(&items[1..], false)? {
                    if !domain.has_type(ty.as_str()) {
                        return Err(PddlError::UnknownType { name: ty.to_string() });
                    }
                    let clash = objects
                        .iter()
                        .chain(domain.constants.iter())
                        .find(|o| o.name == n);
                    match clash {
                        Some(o) if o.ty == ty => continue,
                        Some(_) => {
                            return Err(PddlError::Duplicate {
                                kind: "object",
                                name: format!("{n} (at {p})"),
                            })
                        }
                        None => {}
                    }
                    objects.push(TypedParameter::new(n, ty));
                }
            }
            Some(":init") => {
                for a in &items[1..] {
                    match a.head() {
                        Some("=") => return Err(unsupported(a.pos(), "numeric fluents in :init")),
                        Some("not") => {
                            return Err(syntax(a.pos(), "negative literal in closed-world :init"))
                        }
                        Some("at") if a.as_list().map(|l| l.len()) == Some(3)
                            && a.as_list().map(|l| l[1].as_atom().is_none()).unwrap_or(false) =>
                        {
                            return Err(unsupported(a.pos(), "timed initial literals"))
                        }
                        _ => {}
                    }
                    let atom = parse_atom(a)?;
                    if !atom.is_ground() {
                        return Err(syntax(a.pos(), "variable in :init"));
                    }
                    init_atoms.push(atom);
                }
            }
            Some(":goal") => {
                let [_, g] = items else {
                    return Err(syntax(pos, "expected (:goal CONDITION)"));
                };
                let mut c = Vec::new();
                parse_condition(g, &mut c)?;
                let cond = Condition::new(c);
                if !cond.is_ground() {
                    return Err(syntax(g.pos(), "variable in :goal"));
                }
                goal = Some(cond);
            }
            Some(":metric") => return Err(unsupported(pos, "plan metrics")),
            Some(other) => return Err(syntax(pos, format!("unknown problem section {other}"))),
            None => return Err(syntax(pos, "expected a problem section")),
        }
    }
    let domain_name = domain_name.ok_or_else(|| PddlError::Syntax {
        line: 1,
        col: 1,
        message: "missing (:domain NAME)".into(),
    })?;
    if domain_name != domain.name {
        return Err(PddlError::DomainMismatch {
            expected: domain.name.to_string(),
            found: domain_name.to_string(),
        });
    }
    objects.sort_by(|a, b| a.name.cmp(&b.name));

    let object_type = |o: &Symbol| {
        objects
            .binary_search_by(|x| x.name.cmp(o))
            .ok()
            .map(|i| objects[i].ty.clone())
            .or_else(|| domain.constant(o.as_str()).map(|c| c.ty.clone()))
            .ok_or_else(|| PddlError::UnknownObject { name: o.to_string() })
    };
    let no_vars = |v: &Symbol| -> Result<Symbol, PddlError> {
        Err(PddlError::UndeclaredVariable {
            name: format!("?{v}"),
            action: "problem".into(),
        })
    };
    let mut init = BTreeSet::new();
    for atom in init_atoms {
        check_atom(domain, &atom, &no_vars, &object_type, true)?;
        let args = atom
            .args
            .into_iter()
            .map(|t| match t {
                Term::Object(o) => o,
                Term::Var(_) => unreachable!("checked ground"),
            })
            .collect();
        init.insert(GroundAtom::new(atom.predicate, args));
    }
    let goal = goal.unwrap_or_default();
    check_condition(domain, &goal, &no_vars, &object_type, true)?;
    Ok(Problem {
        name,
        domain_name,
        objects,
        init,
        goal,
    })
}

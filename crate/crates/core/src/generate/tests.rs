use std::collections::BTreeSet;
use std::fs;
use std::ops::ControlFlow;

use super::*;
use crate::assets;
use crate::dpgc::parse_config;
use crate::pddl::{parse_domain, parse_problem, serialize_problem};

fn artic3() -> (Domain, DpgcConfig) {
    (
        parse_domain(assets::ARTIC3_DOMAIN).unwrap(),
        parse_config(assets::ARTIC3_DPGC).unwrap(),
    )
}

fn sym(s: &str) -> Symbol {
    Symbol::new(s).unwrap()
}

fn config(pools: &str, init: &str) -> DpgcConfig {
    parse_config(&format!(
        r#"{{"domain": "t", "object_pools": [{pools}], "variable_init": [{init}]}}"#
    ))
    .unwrap()
}

fn sample(c: &DpgcConfig, seed: u64) -> Vec<GroundAtom> {
    let table = instantiate_objects(c).unwrap();
    sample_section(c, &c.variable_init, &table, &BTreeSet::new(), &mut rng_for(seed, 0)).unwrap()
}

#[test]
fn naming_convention() {
    let c = config(r#"{"id": "l", "type": "link", "quantity": 3, "naming": {"prefix": "link"}}"#, "");
    let t = instantiate_objects(&c).unwrap();
    let names: Vec<&str> = t.objects(&sym("l")).unwrap().iter().map(Symbol::as_str).collect();
    assert_eq!(names, ["link1", "link2", "link3"]);
}

#[test]
fn name_collision() {
    let c = config(
        r#"{"id": "a", "type": "x", "quantity": 1, "naming": {"prefix": "g"}},
           {"id": "b", "type": "y", "quantity": 1, "naming": {"prefix": "g"}}"#,
        "",
    );
    assert_eq!(
        instantiate_objects(&c).unwrap_err(),
        GenerationError::NameCollision {
            name: "g1".into(),
            first: "a".into(),
            second: "b".into()
        }
    );
}

#[test]
fn bundled_object_section() {
    let (d, c) = artic3();
    let t = instantiate_objects(&c).unwrap();
    let listing: Vec<String> = t.declared.iter().map(|o| format!("{} - {}", o.name, o.ty)).collect();
    assert_eq!(
        listing,
        [
            "gripper1 - gripper",
            "gripper2 - gripper",
            "joint1 - joint",
            "joint2 - joint",
            "link1 - link",
            "link2 - link",
            "link3 - link"
        ]
    );
    let p = generate_problem(&d, &c, &t, sym("x"), &mut rng_for(1, 0)).unwrap();
    let text = serialize_problem(&p);
    assert!(text.contains(
        "  (:objects\n    gripper1 gripper2 - gripper\n    joint1 joint2 - joint\n    link1 link2 link3 - link\n  )\n"
    ));
}

#[test]
fn mutex_pool_yields_distinct_arguments() {
    let c = config(
        r#"{"id": "g", "type": "x", "quantity": 2, "naming": {"prefix": "g"}, "usage": "mutex"}"#,
        r#"{"id": "p", "predicates": [{"predicate": "free", "count": 2, "arguments": ["g"]}]}"#,
    );
    for seed in 0..50 {
        let atoms = sample(&c, seed);
        assert_eq!(atoms.len(), 2);
        assert_ne!(atoms[0], atoms[1]);
    }
}

#[test]
fn mutex_exhaustion() {
    let c = config(
        r#"{"id": "g", "type": "x", "quantity": 2, "naming": {"prefix": "g"}, "usage": "mutex"}"#,
        r#"{"id": "p", "predicates": [{"predicate": "free", "count": 3, "arguments": ["g"]}]}"#,
    );
    let table = instantiate_objects(&c).unwrap();
    let err = sample_section(&c, &c.variable_init, &table, &BTreeSet::new(), &mut rng_for(0, 0))
        .unwrap_err();
    assert!(matches!(err, GenerationError::MutexExhausted { .. }));
}

#[test]
fn sequential_pool_has_no_gaps() {
    let c = config(
        r#"{"id": "j", "type": "x", "quantity": 4, "naming": {"prefix": "j"}, "usage": "sequential"}"#,
        r#"{"id": "p", "predicates": [
            {"predicate": "a", "count": 2, "arguments": ["j"]},
            {"predicate": "b", "probability": 0.5, "arguments": ["j"]},
            {"predicate": "c", "arguments": ["j"]}]}"#,
    );
    for seed in 0..50 {
        let args: Vec<String> = sample(&c, seed).iter().map(|a| a.args[0].to_string()).collect();
        let expected: Vec<String> = (1..=args.len()).map(|i| format!("j{i}")).collect();
        assert_eq!(args, expected);
    }
}

#[test]
fn tagged_links_are_adjacent() {
    let (d, c) = artic3();
    let t = instantiate_objects(&c).unwrap();
    let mut grasped = 0;
    for attempt in 0..500 {
        let p = generate_problem(&d, &c, &t, sym("x"), &mut rng_for(3, attempt)).unwrap();
        let held: Vec<u32> = p
            .init
            .iter()
            .filter(|a| a.predicate.as_str() == "in-hand")
            .map(|a| a.args[0].as_str()["link".len()..].parse().unwrap())
            .collect();
        if held.is_empty() {
            continue;
        }
        grasped += 1;
        assert_eq!(held.len(), 2, "{held:?}");
        assert_eq!(held[1], held[0] + 1);
        // holding atoms reference exactly the in-hand links
        let holding: BTreeSet<&str> = p
            .init
            .iter()
            .filter(|a| a.predicate.as_str() == "holding")
            .map(|a| a.args[1].as_str())
            .collect();
        assert_eq!(holding.len(), 2);
    }
    assert!(grasped > 100, "{grasped}");
}

#[test]
fn grippers_both_or_none() {
    let (d, c) = artic3();
    let t = instantiate_objects(&c).unwrap();
    for attempt in 0..500 {
        let p = generate_problem(&d, &c, &t, sym("x"), &mut rng_for(4, attempt)).unwrap();
        let count = |pred: &str| p.init.iter().filter(|a| a.predicate.as_str() == pred).count();
        let grippers: BTreeSet<&Symbol> = p
            .init
            .iter()
            .filter(|a| a.predicate.as_str() == "holding")
            .map(|a| &a.args[0])
            .collect();
        assert!(
            (count("holding") == 2 && grippers.len() == 2 && count("free") == 0)
                || (count("holding") == 0 && count("free") == 2),
            "{}",
            serialize_problem(&p)
        );
    }
}

#[test]
fn constant_section_is_verbatim_and_problems_reparse() {
    let (d, c) = artic3();
    let t = instantiate_objects(&c).unwrap();
    for attempt in 0..200 {
        let p = generate_problem(&d, &c, &t, sym("x"), &mut rng_for(5, attempt)).unwrap();
        for atom in &c.constant_init {
            assert!(p.init.contains(atom));
        }
        let text = serialize_problem(&p);
        assert_eq!(parse_problem(&text, &d).unwrap(), p);
        // every joint has exactly one angle
        let angles = p.init.iter().filter(|a| a.predicate.as_str() == "angle-of").count();
        assert_eq!(angles, 2);
        assert!(!p.goal.items.is_empty());
    }
}

#[test]
fn emission_frequency_is_calibrated() {
    let c = config(
        r#"{"id": "l", "type": "x", "quantity": 3, "naming": {"prefix": "l"}}"#,
        r#"{"id": "p", "predicates": [{"predicate": "a", "probability": 0.5, "arguments": ["l"]}]}"#,
    );
    let table = instantiate_objects(&c).unwrap();
    let n = 10_000;
    let hits = (0..n)
        .filter(|&k| {
            !sample_section(&c, &c.variable_init, &table, &BTreeSet::new(), &mut rng_for(11, k))
                .unwrap()
                .is_empty()
        })
        .count();
    let freq = hits as f64 / n as f64;
    assert!((freq - 0.5).abs() <= 0.02, "{freq}");
}

#[test]
fn mutex_group_weights() {
    let (_, c) = artic3();
    let n = 10_000;
    let released = (0..n)
        .filter(|&k| excluded_members(&c, &mut rng_for(12, k)).contains(&sym("grasped")))
        .count();
    let freq = released as f64 / n as f64;
    assert!((freq - 0.6).abs() <= 0.02, "{freq}");
}

#[test]
fn trivial_flag() {
    let d = parse_domain(assets::ARTIC3_DOMAIN).unwrap();
    let mut p = parse_problem(assets::ARTIC3_SAMPLE_PROBLEM, &d).unwrap();
    assert!(!is_trivial(&p));
    p.goal.items.clear();
    assert!(is_trivial(&p));
}

fn run_session(dir: &std::path::Path, seed: u64, target: u64) -> GenerationSession {
    let (d, c) = artic3();
    let mut s = GenerationSession::create(dir, d, c, seed, target).unwrap();
    s.run(|_| ControlFlow::Continue(())).unwrap();
    s
}

fn problem_files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir.join("problems"))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn resume_matches_uninterrupted_run() {
    let full = tempfile::tempdir().unwrap();
    run_session(full.path(), 9, 100);

    let part = tempfile::tempdir().unwrap();
    {
        let (d, c) = artic3();
        let mut s = GenerationSession::create(part.path(), d, c, 9, 100).unwrap();
        s.run(|r| if r.index == 49 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) })
            .unwrap();
        assert_eq!(s.emitted(), 50);
    }
    // simulate a torn journal write on top of the interruption
    let mut journal = fs::read_to_string(part.path().join("journal.fp")).unwrap();
    journal.push_str("0123abc");
    fs::write(part.path().join("journal.fp"), journal).unwrap();

    let mut s = GenerationSession::open(part.path()).unwrap();
    assert_eq!(s.emitted(), 50);
    s.run(|_| ControlFlow::Continue(())).unwrap();
    assert_eq!(s.emitted(), 100);

    assert_eq!(problem_files(full.path()), problem_files(part.path()));
    for f in ["journal.fp", "session.json", "config.dpgc.json", "domain.pddl"] {
        assert_eq!(
            fs::read(full.path().join(f)).unwrap(),
            fs::read(part.path().join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(part.path().join("markers/generation.done").exists());
    let log = fs::read_to_string(part.path().join("logs/generation.log")).unwrap();
    assert_eq!(log.lines().count(), 101);
}

#[test]
fn extending_the_target_continues_the_sequence() {
    let full = tempfile::tempdir().unwrap();
    run_session(full.path(), 21, 60);
    let part = tempfile::tempdir().unwrap();
    run_session(part.path(), 21, 30);
    let mut s = GenerationSession::open(part.path()).unwrap();
    assert!(s.is_complete());
    s.set_target(60).unwrap();
    assert!(!part.path().join("markers/generation.done").exists());
    s.run(|_| ControlFlow::Continue(())).unwrap();
    assert_eq!(problem_files(full.path()), problem_files(part.path()));
    assert_eq!(s.set_target(10).unwrap_err().to_string(), "target 10 is below the 60 problems already emitted");
}

#[test]
fn journal_has_no_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_session(dir.path(), 2, 300);
    let unique: BTreeSet<_> = s.journal().iter().collect();
    assert_eq!(unique.len(), 300);
}

#[test]
fn tampered_snapshot_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    run_session(dir.path(), 2, 5);
    let path = dir.path().join("config.dpgc.json");
    let text = fs::read_to_string(&path).unwrap().replace("0.8", "0.7");
    fs::write(&path, text).unwrap();
    assert!(matches!(
        GenerationSession::open(dir.path()),
        Err(SessionError::Mismatch(_))
    ));
}

#[test]
fn tiny_config_does_not_converge() {
    let d = parse_domain("(define (domain t) (:types x) (:predicates (a ?v - x)))").unwrap();
    let c = config(
        r#"{"id": "l", "type": "x", "quantity": 3, "naming": {"prefix": "l"}}"#,
        r#"{"id": "p", "predicates": [{"predicate": "a", "arguments": ["l"]}]}"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let mut s = GenerationSession::create(dir.path(), d, c, 0, 100).unwrap();
    let err = s.run(|_| ControlFlow::Continue(())).unwrap_err();
    assert!(
        matches!(err, SessionError::NonConvergence { emitted: 3, target: 100, .. }),
        "{err}"
    );
}

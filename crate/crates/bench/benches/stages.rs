use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pddlforge_bench::sample;
use pddlforge_core::generate::{generate_problem, instantiate_objects, rng_for};
use pddlforge_core::planner::{reference_plan, SearchLimits};
use pddlforge_core::{assets, ground_actions, parse_config, parse_domain, parse_problem, validate, Symbol};

fn parsing(c: &mut Criterion) {
    c.bench_function("parse_domain", |b| b.iter(|| parse_domain(black_box(assets::ARTIC3_DOMAIN)).unwrap()));
    let d = parse_domain(assets::ARTIC3_DOMAIN).unwrap();
    c.bench_function("parse_problem", |b| {
        b.iter(|| parse_problem(black_box(assets::ARTIC3_SAMPLE_PROBLEM), &d).unwrap())
    });
}

fn grounding(c: &mut Criterion) {
    let (d, p, _) = sample();
    c.bench_function("ground_actions", |b| b.iter(|| ground_actions(&d, black_box(&p)).len()));
}

fn validation(c: &mut Criterion) {
    let (d, p, plan) = sample();
    c.bench_function("validate_reference_plan", |b| b.iter(|| validate(&d, &p, black_box(&plan))));
}

fn generation(c: &mut Criterion) {
    let d = parse_domain(assets::ARTIC3_DOMAIN).unwrap();
    let config = parse_config(assets::ARTIC3_DPGC).unwrap();
    let table = instantiate_objects(&config).unwrap();
    let name = Symbol::new("bench").unwrap();
    let mut attempt = 0;
    c.bench_function("generate_problem", |b| {
        b.iter(|| {
            attempt += 1;
            generate_problem(&d, &config, &table, name.clone(), &mut rng_for(1, attempt)).unwrap()
        })
    });
}

fn planning(c: &mut Criterion) {
    let (d, p, _) = sample();
    let mut g = c.benchmark_group("plan");
    g.sample_size(10);
    g.bench_function("bfs_sample_problem", |b| b.iter(|| reference_plan(&d, black_box(&p), SearchLimits::default())));
    g.finish();
}

criterion_group!(benches, parsing, grounding, validation, generation, planning);
criterion_main!(benches);

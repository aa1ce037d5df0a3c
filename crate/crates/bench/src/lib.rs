//! Shared inputs for the benchmarks.

use pddlforge_core::assets;
use pddlforge_core::planner::{reference_plan, SearchLimits};
use pddlforge_core::{parse_domain, parse_problem, Domain, Plan, Problem};

/// The bundled domain, its sample problem and a reference plan for it.
pub fn sample() -> (Domain, Problem, Plan) {
    let d = parse_domain(assets::ARTIC3_DOMAIN).expect("bundled domain parses");
    let p = parse_problem(assets::ARTIC3_SAMPLE_PROBLEM, &d).expect("bundled problem parses");
    let plan = reference_plan(&d, &p, SearchLimits::default())
        .plan
        .expect("sample problem is solvable");
    (d, p, plan)
}

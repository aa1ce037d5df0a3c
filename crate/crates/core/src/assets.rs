//! Bundled articulated-object fixtures.

pub const ARTIC3_DOMAIN: &str = include_str!("../assets/artic3.pddl");
/// Both grippers free; needs grasping plus rotations of both joints.
pub const ARTIC3_SAMPLE_PROBLEM: &str = include_str!("../assets/artic3-sample.pddl");
/// Joint 1 already grasped; one clockwise step solves it.
pub const ARTIC3_MICRO_PROBLEM: &str = include_str!("../assets/artic3-micro.pddl");
pub const ARTIC3_DPGC: &str = include_str!("../assets/artic3.dpgc.json");

/// Grasp-free variant with roughly half the plan length.
pub const ARTIC3_MACRO_DOMAIN: &str = include_str!("../assets/artic3-macro.pddl");
pub const ARTIC3_MACRO_DPGC: &str = include_str!("../assets/artic3-macro.dpgc.json");

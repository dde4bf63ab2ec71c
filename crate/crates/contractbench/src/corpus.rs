//! The shipped example programs with their policies and state domains.
//!
//! Programs read their inputs from memory: `y` at 0, `size_A` at 1 (always
//! 2), array `A` at 4 and array `B` at 8. Cells 6 and 7 hold `A[2]` and
//! `A[3]`, the out-of-bounds secrets.

use crate::analysis::{Policy, StateDomain};
use crate::isa::{parse_program, Program};

pub const SOURCES: &[(&str, &str)] = &[
    ("P1", include_str!("../corpus/p1.uasm")),
    ("P1f", include_str!("../corpus/p1f.uasm")),
    ("P1'", include_str!("../corpus/p1p.uasm")),
    ("P1'f", include_str!("../corpus/p1pf.uasm")),
    ("P2", include_str!("../corpus/p2.uasm")),
    ("P2f", include_str!("../corpus/p2f.uasm")),
    ("P2'", include_str!("../corpus/p2p.uasm")),
    ("P2'f", include_str!("../corpus/p2pf.uasm")),
    ("ex2", include_str!("../corpus/ex2.uasm")),
    ("ex3", include_str!("../corpus/ex3.uasm")),
    ("skip", include_str!("../corpus/skip.uasm")),
    ("loop", include_str!("../corpus/loop.uasm")),
];

/// The five-line bounds-check listing over registers `y`, `size_A`, `A`, `B`.
pub const BOUNDS_CHECK: &str = "x <- y < size_A\nbeqz x, end\nload z, A + y\nz <- z * 64\nload w, B + z\n";

pub const TABLE1: [&str; 4] = ["P1", "P1f", "P1'", "P1'f"];
pub const TABLE2: [&str; 4] = ["P2", "P2f", "P2'", "P2'f"];

pub fn source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn program(name: &str) -> Option<Program> {
    source(name).map(|s| parse_program(s).expect("corpus programs are well-formed"))
}

/// Every shipped program, in table order.
pub fn all() -> Vec<(&'static str, Program)> {
    SOURCES.iter().map(|(n, _)| (*n, program(n).expect("listed"))).collect()
}

/// In-bounds data is public: everything except `A[2]` and `A[3]`.
pub fn table_policy() -> Policy {
    Policy::new().with_low(0, Some(6)).with_low(8, None)
}

/// `y` ranges over in- and out-of-bounds indices; the secrets vary.
pub fn table_domain() -> StateDomain {
    StateDomain::new().fix(1, 2).vary(0, 0..4).vary(4, 0..2).vary(6, 0..3).vary(7, 0..3)
}

/// Varies `A[10]` for the nested-branch example.
pub fn ex2_domain() -> StateDomain {
    StateDomain::new().vary(26, 0..2)
}

/// An out-of-bounds `y` with a varying `A[y]`.
pub fn ex3_domain() -> StateDomain {
    StateDomain::new().fix(1, 2).vary(0, 2..4).vary(6, 0..2).vary(7, 0..2)
}

/// The domain each program is analysed over by default.
pub fn default_domain(name: &str) -> StateDomain {
    match name {
        "ex2" => ex2_domain(),
        "ex3" => ex3_domain(),
        "loop" => StateDomain::new().vary(1, 0..3).vary(2, 0..3),
        _ => table_domain(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_program_parses() {
        assert_eq!(all().len(), SOURCES.len());
        assert!(parse_program(BOUNDS_CHECK).is_ok());
    }

    #[test]
    fn fenced_variants_add_a_barrier_after_each_branch() {
        for (plain, fenced) in [("P1", "P1f"), ("P1'", "P1'f"), ("P2", "P2f"), ("P2'", "P2'f")] {
            let p = program(plain).unwrap();
            let f = program(fenced).unwrap();
            let branches = p.instrs().iter().filter(|i| i.is_branch()).count();
            assert_eq!(f.len(), p.len() + branches, "{fenced}");
            for (k, i) in f.instrs().iter().enumerate() {
                if i.is_branch() {
                    assert_eq!(f.instrs()[k + 1], crate::isa::Instr::Barrier, "{fenced}");
                }
            }
        }
    }
}

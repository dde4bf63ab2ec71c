#![allow(dead_code)]

use contractbench::analysis::StateDomain;
use contractbench::countermeasures::Countermeasure;
use contractbench::gen::random_program;
use contractbench::uarch::{PredictorKind, SchedulerKind};
use contractbench::{ArchState, HwConfig, Memory, Program};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A random well-formed program of 1..=10 instructions.
pub fn program() -> impl Strategy<Value = Program> {
    (any::<u64>(), 1usize..=10).prop_map(|(seed, len)| random_program(&mut ChaCha8Rng::seed_from_u64(seed), len))
}

/// A small memory over addresses 0..16 with values 0..4.
pub fn memory() -> impl Strategy<Value = Memory> {
    proptest::collection::vec((0u64..16, 0u64..4), 0..6).prop_map(|cells| cells.into_iter().collect())
}

pub fn state(p: &Program, mem: Memory) -> ArchState {
    ArchState::with_memory(p, mem)
}

pub fn countermeasure() -> impl Strategy<Value = Countermeasure> {
    proptest::sample::select(Countermeasure::ALL.to_vec())
}

pub fn hw_config() -> impl Strategy<Value = HwConfig> {
    (
        2usize..=7,
        proptest::sample::select(vec!["lru:8", "lru:2", "direct:4:1", "direct:2:2"]),
        proptest::sample::select(vec![
            PredictorKind::Fallthrough,
            PredictorKind::Backward,
            PredictorKind::TwoBit,
            PredictorKind::Taken,
        ]),
        proptest::sample::select(vec![SchedulerKind::Seq, SchedulerKind::Ooo, SchedulerKind::Eager]),
        countermeasure(),
    )
        .prop_map(|(w, cache, predictor, scheduler, cm)| HwConfig {
            buffer_size: w,
            cache: cache.parse().expect("cache"),
            predictor,
            scheduler,
            countermeasure: cm,
            ..HwConfig::default()
        })
}

/// Three configurations that differ in cache, predictor and scheduler.
pub fn sweep_configs() -> Vec<HwConfig> {
    vec![
        HwConfig::default(),
        HwConfig {
            cache: "direct:4:1".parse().expect("cache"),
            predictor: PredictorKind::TwoBit,
            scheduler: SchedulerKind::Eager,
            ..HwConfig::default()
        },
        HwConfig {
            buffer_size: 6,
            cache: "lru:2".parse().expect("cache"),
            predictor: PredictorKind::Backward,
            scheduler: SchedulerKind::Ooo,
            ..HwConfig::default()
        },
        HwConfig {
            buffer_size: 6,
            predictor: PredictorKind::Fallthrough,
            scheduler: SchedulerKind::Eager,
            ..HwConfig::default()
        },
    ]
}

/// Varies addresses 0..3 over 0..3: 27 states.
pub fn small_domain() -> StateDomain {
    (0..3).fold(StateDomain::new(), |d, a| d.vary(a, 0..3))
}

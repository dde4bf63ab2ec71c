mod common;

use contractbench::arch::DEFAULT_FUEL;
use contractbench::countermeasures::{is_transmit, Countermeasure, Entry};
use contractbench::pipeline::{hw_step, HwState};
use contractbench::uarch::{Directive, Op};
use contractbench::{arch_run, hw_run, Expr, HwConfig, Program, Reg};
use proptest::prelude::*;

/// Steps a run by hand, handing every transition to `check`.
fn walk(p: &Program, cfg: &HwConfig, mem: contractbench::Memory, mut check: impl FnMut(&HwState, Directive, &HwState, bool)) {
    let mut h = HwState::initial(&common::state(p, mem), cfg);
    for _ in 0..500 {
        if h.is_final() {
            return;
        }
        let r = hw_step(p, &h, cfg);
        check(&h, r.directive, &r.state, r.stalled.is_some());
        h = r.state;
    }
}

/// The latest earlier writer of `r`, if it is an assignment.
fn writer(buf: &[Entry], r: Reg) -> Option<&Entry> {
    buf.iter().rev().find(|e| match &e.cmd.op {
        Op::Load { dst, .. } | Op::Assign { dst, .. } => *dst == r,
        _ => false,
    })
    .filter(|e| matches!(e.cmd.op, Op::Assign { .. }))
}

fn operands(op: &Op) -> Vec<Reg> {
    let unresolved = |e: &Expr| if e.is_resolved() { Vec::new() } else { e.vars() };
    match op {
        Op::Assign { expr, .. } => unresolved(expr),
        Op::Load { addr, .. } => unresolved(addr),
        Op::Store { src, addr } => [unresolved(src), unresolved(addr)].concat(),
        Op::Skip | Op::Barrier => Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn hardware_agrees_with_architecture(p in common::program(), mem in common::memory(), cfg in common::hw_config()) {
        let s = common::state(&p, mem);
        let want = arch_run(&p, &s, DEFAULT_FUEL).unwrap().0;
        let run = hw_run(&p, &s, &cfg).unwrap();
        prop_assert_eq!(&run.final_state.arch, &want);
        prop_assert!(run.final_state.is_final());
        prop_assert_eq!(run.trace.len(), run.steps() + 1);
    }

    #[test]
    fn runs_are_deterministic(p in common::program(), mem in common::memory(), cfg in common::hw_config()) {
        let s = common::state(&p, mem);
        prop_assert_eq!(hw_run(&p, &s, &cfg).unwrap(), hw_run(&p, &s, &cfg).unwrap());
    }

    #[test]
    fn buffer_never_exceeds_its_capacity(p in common::program(), mem in common::memory(), cfg in common::hw_config()) {
        let w = cfg.buffer_size;
        walk(&p, &cfg, mem, |_, _, after, _| assert!(after.buf.len() <= w, "{} > {w}", after.buf.len()));
    }

    #[test]
    fn only_predicted_pc_writes_are_tagged(p in common::program(), mem in common::memory(), cfg in common::hw_config()) {
        walk(&p, &cfg, mem, |_, _, after, _| {
            for e in &after.buf {
                if e.cmd.tag.is_some() {
                    assert!(matches!(e.cmd.op, Op::Assign { dst: Reg::PC, .. }), "tagged {:?}", e.cmd);
                }
            }
        });
    }

    #[test]
    fn labels_name_pending_branches(p in common::program(), mem in common::memory(), cfg in common::hw_config()) {
        walk(&p, &cfg, mem, |_, _, after, _| {
            for (k, e) in after.buf.iter().enumerate() {
                for &j in &e.label {
                    assert!(j >= 1 && j <= k, "label {j} at position {}", k + 1);
                    assert!(after.buf[j - 1].cmd.is_pending_branch(), "label {j} names {:?}", after.buf[j - 1].cmd);
                }
            }
            if cfg.countermeasure.labeling().is_none() {
                assert!(after.buf.iter().all(|e| e.label.is_empty()));
            }
        });
    }

    #[test]
    fn tainted_transmitters_wait(p in common::program(), mem in common::memory(), mut cfg in common::hw_config()) {
        cfg.countermeasure = Countermeasure::Tt;
        walk(&p, &cfg, mem, |before, d, after, stalled| {
            let Directive::Execute(i) = d else { return };
            let Some(e) = before.buf.get(i - 1) else { return };
            if !is_transmit(&e.cmd) {
                return;
            }
            let tainted = operands(&e.cmd.op)
                .into_iter()
                .any(|r| writer(&before.buf[..i - 1], r).is_some_and(|w| !w.label.is_empty()));
            if tainted {
                assert!(stalled, "tainted {:?} executed", e.cmd);
                assert_eq!(before.buf, after.buf);
            }
        });
    }

    #[test]
    fn load_delay_holds_loads_behind_pending_branches(p in common::program(), mem in common::memory(), mut cfg in common::hw_config()) {
        cfg.countermeasure = Countermeasure::LoadDelay;
        walk(&p, &cfg, mem, |before, d, _, stalled| {
            let Directive::Execute(i) = d else { return };
            let Some(e) = before.buf.get(i - 1) else { return };
            if e.cmd.is_load() && before.buf[..i - 1].iter().any(|b| b.cmd.is_pending_branch()) {
                assert!(stalled);
            }
        });
    }
}

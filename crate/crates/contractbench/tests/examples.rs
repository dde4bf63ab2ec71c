//! The bounds-check listing run with its inputs preset in registers.

use contractbench::analysis::{check_contract_satisfaction, Verdict};
use contractbench::contracts::{trace, ContractConfig};
use contractbench::corpus::{self, BOUNDS_CHECK};
use contractbench::uarch::SchedulerKind;
use contractbench::{parse_program, ArchState, ContractId, HwConfig, Memory, Program, Value};

const A: u64 = 4;
const B: u64 = 8;
const SIZE: u64 = 2;

fn setup(y: u64, cells: &[(u64, u64)]) -> (Program, ArchState) {
    let p = parse_program(BOUNDS_CHECK).unwrap();
    let mut s = ArchState::with_memory(&p, cells.iter().copied().collect::<Memory>());
    for (name, v) in [("y", y), ("size_A", SIZE), ("A", A), ("B", B)] {
        s.regs.set(p.reg(name).unwrap(), Value::Nat(v));
    }
    (p, s)
}

fn lines(p: &Program, s: &ArchState, c: ContractId) -> Vec<String> {
    trace(p, s, c, &ContractConfig::default()).unwrap().lines()
}

#[test]
fn in_bounds_run_observes_the_branch_and_both_loads() {
    let (p, s) = setup(1, &[(A + 1, 3)]);
    // The check falls through to address 2; z = A[1] * 64.
    let want = vec!["pc 2".to_string(), format!("load {}", A + 1), format!("load {}", B + 3 * 64)];
    assert_eq!(lines(&p, &s, ContractId::SeqCt), want);
    // Speculation first takes the wrong way out, then rolls back to 2.
    let spec: Vec<String> = std::iter::once("pc end".to_string()).chain(want.iter().cloned()).collect();
    assert_eq!(lines(&p, &s, ContractId::SpecCt), spec);
}

#[test]
fn out_of_bounds_access_is_visible_only_speculatively() {
    let (p, s) = setup(3, &[(A + 3, 1)]);
    assert_eq!(lines(&p, &s, ContractId::SeqCt), ["pc end"]);
    let spec = vec!["pc 2".to_string(), format!("load {}", A + 3), format!("load {}", B + 64), "pc end".to_string()];
    assert_eq!(lines(&p, &s, ContractId::SpecCt), spec);
    assert_eq!(lines(&p, &s, ContractId::SpecPcCt), ["pc 2", "pc end"]);
    let arch = vec!["pc 2".to_string(), format!("loadv {} 1", A + 3), format!("loadv {} 0", B + 64), "pc end".to_string()];
    assert_eq!(lines(&p, &s, ContractId::SpecArch), arch);
}

#[test]
fn states_differing_out_of_bounds_agree_sequentially_only() {
    let (p, s0) = setup(3, &[(A + 3, 0)]);
    let (_, s1) = setup(3, &[(A + 3, 1)]);
    assert_eq!(lines(&p, &s0, ContractId::SeqCt), lines(&p, &s1, ContractId::SeqCt));
    assert_ne!(lines(&p, &s0, ContractId::SpecCt), lines(&p, &s1, ContractId::SpecCt));
}

#[test]
fn speculating_hardware_breaks_the_sequential_contract_on_p1() {
    let p = corpus::program("P1").unwrap();
    let hw = HwConfig { buffer_size: 6, scheduler: SchedulerKind::Eager, ..HwConfig::default() };
    let ccfg = ContractConfig { window: 8, ..ContractConfig::default() };
    let dom = corpus::table_domain();
    match check_contract_satisfaction(&p, ContractId::SeqCt, &ccfg, &hw, &dom).unwrap() {
        Verdict::Fail(cex) => {
            assert!(cex.first.mem.get(0) >= SIZE, "violation needs an out-of-bounds index");
            assert_eq!(trace(&p, &cex.first, ContractId::SeqCt, &ccfg), trace(&p, &cex.second, ContractId::SeqCt, &ccfg));
        }
        Verdict::Pass => panic!("no violation found"),
    }
    assert!(check_contract_satisfaction(&p, ContractId::SpecCt, &ccfg, &hw, &dom).unwrap().passed());
}

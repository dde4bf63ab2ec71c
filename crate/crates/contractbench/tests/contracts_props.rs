mod common;

use contractbench::arch::DEFAULT_FUEL;
use contractbench::contracts::{spec_step, trace, ContractConfig, Observer, SpecConfig, SpecRule, Window};
use contractbench::{ArchState, ContractId, Observation, Reg};
use proptest::prelude::*;

fn erase_values(t: &[Observation]) -> Vec<Observation> {
    t.iter()
        .map(|o| match o {
            Observation::LoadVal(a, _) => Observation::Load(*a),
            o => o.clone(),
        })
        .collect()
}

fn is_subsequence(small: &[Observation], big: &[Observation]) -> bool {
    let mut it = big.iter();
    small.iter().all(|o| it.any(|b| b == o))
}

proptest! {
    #[test]
    fn ct_is_value_erasure_of_arch(p in common::program(), mem in common::memory(), w in 0u64..8) {
        let s = common::state(&p, mem);
        let cfg = ContractConfig { window: w, ..ContractConfig::default() };
        for (ct, arch) in [(ContractId::SeqCt, ContractId::SeqArch), (ContractId::SpecCt, ContractId::SpecArch)] {
            let a = trace(&p, &s, arch, &cfg).unwrap();
            let c = trace(&p, &s, ct, &cfg).unwrap();
            prop_assert_eq!(erase_values(&a.0), c.0);
        }
    }

    #[test]
    fn pc_ct_filters_ct(p in common::program(), mem in common::memory(), w in 0u64..8) {
        let s = common::state(&p, mem);
        let cfg = ContractConfig { window: w, ..ContractConfig::default() };
        let ct = trace(&p, &s, ContractId::SpecCt, &cfg).unwrap();
        let pc = trace(&p, &s, ContractId::SpecPcCt, &cfg).unwrap();
        prop_assert!(is_subsequence(&pc.0, &ct.0));
        // Only memory observations are ever dropped.
        let pcs = |t: &[Observation]| t.iter().filter(|o| matches!(o, Observation::Pc(_))).count();
        prop_assert_eq!(pcs(&pc.0), pcs(&ct.0));
    }

    #[test]
    fn rollback_resumes_the_correct_branch_target(p in common::program(), mem in common::memory(), w in 0u64..8) {
        let mut cfg = SpecConfig::new(common::state(&p, mem));
        // For each live speculative frame: the state that must be resumed.
        let mut pending: Vec<ArchState> = Vec::new();
        let mut branches = 0;
        let mut steps = 0;
        while !cfg.is_final() && steps < 10_000 {
            let before = cfg.top().0.clone();
            let depth = cfg.stack.len();
            let (rule, _) = spec_step(&p, &mut cfg, Observer::Ct, w).unwrap();
            match rule {
                SpecRule::Branch { correct, .. } => {
                    let mut want = before;
                    want.regs.set(Reg::PC, correct);
                    pending.push(want);
                    branches += 1;
                }
                SpecRule::Rollback => {
                    prop_assert_eq!(cfg.stack.len(), depth - 1);
                    prop_assert_eq!(&cfg.top().0, &pending.pop().unwrap());
                }
                _ => {}
            }
            prop_assert!(cfg.stack.len() <= 1 + branches);
            prop_assert_eq!(cfg.stack.len(), 1 + pending.len());
            for (_, win) in &cfg.stack[1..] {
                prop_assert!(matches!(win, Window::Fin(n) if *n <= w));
            }
            steps += 1;
        }
        prop_assert!(cfg.is_final());
    }

    #[test]
    fn top_sees_nothing_and_bot_sees_everything(p in common::program(), m1 in common::memory(), m2 in common::memory()) {
        let cfg = ContractConfig::default();
        let (s1, s2) = (common::state(&p, m1), common::state(&p, m2));
        prop_assert!(trace(&p, &s1, ContractId::Top, &cfg).unwrap().is_empty());
        let b1 = trace(&p, &s1, ContractId::BotInf, &cfg).unwrap();
        let b2 = trace(&p, &s2, ContractId::BotInf, &cfg).unwrap();
        prop_assert_eq!(b1 == b2, s1 == s2);
    }

    #[test]
    fn traces_are_deterministic(p in common::program(), mem in common::memory()) {
        let s = common::state(&p, mem);
        for c in ContractId::ALL {
            let cfg = ContractConfig { window: 5, fuel: DEFAULT_FUEL };
            prop_assert_eq!(trace(&p, &s, c, &cfg).unwrap(), trace(&p, &s, c, &cfg).unwrap());
        }
    }
}

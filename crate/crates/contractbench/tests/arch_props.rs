mod common;

use contractbench::arch::{step_event, Event, DEFAULT_FUEL};
use contractbench::{arch_run, arch_step, Instr, Reg};
use proptest::prelude::*;

proptest! {
    #[test]
    fn steps_are_deterministic(p in common::program(), mem in common::memory()) {
        let mut s = common::state(&p, mem);
        while !s.is_final() {
            let a = arch_step(&p, &s).unwrap();
            prop_assert_eq!(&a, &arch_step(&p, &s).unwrap());
            s = a;
        }
    }

    #[test]
    fn frame_conditions(p in common::program(), mem in common::memory()) {
        let mut s = common::state(&p, mem);
        while !s.is_final() {
            let instr = p.at(s.pc()).cloned();
            let (next, ev) = step_event(&p, &s).unwrap();
            if !matches!(instr, Some(Instr::Store { .. })) {
                prop_assert_eq!(&next.mem, &s.mem);
            }
            let writes = match &instr {
                Some(Instr::Assign { dst, .. } | Instr::CondAssign { dst, .. } | Instr::Load { dst, .. }) => Some(*dst),
                _ => None,
            };
            for (r, _) in p.registers().iter() {
                if r != Reg::PC && Some(r) != writes {
                    prop_assert_eq!(next.regs.get(r), s.regs.get(r));
                }
            }
            if instr.is_none() {
                prop_assert_eq!(ev, Event::Terminate);
                prop_assert!(next.is_final());
            }
            s = next;
        }
    }

    #[test]
    fn forward_programs_terminate_within_their_length(p in common::program(), mem in common::memory()) {
        let (_, steps) = arch_run(&p, &common::state(&p, mem), DEFAULT_FUEL).unwrap();
        prop_assert!(steps as usize <= p.len() + 1);
    }
}

//! Seeded random generation of well-formed, terminating programs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::isa::{BinOp, Expr, Instr, Program, Reg, Registers, UnOp, Value};

const NAMES: [&str; 4] = ["a", "b", "c", "d"];

fn expr(rng: &mut impl Rng, regs: &[Reg], depth: u32) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if leaf {
        return if rng.gen_bool(0.5) { Expr::Reg(*regs.choose(rng).expect("registers")) } else { Expr::nat(rng.gen_range(0..4)) };
    }
    if rng.gen_bool(0.15) {
        let op = if rng.gen_bool(0.5) { UnOp::Not } else { UnOp::Neg };
        return Expr::un(op, expr(rng, regs, depth - 1));
    }
    let ops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Lt, BinOp::Eq, BinOp::And, BinOp::Or, BinOp::Xor];
    Expr::bin(*ops.choose(rng).expect("ops"), expr(rng, regs, depth - 1), expr(rng, regs, depth - 1))
}

/// A program of `len` instructions over registers `a`..`d`. All control
/// flow goes forward, so every run terminates within `len + 1` steps.
pub fn random_program(rng: &mut impl Rng, len: usize) -> Program {
    let mut names = Registers::new();
    let regs: Vec<Reg> = NAMES.iter().map(|n| names.intern(n)).collect();
    let mut instrs = Vec::with_capacity(len);
    for at in 0..len as u64 {
        let pick = rng.gen_range(0..100);
        let dst = *regs.choose(rng).expect("registers");
        let i = match pick {
            0..=24 => Instr::Load { dst, addr: expr(rng, &regs, 1) },
            25..=44 => Instr::Assign { dst, expr: expr(rng, &regs, 2) },
            45..=51 => Instr::CondAssign { dst, guard: expr(rng, &regs, 1), expr: expr(rng, &regs, 1) },
            52..=61 => Instr::Store { src: dst, addr: expr(rng, &regs, 1) },
            62..=83 => {
                // Never the fall-through address.
                let choices: Vec<Value> =
                    (at + 2..=len as u64).map(Value::Nat).chain(std::iter::once(Value::Bot)).collect();
                Instr::Beqz { cond: dst, target: *choices.choose(rng).expect("non-empty") }
            }
            84..=88 => Instr::Jmp { target: Expr::nat(rng.gen_range(at + 1..=len as u64)) },
            89..=94 => Instr::Barrier,
            _ => Instr::Skip,
        };
        instrs.push(i);
    }
    Program::new(instrs, names)
}

/// `count` programs of length `len` from a fixed seed.
pub fn random_programs(seed: u64, count: usize, len: usize) -> Vec<Program> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_program(&mut rng, len)).collect()
}

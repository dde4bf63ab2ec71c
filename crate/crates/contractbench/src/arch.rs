//! Architectural semantics: deterministic single steps and terminating runs.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::isa::{EvalMode, Instr, Program, Reg, Value};

/// Default step bound for runs.
pub const DEFAULT_FUEL: u64 = 1_000_000;

/// Total memory with default content 0. Zero cells are never stored, so
/// structural equality is semantic equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Memory(BTreeMap<u64, u64>);

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, addr: u64) -> u64 {
        self.0.get(&addr).copied().unwrap_or(0)
    }

    pub fn set(&mut self, addr: u64, v: u64) {
        if v == 0 {
            self.0.remove(&addr);
        } else {
            self.0.insert(addr, v);
        }
    }

    /// Non-zero cells in address order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.0.iter().map(|(a, v)| (*a, *v))
    }
}

impl FromIterator<(u64, u64)> for Memory {
    fn from_iter<I: IntoIterator<Item = (u64, u64)>>(iter: I) -> Self {
        let mut m = Memory::new();
        for (a, v) in iter {
            m.set(a, v);
        }
        m
    }
}

/// Register assignment indexed by [`Reg`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegFile(Vec<Value>);

impl RegFile {
    pub fn zeros(n: usize) -> Self {
        RegFile(vec![Value::Nat(0); n.max(1)])
    }

    pub fn undefined(n: usize) -> Self {
        RegFile(vec![Value::Bot; n.max(1)])
    }

    pub fn get(&self, r: Reg) -> Value {
        self.0.get(r.index()).copied().unwrap_or(Value::Nat(0))
    }

    pub fn set(&mut self, r: Reg, v: Value) {
        if r.index() >= self.0.len() {
            self.0.resize(r.index() + 1, Value::Nat(0));
        }
        self.0[r.index()] = v;
    }

    pub fn as_slice(&self) -> &[Value] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `σ = ⟨m, a⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArchState {
    pub mem: Memory,
    pub regs: RegFile,
}

impl ArchState {
    /// All registers (including `pc`) zero, memory empty.
    pub fn initial(p: &Program) -> Self {
        ArchState { mem: Memory::new(), regs: RegFile::zeros(p.registers().len()) }
    }

    pub fn with_memory(p: &Program, mem: Memory) -> Self {
        ArchState { mem, regs: RegFile::zeros(p.registers().len()) }
    }

    pub fn pc(&self) -> Value {
        self.regs.get(Reg::PC)
    }

    pub fn is_initial(&self) -> bool {
        self.regs.as_slice().iter().all(|v| *v == Value::Nat(0))
    }

    pub fn is_final(&self) -> bool {
        self.pc().is_bot()
    }

    /// Canonical one-line rendering used for snapshots and reports.
    pub fn blob(&self, p: &Program) -> String {
        let mut s = String::new();
        for (r, name) in p.registers().iter() {
            if !s.is_empty() {
                s.push(' ');
            }
            s.push_str(&format!("{name}={}", self.regs.get(r)));
        }
        for (a, v) in self.mem.iter() {
            s.push_str(&format!(" [{a}]={v}"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArchError {
    #[error("stuck at pc {pc}: {reason}")]
    Stuck { pc: Value, reason: String },
    #[error("fuel exhausted after {fuel} steps")]
    FuelExhausted { fuel: u64 },
}

/// What a step did, in the terms the contracts observe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Silent,
    Load { addr: u64, value: u64 },
    Store { addr: u64 },
    /// A branch or jump; carries the post-step pc.
    Control { target: Value },
    Barrier,
    Terminate,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Silent => f.write_str("silent"),
            Event::Load { addr, value } => write!(f, "load {addr}={value}"),
            Event::Store { addr } => write!(f, "store {addr}"),
            Event::Control { target } => write!(f, "pc {target}"),
            Event::Barrier => f.write_str("barrier"),
            Event::Terminate => f.write_str("terminate"),
        }
    }
}

fn eval_nat(p: &Program, e: &crate::isa::Expr, s: &ArchState) -> Result<u64, ArchError> {
    crate::isa::eval_expr(e, s.regs.as_slice(), p.modulus(), EvalMode::Total)
        .map(|v| v.as_nat().expect("total evaluation yields a natural"))
        .map_err(|err| ArchError::Stuck { pc: s.pc(), reason: err.to_string() })
}

fn read_nat(s: &ArchState, r: Reg) -> Result<u64, ArchError> {
    s.regs.get(r).as_nat().ok_or_else(|| ArchError::Stuck {
        pc: s.pc(),
        reason: "register is undefined".to_string(),
    })
}

/// One architectural step together with its event.
pub fn step_event(p: &Program, s: &ArchState) -> Result<(ArchState, Event), ArchError> {
    let pc = s.pc();
    let mut next = s.clone();
    let Some(instr) = p.at(pc) else {
        next.regs.set(Reg::PC, Value::Bot);
        return Ok((next, Event::Terminate));
    };
    let here = pc.as_nat().expect("defined pc");
    let fall = Value::Nat(here + 1);
    let event = match instr {
        Instr::Skip => {
            next.regs.set(Reg::PC, fall);
            Event::Silent
        }
        Instr::Barrier => {
            next.regs.set(Reg::PC, fall);
            Event::Barrier
        }
        Instr::Assign { dst, expr } => {
            let v = eval_nat(p, expr, s)?;
            next.regs.set(*dst, Value::Nat(v));
            next.regs.set(Reg::PC, fall);
            Event::Silent
        }
        Instr::CondAssign { dst, guard, expr } => {
            if eval_nat(p, guard, s)? == 0 {
                let v = eval_nat(p, expr, s)?;
                next.regs.set(*dst, Value::Nat(v));
            }
            next.regs.set(Reg::PC, fall);
            Event::Silent
        }
        Instr::Load { dst, addr } => {
            let n = eval_nat(p, addr, s)?;
            let v = s.mem.get(n);
            next.regs.set(*dst, Value::Nat(v));
            next.regs.set(Reg::PC, fall);
            Event::Load { addr: n, value: v }
        }
        Instr::Store { src, addr } => {
            let n = eval_nat(p, addr, s)?;
            let v = read_nat(s, *src)?;
            next.mem.set(n, v);
            next.regs.set(Reg::PC, fall);
            Event::Store { addr: n }
        }
        Instr::Beqz { cond, target } => {
            let t = if read_nat(s, *cond)? % p.modulus() == 0 { *target } else { fall };
            next.regs.set(Reg::PC, t);
            Event::Control { target: t }
        }
        Instr::Jmp { target } => {
            let t = Value::Nat(eval_nat(p, target, s)?);
            next.regs.set(Reg::PC, t);
            Event::Control { target: t }
        }
    };
    Ok((next, event))
}

/// `σ → σ′`.
pub fn arch_step(p: &Program, s: &ArchState) -> Result<ArchState, ArchError> {
    step_event(p, s).map(|(n, _)| n)
}

/// Steps until the state is final; returns it with the number of steps taken.
pub fn arch_run(p: &Program, s0: &ArchState, fuel: u64) -> Result<(ArchState, u64), ArchError> {
    let mut s = s0.clone();
    let mut steps = 0;
    while !s.is_final() {
        if steps >= fuel {
            return Err(ArchError::FuelExhausted { fuel });
        }
        s = arch_step(p, &s)?;
        steps += 1;
    }
    Ok((s, steps))
}

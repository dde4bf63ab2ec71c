//! Leakage contracts: labelled ISA semantics whose traces say what the
//! hardware may reveal.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::arch::{step_event, ArchError, ArchState, Event, DEFAULT_FUEL};
use crate::isa::{Instr, Program, Reg, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Observation {
    Load(u64),
    Store(u64),
    Pc(Value),
    LoadVal(u64, u64),
    State(String),
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Load(n) => write!(f, "load {n}"),
            Observation::Store(n) => write!(f, "store {n}"),
            Observation::Pc(l) => write!(f, "pc {l}"),
            Observation::LoadVal(n, v) => write!(f, "loadv {n} {v}"),
            Observation::State(s) => write!(f, "state {s}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ContractTrace(pub Vec<Observation>);

impl ContractTrace {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn lines(&self) -> Vec<String> {
        self.0.iter().map(|o| o.to_string()).collect()
    }
}

/// Which data an observer sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Observer {
    /// Load/store addresses and control flow.
    Ct,
    /// Like `Ct`, but only control flow while speculating.
    PcCt,
    /// Like `Ct`, plus loaded values.
    Arch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ContractId {
    Top,
    SeqCt,
    SeqArch,
    SpecCt,
    SpecPcCt,
    SpecArch,
    BotInf,
}

impl ContractId {
    pub const ALL: [ContractId; 7] = [
        ContractId::Top,
        ContractId::SeqCt,
        ContractId::SeqArch,
        ContractId::SpecCt,
        ContractId::SpecPcCt,
        ContractId::SpecArch,
        ContractId::BotInf,
    ];

    /// Edges `(c1, c2)` of the lattice: `c1 ⊒ c2`, i.e. equal `c2` traces
    /// imply equal `c1` traces.
    pub const LATTICE: [(ContractId, ContractId); 7] = [
        (ContractId::Top, ContractId::SeqCt),
        (ContractId::SeqCt, ContractId::SeqArch),
        (ContractId::SeqCt, ContractId::SpecPcCt),
        (ContractId::SeqArch, ContractId::SpecArch),
        (ContractId::SpecPcCt, ContractId::SpecCt),
        (ContractId::SpecCt, ContractId::SpecArch),
        (ContractId::SpecArch, ContractId::BotInf),
    ];

    pub fn name(self) -> &'static str {
        match self {
            ContractId::Top => "top",
            ContractId::SeqCt => "seq-ct",
            ContractId::SeqArch => "seq-arch",
            ContractId::SpecCt => "spec-ct",
            ContractId::SpecPcCt => "spec-pc-ct",
            ContractId::SpecArch => "spec-arch",
            ContractId::BotInf => "bot",
        }
    }

    pub fn is_speculative(self) -> bool {
        matches!(self, ContractId::SpecCt | ContractId::SpecPcCt | ContractId::SpecArch)
    }

    /// `self ⊒ other` in the reflexive-transitive closure of the lattice.
    pub fn at_least(self, other: ContractId) -> bool {
        if self == other {
            return true;
        }
        ContractId::LATTICE
            .iter()
            .any(|&(hi, lo)| hi == self && lo.at_least(other))
    }
}

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown contract `{0}` (expected top, seq-ct, seq-arch, spec-ct, spec-pc-ct, spec-arch or bot)")]
pub struct UnknownContract(pub String);

impl FromStr for ContractId {
    type Err = UnknownContract;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "top" => ContractId::Top,
            "seq-ct" | "ct-seq" => ContractId::SeqCt,
            "seq-arch" | "arch-seq" => ContractId::SeqArch,
            "spec-ct" | "ct-spec" => ContractId::SpecCt,
            "spec-pc-ct" | "ct-pc-spec" => ContractId::SpecPcCt,
            "spec-arch" | "arch-spec" => ContractId::SpecArch,
            "bot" | "bot-inf" | "bot-∞" => ContractId::BotInf,
            _ => return Err(UnknownContract(s.to_string())),
        })
    }
}

/// Parameters shared by all contract runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ContractConfig {
    pub window: u64,
    pub fuel: u64,
}

impl Default for ContractConfig {
    fn default() -> Self {
        ContractConfig { window: 6, fuel: DEFAULT_FUEL }
    }
}

/// Remaining speculation budget of a stack frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Window {
    Fin(u64),
    Inf,
}

impl Window {
    fn dec(self) -> Window {
        match self {
            Window::Fin(n) => Window::Fin(n.saturating_sub(1)),
            Window::Inf => Window::Inf,
        }
    }
}

fn observe(event: &Event, observer: Observer, speculating: bool) -> Option<Observation> {
    match (event, observer) {
        (Event::Load { .. } | Event::Store { .. }, Observer::PcCt) if speculating => None,
        (Event::Load { addr, value }, Observer::Arch) => Some(Observation::LoadVal(*addr, *value)),
        (Event::Load { addr, .. }, _) => Some(Observation::Load(*addr)),
        (Event::Store { addr }, _) => Some(Observation::Store(*addr)),
        (Event::Control { target }, _) => Some(Observation::Pc(*target)),
        _ => None,
    }
}

/// Sequential contract trace under the `Ct` or `Arch` observer.
pub fn trace_seq(p: &Program, s0: &ArchState, observer: Observer, fuel: u64) -> Result<ContractTrace, ArchError> {
    let mut s = s0.clone();
    let mut obs = Vec::new();
    let mut steps = 0;
    while !s.is_final() {
        if steps >= fuel {
            return Err(ArchError::FuelExhausted { fuel });
        }
        let (next, ev) = step_event(p, &s)?;
        obs.extend(observe(&ev, observer, false));
        s = next;
        steps += 1;
    }
    Ok(ContractTrace(obs))
}

/// Configuration of the always-mispredict semantics: a stack of states with
/// their remaining windows. The last element is the top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecConfig {
    pub stack: Vec<(ArchState, Window)>,
}

impl SpecConfig {
    pub fn new(s0: ArchState) -> Self {
        SpecConfig { stack: vec![(s0, Window::Inf)] }
    }

    pub fn top(&self) -> &(ArchState, Window) {
        self.stack.last().expect("non-empty stack")
    }

    pub fn is_final(&self) -> bool {
        self.stack.len() == 1 && self.top().0.is_final()
    }
}

/// What a speculative step did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecRule {
    Step,
    Barrier,
    Branch { correct: Value, mispredicted: Value },
    Rollback,
}

/// One step of the always-mispredict semantics.
pub fn spec_step(
    p: &Program,
    cfg: &mut SpecConfig,
    observer: Observer,
    w: u64,
) -> Result<(SpecRule, Option<Observation>), ArchError> {
    let (s, win) = cfg.top().clone();
    if win == Window::Fin(0) {
        cfg.stack.pop();
        let resumed = cfg.top().0.pc();
        return Ok((SpecRule::Rollback, Some(Observation::Pc(resumed))));
    }
    let rest = win.dec();
    let top = cfg.stack.len() - 1;
    match p.at(s.pc()) {
        Some(Instr::Beqz { cond, target }) => {
            let here = s.pc().as_nat().expect("defined pc");
            let fall = Value::Nat(here + 1);
            let zero = s.regs.get(*cond).as_nat().map(|v| v % p.modulus() == 0).ok_or_else(|| {
                ArchError::Stuck { pc: s.pc(), reason: "branch on undefined register".into() }
            })?;
            let (correct, mispredicted) = if zero { (*target, fall) } else { (fall, *target) };
            let mis_win = match rest {
                Window::Inf => Window::Fin(w),
                fin => fin,
            };
            let mut good = s.clone();
            good.regs.set(Reg::PC, correct);
            let mut bad = s;
            bad.regs.set(Reg::PC, mispredicted);
            cfg.stack[top] = (good, rest);
            cfg.stack.push((bad, mis_win));
            Ok((SpecRule::Branch { correct, mispredicted }, Some(Observation::Pc(mispredicted))))
        }
        Some(Instr::Barrier) => {
            let (next, _) = step_event(p, &s)?;
            let win = match win {
                Window::Inf => Window::Inf,
                Window::Fin(_) => Window::Fin(0),
            };
            cfg.stack[top] = (next, win);
            Ok((SpecRule::Barrier, None))
        }
        _ => {
            let (next, ev) = step_event(p, &s)?;
            let obs = observe(&ev, observer, win != Window::Inf);
            cfg.stack[top] = (next, rest);
            Ok((SpecRule::Step, obs))
        }
    }
}

/// Speculative contract trace with window `w`.
pub fn trace_spec(
    p: &Program,
    s0: &ArchState,
    observer: Observer,
    w: u64,
    fuel: u64,
) -> Result<ContractTrace, ArchError> {
    let mut cfg = SpecConfig::new(s0.clone());
    let mut obs = Vec::new();
    let mut steps = 0;
    while !cfg.is_final() {
        if steps >= fuel {
            return Err(ArchError::FuelExhausted { fuel });
        }
        let (_, o) = spec_step(p, &mut cfg, observer, w)?;
        obs.extend(o);
        steps += 1;
    }
    Ok(ContractTrace(obs))
}

/// `top` (nothing observed) or `bot` (one full state snapshot per step).
pub fn trace_degenerate(p: &Program, s0: &ArchState, id: ContractId, fuel: u64) -> Result<ContractTrace, ArchError> {
    match id {
        ContractId::Top => Ok(ContractTrace::default()),
        ContractId::BotInf => {
            let mut s = s0.clone();
            let mut obs = Vec::new();
            let mut steps = 0;
            while !s.is_final() {
                if steps >= fuel {
                    return Err(ArchError::FuelExhausted { fuel });
                }
                obs.push(Observation::State(s.blob(p)));
                s = step_event(p, &s)?.0;
                steps += 1;
            }
            Ok(ContractTrace(obs))
        }
        other => panic!("{other} is not a degenerate contract"),
    }
}

pub fn trace(p: &Program, s0: &ArchState, id: ContractId, cfg: &ContractConfig) -> Result<ContractTrace, ArchError> {
    match id {
        ContractId::Top | ContractId::BotInf => trace_degenerate(p, s0, id, cfg.fuel),
        ContractId::SeqCt => trace_seq(p, s0, Observer::Ct, cfg.fuel),
        ContractId::SeqArch => trace_seq(p, s0, Observer::Arch, cfg.fuel),
        ContractId::SpecCt => trace_spec(p, s0, Observer::Ct, cfg.window, cfg.fuel),
        ContractId::SpecPcCt => trace_spec(p, s0, Observer::PcCt, cfg.window, cfg.fuel),
        ContractId::SpecArch => trace_spec(p, s0, Observer::Arch, cfg.window, cfg.fuel),
    }
}

pub use crate::analysis::contract_stronger_test;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::parse_program;

    #[test]
    fn lattice_closure() {
        assert!(ContractId::Top.at_least(ContractId::BotInf));
        assert!(ContractId::SeqCt.at_least(ContractId::SpecArch));
        assert!(ContractId::SeqCt.at_least(ContractId::SeqArch));
        assert!(!ContractId::SpecCt.at_least(ContractId::SeqCt));
        assert!(!ContractId::SpecPcCt.at_least(ContractId::SeqArch));
        assert!(!ContractId::SeqArch.at_least(ContractId::SpecCt));
    }

    #[test]
    fn names_round_trip() {
        for c in ContractId::ALL {
            assert_eq!(c.name().parse::<ContractId>().unwrap(), c);
        }
    }

    #[test]
    fn skip_has_empty_trace() {
        let p = parse_program("skip").unwrap();
        let s = ArchState::initial(&p);
        assert!(trace_seq(&p, &s, Observer::Ct, 10).unwrap().is_empty());
        assert!(trace_degenerate(&p, &s, ContractId::Top, 10).unwrap().is_empty());
        assert_eq!(trace_degenerate(&p, &s, ContractId::BotInf, 10).unwrap().len(), 2);
    }

    #[test]
    fn jump_observes_post_step_pc() {
        let p = parse_program("jmp 2\nskip\nskip").unwrap();
        let t = trace_seq(&p, &ArchState::initial(&p), Observer::Ct, 10).unwrap();
        assert_eq!(t.0, vec![Observation::Pc(Value::Nat(2))]);
    }

    #[test]
    fn barrier_cuts_speculation() {
        let p = parse_program("beqz x, 3\nspbarr\nload y, 9\nskip").unwrap();
        let t = trace_spec(&p, &ArchState::initial(&p), Observer::Ct, 10, 100).unwrap();
        assert_eq!(t.0, vec![Observation::Pc(Value::Nat(1)), Observation::Pc(Value::Nat(3))]);
    }

    #[test]
    fn window_limits_speculative_steps() {
        let p = parse_program("beqz x, end\nload a, 1\nload b, 2\nload c, 3").unwrap();
        let t = trace_spec(&p, &ArchState::initial(&p), Observer::Ct, 2, 100).unwrap();
        assert_eq!(
            t.0,
            vec![
                Observation::Pc(Value::Nat(1)),
                Observation::Load(1),
                Observation::Load(2),
                Observation::Pc(Value::Bot),
            ]
        );
    }
}

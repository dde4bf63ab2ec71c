//! The speculative out-of-order processor: fetch, execute and retire stages
//! over a reorder buffer, driven by a scheduler and optionally wrapped by a
//! countermeasure.

use std::fmt;

use thiserror::Error;

use crate::arch::{ArchState, DEFAULT_FUEL};
use crate::countermeasures::{loaddelay_guard, relabel, Countermeasure, Entry, Guard, Label};
use crate::isa::{eval_expr, EvalMode, Expr, Instr, Program, Reg, Value};
use crate::uarch::{
    apply_buffer, branch_target, buf_project, Access, BufProjection, CacheKind, CacheState, Command,
    Directive, Op, PredictorKind, PredictorState, SchedulerKind, SchedulerState,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HwConfig {
    /// Reorder-buffer capacity `μw`.
    pub buffer_size: usize,
    pub cache: CacheKind,
    pub predictor: PredictorKind,
    pub scheduler: SchedulerKind,
    pub countermeasure: Countermeasure,
    pub fuel: u64,
    /// Mask unlabelled instead of labelled assignments.
    pub mask_literal: bool,
    /// Include taint labels in the adversary view.
    pub expose_labels: bool,
}

impl Default for HwConfig {
    fn default() -> Self {
        HwConfig {
            buffer_size: 4,
            cache: CacheKind::Lru { capacity: 8 },
            predictor: PredictorKind::Fallthrough,
            scheduler: SchedulerKind::Ooo,
            countermeasure: Countermeasure::None,
            fuel: DEFAULT_FUEL,
            mask_literal: false,
            expose_labels: true,
        }
    }
}

impl HwConfig {
    pub fn with_countermeasure(mut self, cm: Countermeasure) -> Self {
        self.countermeasure = cm;
        self
    }

    /// The `seq` countermeasure forces the sequential scheduler.
    pub fn effective_scheduler(&self) -> SchedulerKind {
        if self.countermeasure == Countermeasure::Seq {
            SchedulerKind::Seq
        } else {
            self.scheduler
        }
    }

    /// Consecutive no-progress steps after which a run is declared deadlocked.
    pub fn deadlock_bound(&self) -> u64 {
        4 * (self.buffer_size as u64 + 3)
    }
}

/// Why a stage could not fire.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct Stuck(pub String);

fn stuck<T>(msg: &str) -> Result<T, Stuck> {
    Err(Stuck(msg.to_string()))
}

/// The unlabelled machine the three stages operate on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Machine {
    pub arch: ArchState,
    pub buf: Vec<Command>,
    pub cs: CacheState,
    pub bp: PredictorState,
}

fn eval(p: &Program, e: &Expr, regs: &crate::arch::RegFile) -> Value {
    eval_expr(e, regs.as_slice(), p.modulus(), EvalMode::Partial).unwrap_or(Value::Bot)
}

/// The buffer form of a non-control instruction.
fn decode(i: &Instr) -> Op {
    match i {
        Instr::Skip => Op::Skip,
        Instr::Barrier => Op::Barrier,
        Instr::Assign { dst, expr } => Op::Assign { dst: *dst, expr: expr.clone(), marked: false },
        Instr::CondAssign { dst, guard, expr } => Op::Assign {
            dst: *dst,
            expr: Expr::ite(guard.clone(), Expr::Reg(*dst), expr.clone()),
            marked: false,
        },
        Instr::Load { dst, addr } => Op::Load { dst: *dst, addr: addr.clone() },
        Instr::Store { src, addr } => Op::Store { src: Expr::Reg(*src), addr: addr.clone() },
        Instr::Jmp { .. } | Instr::Beqz { .. } => unreachable!("control flow is fetched separately"),
    }
}

pub fn fetch_step(p: &Program, m: &mut Machine, width: usize) -> Result<(), Stuck> {
    if m.buf.len() >= width {
        return stuck("buffer full");
    }
    let view = apply_buffer(&m.buf, &m.arch.regs);
    let Value::Nat(at) = view.get(Reg::PC) else {
        return stuck("fetch address unknown");
    };
    let instr = p.at(Value::Nat(at));
    if m.cs.access(at) == Access::Miss {
        m.cs.update(at);
        return Ok(());
    }
    let pc_assign = |expr: Expr, marked: bool| Op::Assign { dst: Reg::PC, expr, marked };
    match instr {
        None => m.buf.push(Command::new(pc_assign(Expr::Const(Value::Bot), true))),
        Some(Instr::Beqz { target, .. }) => {
            let guess = m.bp.predict(at, *target);
            m.buf.push(Command::tagged(pc_assign(Expr::Const(guess), false), at));
        }
        Some(Instr::Jmp { target }) => m.buf.push(Command::new(pc_assign(target.clone(), false))),
        Some(other) => {
            if m.buf.len() + 2 > width {
                return stuck("no room for instruction and pc update");
            }
            m.buf.push(Command::new(decode(other)));
            m.buf.push(Command::new(pc_assign(Expr::nat(at + 1), true)));
        }
    }
    m.cs.update(at);
    Ok(())
}

pub fn execute_step(p: &Program, m: &mut Machine, i: usize) -> Result<(), Stuck> {
    if i == 0 || i > m.buf.len() {
        return stuck("no such entry");
    }
    let k = i - 1;
    let prefix = &m.buf[..k];
    let fenced = prefix.iter().any(|c| c.op == Op::Barrier);
    let view = || apply_buffer(prefix, &m.arch.regs);
    let entry = m.buf[k].clone();
    match &entry.op {
        Op::Skip | Op::Barrier => Ok(()),
        Op::Load { dst, addr } => {
            if fenced {
                return stuck("load behind a barrier");
            }
            if prefix.iter().any(|c| matches!(c.op, Op::Store { .. })) {
                return stuck("load behind a store");
            }
            let Value::Nat(n) = eval(p, addr, &view()) else {
                return stuck("load address unresolved");
            };
            let hit = m.cs.access(n) == Access::Hit;
            m.cs.update(n);
            if hit {
                let v = Value::Nat(m.arch.mem.get(n));
                m.buf[k] = Command { op: Op::Assign { dst: *dst, expr: Expr::Const(v), marked: false }, tag: entry.tag };
            }
            Ok(())
        }
        Op::Assign { dst, expr, marked } => {
            if fenced {
                return stuck("assignment behind a barrier");
            }
            match entry.tag {
                Some(at) if *dst == Reg::PC => {
                    let Some((cond, target)) = branch_target(p, at) else {
                        return stuck("tag does not name a branch");
                    };
                    let Value::Nat(g) = view().get(cond) else {
                        return stuck("branch condition unresolved");
                    };
                    let Some(guess) = expr.literal() else {
                        return stuck("prediction is not a literal");
                    };
                    let actual = if g % p.modulus() == 0 { target } else { Value::Nat(at + 1) };
                    m.bp.update(at, actual);
                    if guess == actual {
                        m.buf[k].tag = None;
                    } else {
                        m.buf[k] = Command::new(Op::Assign { dst: Reg::PC, expr: Expr::Const(actual), marked: false });
                        m.buf.truncate(i);
                    }
                    Ok(())
                }
                Some(_) => stuck("tagged entry is not a branch"),
                None => {
                    let v = eval(p, expr, &view());
                    if v.is_bot() {
                        return stuck("operands unresolved");
                    }
                    m.buf[k] = Command::new(Op::Assign { dst: *dst, expr: Expr::Const(v), marked: *marked });
                    Ok(())
                }
            }
        }
        Op::Store { src, addr } => {
            if fenced {
                return stuck("store behind a barrier");
            }
            let a = view();
            let (v, n) = (eval(p, src, &a), eval(p, addr, &a));
            if v.is_bot() || n.is_bot() {
                return stuck("store operands unresolved");
            }
            m.buf[k] = Command { op: Op::Store { src: Expr::Const(v), addr: Expr::Const(n) }, tag: entry.tag };
            Ok(())
        }
    }
}

pub fn retire_step(m: &mut Machine) -> Result<(), Stuck> {
    let Some(head) = m.buf.first() else {
        return stuck("buffer empty");
    };
    if head.tag.is_some() {
        return stuck("head is speculative");
    }
    match &head.op {
        Op::Skip | Op::Barrier => {}
        Op::Assign { dst, expr, .. } => {
            let Some(v) = expr.literal() else {
                return stuck("head unresolved");
            };
            m.arch.regs.set(*dst, v);
        }
        Op::Load { .. } => return stuck("head is a pending load"),
        Op::Store { src, addr } => match (src.literal(), addr.literal()) {
            (Some(Value::Nat(v)), Some(Value::Nat(n))) => {
                m.arch.mem.set(n, v);
                m.cs.update(n);
            }
            _ => return stuck("head unresolved"),
        },
    }
    m.buf.remove(0);
    Ok(())
}

/// Runs the stage selected by `d`.
pub fn stage(p: &Program, m: &mut Machine, width: usize, d: Directive) -> Result<(), Stuck> {
    match d {
        Directive::Fetch => fetch_step(p, m, width),
        Directive::Execute(i) => execute_step(p, m, i),
        Directive::Retire => retire_step(m),
    }
}

/// `⟨σ, buf, cs, bp, sc⟩` with a labelled buffer (labels stay empty unless a
/// taint-tracking countermeasure is active).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HwState {
    pub arch: ArchState,
    pub buf: Vec<Entry>,
    pub cs: CacheState,
    pub bp: PredictorState,
    pub sc: SchedulerState,
}

impl HwState {
    pub fn initial(s0: &ArchState, cfg: &HwConfig) -> Self {
        HwState {
            arch: s0.clone(),
            buf: Vec::new(),
            cs: CacheState::new(cfg.cache),
            bp: PredictorState::new(cfg.predictor),
            sc: SchedulerState::new(cfg.effective_scheduler(), cfg.buffer_size),
        }
    }

    pub fn is_final(&self) -> bool {
        self.buf.is_empty() && self.arch.pc().is_bot()
    }

    pub fn commands(&self) -> Vec<Command> {
        self.buf.iter().map(|e| e.cmd.clone()).collect()
    }

    pub fn projection(&self) -> BufProjection {
        buf_project(self.buf.iter().map(|e| &e.cmd))
    }

    fn machine(&self, buf: Vec<Command>) -> Machine {
        Machine { arch: self.arch.clone(), buf, cs: self.cs.clone(), bp: self.bp.clone() }
    }

    /// Everything but the scheduler: used to detect a lack of progress.
    fn progress_key(&self) -> (&ArchState, &[Entry], &CacheState, &PredictorState) {
        (&self.arch, &self.buf, &self.cs, &self.bp)
    }
}

/// What the adversary sees after each step.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HwObservation {
    pub proj: BufProjection,
    pub labels: Option<Vec<Label>>,
    pub cs: CacheState,
    pub bp: PredictorState,
    pub sc: SchedulerState,
}

impl fmt::Display for HwObservation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "buf={}", self.proj)?;
        if let Some(ls) = &self.labels {
            let v: Vec<String> = ls
                .iter()
                .map(|l| format!("{{{}}}", l.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(",")))
                .collect();
            write!(f, " labels=[{}]", v.join(" "))?;
        }
        write!(f, " cs={} bp={} sc={}", self.cs, self.bp, self.sc)
    }
}

pub fn adversary_view(h: &HwState, cfg: &HwConfig) -> HwObservation {
    let labels = (cfg.expose_labels && cfg.countermeasure.labeling().is_some())
        .then(|| h.buf.iter().map(|e| e.label.clone()).collect());
    HwObservation { proj: h.projection(), labels, cs: h.cs.clone(), bp: h.bp.clone(), sc: h.sc.clone() }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HwError {
    #[error("deadlock after {step} steps at `{directive}`: {reason}")]
    Deadlock { step: u64, directive: Directive, reason: String },
    #[error("fuel exhausted after {fuel} steps")]
    FuelExhausted { fuel: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepResult {
    pub state: HwState,
    pub directive: Directive,
    /// `Some` when no stage fired and the step only advanced the scheduler.
    pub stalled: Option<String>,
}

/// One processor step `h ⇒ h′`, including the countermeasure wrapper and the
/// scheduler update.
pub fn hw_step(p: &Program, h: &HwState, cfg: &HwConfig) -> StepResult {
    let d = h.sc.next();
    let width = cfg.buffer_size;
    let fired: Result<(Machine, Vec<Entry>), Stuck> = match cfg.countermeasure.labeling() {
        None => {
            let cmds = h.commands();
            if cfg.countermeasure == Countermeasure::LoadDelay && loaddelay_guard(&cmds, d) == Guard::Delayed {
                Err(Stuck("load delayed behind unresolved branch".into()))
            } else {
                let mut m = h.machine(cmds);
                stage(p, &mut m, width, d).map(|()| {
                    let buf = m.buf.iter().cloned().map(Entry::unlabeled).collect();
                    (m, buf)
                })
            }
        }
        Some(kind) => {
            let ul = kind.unlabel(&h.buf, d, cfg.mask_literal);
            let mut m = h.machine(ul);
            stage(p, &mut m, width, d).map(|()| {
                let buf = relabel(kind, m.buf.clone(), &h.buf, d);
                (m, buf)
            })
        }
    };
    let mut next = h.clone();
    let stalled = match fired {
        Ok((m, buf)) => {
            next.arch = m.arch;
            next.cs = m.cs;
            next.bp = m.bp;
            next.buf = buf;
            None
        }
        Err(Stuck(reason)) => Some(reason),
    };
    let proj = next.projection();
    next.sc.update(proj);
    StepResult { state: next, directive: d, stalled }
}

/// A complete hardware run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HwRun {
    /// Adversary views, starting with the initial state.
    pub trace: Vec<HwObservation>,
    pub directives: Vec<Directive>,
    pub final_state: HwState,
}

impl HwRun {
    pub fn steps(&self) -> usize {
        self.directives.len()
    }

    pub fn lines(&self) -> Vec<String> {
        self.trace.iter().map(|o| o.to_string()).collect()
    }
}

/// Runs from `s0` until the state is final.
pub fn hw_run(p: &Program, s0: &ArchState, cfg: &HwConfig) -> Result<HwRun, HwError> {
    let mut h = HwState::initial(s0, cfg);
    let mut trace = vec![adversary_view(&h, cfg)];
    let mut directives = Vec::new();
    let bound = cfg.deadlock_bound();
    let mut quiet = 0u64;
    let mut steps = 0u64;
    while !h.is_final() {
        if steps >= cfg.fuel {
            return Err(HwError::FuelExhausted { fuel: cfg.fuel });
        }
        let r = hw_step(p, &h, cfg);
        steps += 1;
        if let Some(reason) = &r.stalled {
            if cfg.effective_scheduler() == SchedulerKind::Seq {
                return Err(HwError::Deadlock { step: steps, directive: r.directive, reason: reason.clone() });
            }
        }
        if r.state.progress_key() == h.progress_key() {
            quiet += 1;
            if quiet >= bound {
                let reason = r.stalled.clone().unwrap_or_else(|| "no progress".into());
                return Err(HwError::Deadlock { step: steps, directive: r.directive, reason });
            }
        } else {
            quiet = 0;
        }
        directives.push(r.directive);
        h = r.state;
        trace.push(adversary_view(&h, cfg));
    }
    Ok(HwRun { trace, directives, final_state: h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{arch_run, Memory};
    use crate::isa::parse_program;

    fn machine(p: &Program) -> Machine {
        Machine {
            arch: ArchState::initial(p),
            buf: Vec::new(),
            cs: CacheState::new(CacheKind::Lru { capacity: 8 }),
            bp: PredictorState::new(PredictorKind::Fallthrough),
        }
    }

    #[test]
    fn fetch_misses_then_hits() {
        let p = parse_program("x <- 1").unwrap();
        let mut m = machine(&p);
        fetch_step(&p, &mut m, 4).unwrap();
        assert!(m.buf.is_empty());
        fetch_step(&p, &mut m, 4).unwrap();
        assert_eq!(m.buf.len(), 2);
        assert_eq!(m.buf[1].op, Op::Assign { dst: Reg::PC, expr: Expr::nat(1), marked: true });
    }

    #[test]
    fn fetch_needs_two_slots_for_plain_instructions() {
        let p = parse_program("x <- 1").unwrap();
        let mut m = machine(&p);
        m.cs.update(0);
        assert!(fetch_step(&p, &mut m, 1).is_err());
        assert!(m.buf.is_empty());
    }

    #[test]
    fn mispredicted_branch_rolls_back() {
        let p = parse_program("beqz x, 3\nskip\nskip\nskip").unwrap();
        let mut m = machine(&p);
        m.cs.update(0);
        m.cs.update(1);
        fetch_step(&p, &mut m, 8).unwrap();
        assert_eq!(m.buf[0].tag, Some(0));
        fetch_step(&p, &mut m, 8).unwrap();
        assert_eq!(m.buf.len(), 3);
        execute_step(&p, &mut m, 1).unwrap();
        assert_eq!(m.buf, vec![Command::new(Op::Assign { dst: Reg::PC, expr: Expr::nat(3), marked: false })]);
    }

    #[test]
    fn load_waits_for_earlier_store() {
        let p = parse_program("store x, 5\nload y, 6").unwrap();
        let mut m = machine(&p);
        m.buf = vec![
            Command::new(Op::Store { src: Expr::Reg(p.reg("x").unwrap()), addr: Expr::nat(5) }),
            Command::new(Op::Load { dst: p.reg("y").unwrap(), addr: Expr::nat(6) }),
        ];
        assert!(execute_step(&p, &mut m, 2).is_err());
        execute_step(&p, &mut m, 1).unwrap();
        assert!(execute_step(&p, &mut m, 2).is_err());
    }

    #[test]
    fn retire_commits_store() {
        let p = parse_program("skip").unwrap();
        let mut m = machine(&p);
        m.buf = vec![Command::new(Op::Store { src: Expr::nat(7), addr: Expr::nat(2) })];
        retire_step(&mut m).unwrap();
        assert_eq!(m.arch.mem.get(2), 7);
        assert_eq!(m.cs.access(2), Access::Hit);
    }

    #[test]
    fn runs_agree_with_architectural_semantics() {
        let p = parse_program("load y, 0\nx <- y < 2\nbeqz x, end\nload z, 4 + y\nstore z, 9").unwrap();
        let s0 = ArchState::with_memory(&p, [(0, 1), (5, 42)].into_iter().collect::<Memory>());
        let (want, _) = arch_run(&p, &s0, 100).unwrap();
        for sched in [SchedulerKind::Seq, SchedulerKind::Ooo] {
            for cm in Countermeasure::ALL {
                let cfg = HwConfig { scheduler: sched, countermeasure: cm, ..HwConfig::default() };
                let run = hw_run(&p, &s0, &cfg).unwrap();
                assert_eq!(run.final_state.arch, want, "{sched} {cm}");
                assert_eq!(run.trace.len(), run.steps() + 1);
            }
        }
    }
}

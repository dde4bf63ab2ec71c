//! Microarchitectural components: reorder-buffer commands and their
//! projection, caches, branch predictors and schedulers.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::arch::RegFile;
use crate::isa::{Expr, Program, Reg, Registers, Value};

/// The instruction part of a reorder-buffer entry, possibly partially
/// resolved (expressions replaced by literals).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Skip,
    Barrier,
    /// `marked` distinguishes the fall-through update `pc ←′ ℓ+1`.
    Assign { dst: Reg, expr: Expr, marked: bool },
    Load { dst: Reg, addr: Expr },
    /// `src` is a register before execution and a literal afterwards.
    Store { src: Expr, addr: Expr },
}

/// `⟨i⟩_T`: a buffer entry with its tag (the address of the predicted branch).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Command {
    pub op: Op,
    pub tag: Option<u64>,
}

impl Command {
    pub fn new(op: Op) -> Self {
        Command { op, tag: None }
    }

    pub fn tagged(op: Op, at: u64) -> Self {
        Command { op, tag: Some(at) }
    }

    /// A tagged pc assignment: an unresolved branch prediction.
    pub fn is_pending_branch(&self) -> bool {
        self.tag.is_some() && matches!(self.op, Op::Assign { dst: Reg::PC, .. })
    }

    pub fn is_load(&self) -> bool {
        matches!(self.op, Op::Load { .. })
    }

    pub fn display<'a>(&'a self, regs: &'a Registers) -> impl fmt::Display + 'a {
        CommandDisplay { c: self, regs }
    }
}

struct CommandDisplay<'a> {
    c: &'a Command,
    regs: &'a Registers,
}

impl fmt::Display for CommandDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let regs = self.regs;
        f.write_str("<")?;
        match &self.c.op {
            Op::Skip => f.write_str("skip")?,
            Op::Barrier => f.write_str("spbarr")?,
            Op::Assign { dst, expr, marked } => {
                let arrow = if *marked { "<-'" } else { "<-" };
                write!(f, "{} {arrow} {}", regs.name(*dst), expr.display(regs))?
            }
            Op::Load { dst, addr } => write!(f, "load {}, {}", regs.name(*dst), addr.display(regs))?,
            Op::Store { src, addr } => write!(f, "store {}, {}", src.display(regs), addr.display(regs))?,
        }
        f.write_str(">")?;
        if let Some(t) = self.c.tag {
            write!(f, "@{t}")?;
        }
        Ok(())
    }
}

/// Resolved or unresolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Res {
    R,
    UR,
}

impl Res {
    fn of(e: &Expr) -> Res {
        if e.is_resolved() {
            Res::R
        } else {
            Res::UR
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProjOp {
    Skip,
    Barrier,
    Assign { dst: Reg, rhs: Res, marked: bool },
    Load { dst: Reg, addr: Res },
    Store { src: Res, addr: Res },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjEntry {
    pub op: ProjOp,
    pub tag: Option<u64>,
}

impl ProjEntry {
    /// The sequential scheduler's `exec` predicate.
    pub fn exec(&self) -> bool {
        match self.op {
            ProjOp::Skip | ProjOp::Barrier => false,
            ProjOp::Assign { rhs, .. } => rhs == Res::UR || self.tag.is_some(),
            ProjOp::Load { .. } => true,
            ProjOp::Store { src, addr } => src == Res::UR || addr == Res::UR,
        }
    }

    /// Resolved and untagged, so a retire would succeed.
    pub fn retirable(&self) -> bool {
        self.tag.is_none()
            && match self.op {
                ProjOp::Skip | ProjOp::Barrier => true,
                ProjOp::Assign { rhs, .. } => rhs == Res::R,
                ProjOp::Load { .. } => false,
                ProjOp::Store { src, addr } => src == Res::R && addr == Res::R,
            }
    }
}

impl fmt::Display for ProjEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.op {
            ProjOp::Skip => f.write_str("skip")?,
            ProjOp::Barrier => f.write_str("spbarr")?,
            ProjOp::Assign { dst, rhs, marked } => {
                write!(f, "r{}{}{:?}", dst.0, if *marked { "<-'" } else { "<-" }, rhs)?
            }
            ProjOp::Load { dst, addr } => write!(f, "load(r{},{:?})", dst.0, addr)?,
            ProjOp::Store { src, addr } => write!(f, "store({:?},{:?})", src, addr)?,
        }
        if let Some(t) = self.tag {
            write!(f, "@{t}")?;
        }
        Ok(())
    }
}

/// The data-independent view of a reorder buffer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BufProjection(pub Vec<ProjEntry>);

impl BufProjection {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for BufProjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("]")
    }
}

pub fn project_command(c: &Command) -> ProjEntry {
    let op = match &c.op {
        Op::Skip => ProjOp::Skip,
        Op::Barrier => ProjOp::Barrier,
        Op::Assign { dst, expr, marked } => ProjOp::Assign { dst: *dst, rhs: Res::of(expr), marked: *marked },
        Op::Load { dst, addr } => ProjOp::Load { dst: *dst, addr: Res::of(addr) },
        Op::Store { src, addr } => ProjOp::Store { src: Res::of(src), addr: Res::of(addr) },
    };
    ProjEntry { op, tag: c.tag }
}

pub fn buf_project<'a>(buf: impl IntoIterator<Item = &'a Command>) -> BufProjection {
    BufProjection(buf.into_iter().map(project_command).collect())
}

/// `apply(buf, a)`: the register view after the in-flight commands.
pub fn apply_buffer<'a>(buf: impl IntoIterator<Item = &'a Command>, a: &RegFile) -> RegFile {
    let mut out = a.clone();
    for c in buf {
        match &c.op {
            Op::Assign { dst, expr, .. } => out.set(*dst, expr.literal().unwrap_or(Value::Bot)),
            Op::Load { dst, .. } => out.set(*dst, Value::Bot),
            Op::Barrier => return RegFile::undefined(a.len()),
            Op::Store { .. } | Op::Skip => {}
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Access {
    Hit,
    Miss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CacheKind {
    Lru { capacity: usize },
    Direct { sets: u64, line: u64 },
}

impl fmt::Display for CacheKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CacheKind::Lru { capacity } => write!(f, "lru:{capacity}"),
            CacheKind::Direct { sets, line } => write!(f, "direct:{sets}:{line}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad component spec `{0}`")]
pub struct BadComponent(pub String);

impl FromStr for CacheKind {
    type Err = BadComponent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadComponent(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["lru", cap] => {
                let capacity: usize = cap.parse().map_err(|_| bad())?;
                if capacity == 0 {
                    return Err(bad());
                }
                Ok(CacheKind::Lru { capacity })
            }
            ["direct", sets, line] => {
                let sets: u64 = sets.parse().map_err(|_| bad())?;
                let line: u64 = line.parse().map_err(|_| bad())?;
                if sets == 0 || line == 0 || !line.is_power_of_two() {
                    return Err(bad());
                }
                Ok(CacheKind::Direct { sets, line })
            }
            _ => Err(bad()),
        }
    }
}

/// Cache metadata: which lines are present, never their contents.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CacheState {
    /// Lines in recency order, most recent last.
    Lru { capacity: usize, lines: VecDeque<u64> },
    Direct { line: u64, sets: Vec<Option<u64>> },
}

impl CacheState {
    pub fn new(kind: CacheKind) -> Self {
        match kind {
            CacheKind::Lru { capacity } => CacheState::Lru { capacity, lines: VecDeque::new() },
            CacheKind::Direct { sets, line } => CacheState::Direct { line, sets: vec![None; sets as usize] },
        }
    }

    pub fn access(&self, addr: u64) -> Access {
        let hit = match self {
            CacheState::Lru { lines, .. } => lines.contains(&addr),
            CacheState::Direct { line, sets } => {
                let l = addr / line;
                sets[(l % sets.len() as u64) as usize] == Some(l)
            }
        };
        if hit {
            Access::Hit
        } else {
            Access::Miss
        }
    }

    pub fn update(&mut self, addr: u64) {
        match self {
            CacheState::Lru { capacity, lines } => {
                if let Some(pos) = lines.iter().position(|&l| l == addr) {
                    lines.remove(pos);
                } else if lines.len() == *capacity {
                    lines.pop_front();
                }
                lines.push_back(addr);
            }
            CacheState::Direct { line, sets } => {
                let l = addr / *line;
                let n = sets.len() as u64;
                sets[(l % n) as usize] = Some(l);
            }
        }
    }
}

impl fmt::Display for CacheState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CacheState::Lru { lines, .. } => {
                let v: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
                write!(f, "lru[{}]", v.join(","))
            }
            CacheState::Direct { sets, .. } => {
                let v: Vec<String> =
                    sets.iter().map(|s| s.map(|l| l.to_string()).unwrap_or_else(|| "-".into())).collect();
                write!(f, "dm[{}]", v.join(","))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredictorKind {
    /// Always the next address.
    Fallthrough,
    /// Always the branch target.
    Taken,
    /// Taken for backward branches, fall-through otherwise.
    Backward,
    /// Per-address two-bit saturating counters starting at 0.
    TwoBit,
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictorKind::Fallthrough => "fallthrough",
            PredictorKind::Taken => "taken",
            PredictorKind::Backward => "backward",
            PredictorKind::TwoBit => "twobit",
        })
    }
}

impl FromStr for PredictorKind {
    type Err = BadComponent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "fallthrough" => Ok(PredictorKind::Fallthrough),
            "taken" => Ok(PredictorKind::Taken),
            "backward" => Ok(PredictorKind::Backward),
            "twobit" => Ok(PredictorKind::TwoBit),
            _ => Err(BadComponent(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PredictorState {
    pub kind: PredictorKind,
    pub counters: BTreeMap<u64, u8>,
}

impl PredictorState {
    pub fn new(kind: PredictorKind) -> Self {
        PredictorState { kind, counters: BTreeMap::new() }
    }

    pub fn counter(&self, at: u64) -> u8 {
        self.counters.get(&at).copied().unwrap_or(0)
    }

    /// Predicted next pc for the branch at `at` whose target is `target`;
    /// always one of `target` and `at + 1`.
    pub fn predict(&self, at: u64, target: Value) -> Value {
        let taken = match self.kind {
            PredictorKind::Fallthrough => false,
            PredictorKind::Taken => true,
            PredictorKind::Backward => matches!(target, Value::Nat(t) if t <= at),
            PredictorKind::TwoBit => self.counter(at) >= 2,
        };
        if taken {
            target
        } else {
            Value::Nat(at + 1)
        }
    }

    /// Records the resolved outcome of the branch at `at`.
    pub fn update(&mut self, at: u64, outcome: Value) {
        if self.kind != PredictorKind::TwoBit {
            return;
        }
        let taken = outcome != Value::Nat(at + 1);
        let c = self.counter(at);
        let c = if taken { (c + 1).min(3) } else { c.saturating_sub(1) };
        self.counters.insert(at, c);
    }
}

impl fmt::Display for PredictorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if !self.counters.is_empty() {
            let v: Vec<String> = self.counters.iter().map(|(a, c)| format!("{a}:{c}")).collect();
            write!(f, "{{{}}}", v.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Directive {
    Fetch,
    /// 1-based buffer index.
    Execute(usize),
    Retire,
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Directive::Fetch => f.write_str("fetch"),
            Directive::Execute(i) => write!(f, "exec {i}"),
            Directive::Retire => f.write_str("retire"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchedulerKind {
    Seq,
    /// Oldest-first execution, fetching only when nothing else is ready.
    Ooo,
    /// Fetches while there is room and executes the youngest entry first,
    /// which lets speculation run as far ahead as possible.
    Eager,
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedulerKind::Seq => "seq",
            SchedulerKind::Ooo => "ooo",
            SchedulerKind::Eager => "eager",
        })
    }
}

impl FromStr for SchedulerKind {
    type Err = BadComponent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "seq" => Ok(SchedulerKind::Seq),
            "ooo" => Ok(SchedulerKind::Ooo),
            "eager" => Ok(SchedulerKind::Eager),
            _ => Err(BadComponent(s.to_string())),
        }
    }
}

/// Scheduler state. Both kinds are functions of the projection history only.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SchedulerState {
    /// The sequential scheduler's state is the last projection.
    Seq { proj: BufProjection },
    /// The out-of-order scheduler remembers the last projection, how many
    /// consecutive steps left it unchanged, and the buffer capacity.
    Ooo { proj: BufProjection, stalled: u32, width: usize, eager: bool },
}

impl SchedulerState {
    pub fn new(kind: SchedulerKind, width: usize) -> Self {
        match kind {
            SchedulerKind::Seq => SchedulerState::Seq { proj: BufProjection::default() },
            SchedulerKind::Ooo | SchedulerKind::Eager => SchedulerState::Ooo {
                proj: BufProjection::default(),
                stalled: 0,
                width,
                eager: kind == SchedulerKind::Eager,
            },
        }
    }

    pub fn kind(&self) -> SchedulerKind {
        match self {
            SchedulerState::Seq { .. } => SchedulerKind::Seq,
            SchedulerState::Ooo { eager: false, .. } => SchedulerKind::Ooo,
            SchedulerState::Ooo { eager: true, .. } => SchedulerKind::Eager,
        }
    }

    pub fn next(&self) -> Directive {
        match self {
            SchedulerState::Seq { proj } => match proj.0.first() {
                None => Directive::Fetch,
                Some(head) if head.exec() => Directive::Execute(1),
                Some(_) => Directive::Retire,
            },
            SchedulerState::Ooo { proj, stalled, width, eager } => {
                let c = if *eager { eager_candidates(proj, *width) } else { ooo_candidates(proj, *width) };
                let n = c.len() as u64;
                let s = *stalled as u64;
                // Two tries per candidate: a fetch or load that misses only
                // warms the cache, and the retry then hits.
                let idx = (s / 2) % n;
                c[idx as usize]
            }
        }
    }

    pub fn update(&mut self, next: BufProjection) {
        match self {
            SchedulerState::Seq { proj } => *proj = next,
            SchedulerState::Ooo { proj, stalled, .. } => {
                if *proj == next {
                    *stalled = stalled.saturating_add(1);
                } else {
                    *stalled = 0;
                    *proj = next;
                }
            }
        }
    }
}

/// Executable entries that no earlier barrier (or, for loads, earlier
/// store) blocks, oldest first.
fn ready(proj: &BufProjection) -> Vec<Directive> {
    let mut out = Vec::new();
    let mut barrier = false;
    let mut store = false;
    for (i, e) in proj.0.iter().enumerate() {
        let blocked = barrier || (matches!(e.op, ProjOp::Load { .. }) && store);
        if e.exec() && !blocked {
            out.push(Directive::Execute(i + 1));
        }
        match e.op {
            ProjOp::Barrier => barrier = true,
            ProjOp::Store { .. } => store = true,
            _ => {}
        }
    }
    out
}

/// Directives the out-of-order scheduler considers, in priority order:
/// retire, then executable entries oldest first, then fetch.
pub fn ooo_candidates(proj: &BufProjection, width: usize) -> Vec<Directive> {
    let mut out = Vec::new();
    if proj.0.first().is_some_and(ProjEntry::retirable) {
        out.push(Directive::Retire);
    }
    out.extend(ready(proj));
    if proj.len() < width {
        out.push(Directive::Fetch);
    }
    if out.is_empty() {
        out.push(Directive::Execute(1));
    }
    out
}

/// Eager order: retire, fetch, executable entries youngest first, and
/// branch resolutions last (also youngest first).
pub fn eager_candidates(proj: &BufProjection, width: usize) -> Vec<Directive> {
    let mut out = Vec::new();
    if proj.0.first().is_some_and(ProjEntry::retirable) {
        out.push(Directive::Retire);
    }
    if proj.len() < width {
        out.push(Directive::Fetch);
    }
    let is_branch = |d: &Directive| match d {
        Directive::Execute(i) => proj.0[i - 1].tag.is_some(),
        _ => false,
    };
    let (branches, rest): (Vec<Directive>, Vec<Directive>) = ready(proj).into_iter().rev().partition(is_branch);
    out.extend(rest);
    out.extend(branches);
    if out.is_empty() {
        out.push(Directive::Execute(1));
    }
    out
}

impl fmt::Display for SchedulerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerState::Seq { proj } => write!(f, "seq{proj}"),
            SchedulerState::Ooo { proj, stalled, eager, .. } => {
                write!(f, "{}{proj}/{stalled}", if *eager { "eager" } else { "ooo" })
            }
        }
    }
}

/// Branch target of the instruction at `at`, if it is a branch.
pub fn branch_target(p: &Program, at: u64) -> Option<(Reg, Value)> {
    match p.at(Value::Nat(at)) {
        Some(crate::isa::Instr::Beqz { cond, target }) => Some((*cond, *target)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::BinOp;

    fn assign(dst: u16, e: Expr) -> Command {
        Command::new(Op::Assign { dst: Reg(dst), expr: e, marked: false })
    }

    #[test]
    fn projection_of_mixed_buffer() {
        let (k, x, y, z) = (1, 2, 3, 4);
        let buf = vec![
            assign(k, Expr::nat(25)),
            Command::new(Op::Load { dst: Reg(x), addr: Expr::bin(BinOp::Add, Expr::Reg(Reg(y)), Expr::Reg(Reg(z))) }),
            assign(z, Expr::bin(BinOp::Add, Expr::nat(2), Expr::Reg(Reg(k)))),
        ];
        let p = buf_project(&buf);
        assert_eq!(
            p.0.iter().map(|e| e.op.clone()).collect::<Vec<_>>(),
            vec![
                ProjOp::Assign { dst: Reg(k), rhs: Res::R, marked: false },
                ProjOp::Load { dst: Reg(x), addr: Res::UR },
                ProjOp::Assign { dst: Reg(z), rhs: Res::UR, marked: false },
            ]
        );
        assert!(buf_project(&[]).is_empty());
        let st = Command::new(Op::Store { src: Expr::nat(3), addr: Expr::nat(7) });
        assert_eq!(project_command(&st).op, ProjOp::Store { src: Res::R, addr: Res::R });
    }

    #[test]
    fn apply_examples() {
        let a = RegFile::zeros(3);
        let out = apply_buffer(&[assign(1, Expr::nat(5))], &a);
        assert_eq!(out.get(Reg(1)), Value::Nat(5));
        let out = apply_buffer(&[Command::new(Op::Load { dst: Reg(1), addr: Expr::nat(0) })], &a);
        assert_eq!(out.get(Reg(1)), Value::Bot);
        let out = apply_buffer(&[assign(1, Expr::nat(5)), Command::new(Op::Barrier)], &a);
        assert!(out.as_slice().iter().all(|v| v.is_bot()));
    }

    #[test]
    fn lru_eviction() {
        let mut c = CacheState::new(CacheKind::Lru { capacity: 2 });
        assert_eq!(c.access(5), Access::Miss);
        for a in [1, 2, 3] {
            c.update(a);
        }
        assert_eq!(c.access(1), Access::Miss);
        assert_eq!(c.access(3), Access::Hit);
    }

    #[test]
    fn direct_mapped_conflict() {
        let mut c = CacheState::new(CacheKind::Direct { sets: 4, line: 1 });
        c.update(0);
        c.update(4);
        assert_eq!(c.access(0), Access::Miss);
        assert_eq!(c.access(4), Access::Hit);
    }

    #[test]
    fn two_bit_counter() {
        let mut bp = PredictorState::new(PredictorKind::TwoBit);
        assert_eq!(bp.predict(3, Value::Nat(9)), Value::Nat(4));
        bp.update(3, Value::Nat(9));
        bp.update(3, Value::Nat(9));
        assert_eq!(bp.predict(3, Value::Nat(9)), Value::Nat(9));
        let mut bp = PredictorState::new(PredictorKind::TwoBit);
        bp.counters.insert(0, 1);
        bp.update(0, Value::Nat(7));
        assert_eq!(bp.counter(0), 2);
        bp.update(0, Value::Nat(1));
        assert_eq!(bp.counter(0), 1);
    }

    #[test]
    fn static_predictors() {
        let bp = PredictorState::new(PredictorKind::Fallthrough);
        assert_eq!(bp.predict(2, Value::Nat(0)), Value::Nat(3));
        let bp = PredictorState::new(PredictorKind::Backward);
        assert_eq!(bp.predict(2, Value::Nat(0)), Value::Nat(0));
        assert_eq!(bp.predict(2, Value::Bot), Value::Nat(3));
        let bp = PredictorState::new(PredictorKind::Taken);
        assert_eq!(bp.predict(2, Value::Bot), Value::Bot);
    }

    #[test]
    fn sequential_scheduler_examples() {
        let sc = SchedulerState::new(SchedulerKind::Seq, 4);
        assert_eq!(sc.next(), Directive::Fetch);
        let mut sc = sc;
        sc.update(buf_project(&[assign(1, Expr::Reg(Reg(2)))]));
        assert_eq!(sc.next(), Directive::Execute(1));
        sc.update(buf_project(&[Command::new(Op::Skip)]));
        assert_eq!(sc.next(), Directive::Retire);
    }

    #[test]
    fn ooo_skips_blocked_loads() {
        let buf = vec![
            Command::new(Op::Store { src: Expr::Reg(Reg(1)), addr: Expr::nat(3) }),
            Command::new(Op::Load { dst: Reg(2), addr: Expr::nat(4) }),
            assign(3, Expr::Reg(Reg(1))),
        ];
        let c = ooo_candidates(&buf_project(&buf), 4);
        assert_eq!(c, vec![Directive::Execute(1), Directive::Execute(3), Directive::Fetch]);
    }
}

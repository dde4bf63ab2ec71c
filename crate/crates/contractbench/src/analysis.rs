//! Bounded decision procedures: contract satisfaction, non-interference and
//! its speculative variants, and the sandboxing / constant-time tables.
//!
//! Every check enumerates a finite [`StateDomain`], groups states by a key
//! (a contract trace, a low projection, or both) and compares the observed
//! traces within each group against the group's first member. This finds a
//! violating pair whenever one exists, in linear rather than quadratic time.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hash;

use rayon::prelude::*;
use thiserror::Error;

use crate::arch::{ArchError, ArchState, Memory};
use crate::contracts::{trace, ContractConfig, ContractId, ContractTrace};
use crate::isa::Program;
use crate::pipeline::{hw_run, HwConfig, HwError, HwObservation};

/// Upper bound on the number of state pairs a domain may induce.
pub const PAIR_LIMIT: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("domain has {pairs} state pairs, above the limit of {limit}")]
    DomainTooLarge { pairs: u128, limit: u128 },
    #[error("architectural run failed: {0}")]
    Arch(#[from] ArchError),
    #[error("hardware run failed: {0}")]
    Hw(#[from] HwError),
}

/// Memory classification: the listed ranges are low, everything else high.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Policy {
    /// Half-open ranges; `None` as the upper end means unbounded.
    low: Vec<(u64, Option<u64>)>,
}

impl Policy {
    /// Everything high.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn all_low() -> Self {
        Policy { low: vec![(0, None)] }
    }

    pub fn with_low(mut self, lo: u64, hi: Option<u64>) -> Self {
        self.low.push((lo, hi));
        self
    }

    pub fn ranges(&self) -> &[(u64, Option<u64>)] {
        &self.low
    }

    pub fn is_low(&self, addr: u64) -> bool {
        self.low.iter().any(|&(lo, hi)| addr >= lo && hi.is_none_or(|h| addr < h))
    }

    /// The low part of a memory, as compared by [`low_equivalent`].
    pub fn low_part(&self, m: &Memory) -> Vec<(u64, u64)> {
        m.iter().filter(|(a, _)| self.is_low(*a)).collect()
    }
}

/// Memories agree on every low address. Registers are not compared: in
/// initial states they are all zero.
pub fn low_equivalent(s1: &ArchState, s2: &ArchState, pol: &Policy) -> bool {
    pol.low_part(&s1.mem) == pol.low_part(&s2.mem)
}

/// A finite set of initial states: fixed cells plus cells ranging over
/// value lists, enumerated in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateDomain {
    pub fixed: BTreeMap<u64, u64>,
    pub vary: Vec<(u64, Vec<u64>)>,
    /// Overrides the program's arithmetic modulus when set.
    pub modulus: Option<u64>,
}

impl Default for StateDomain {
    fn default() -> Self {
        StateDomain { fixed: BTreeMap::new(), vary: Vec::new(), modulus: None }
    }
}

impl StateDomain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fix(mut self, addr: u64, v: u64) -> Self {
        self.fixed.insert(addr, v);
        self
    }

    pub fn vary(mut self, addr: u64, values: impl IntoIterator<Item = u64>) -> Self {
        self.vary.push((addr, values.into_iter().collect()));
        self
    }

    /// Small default: addresses 0..3 range over 0..4.
    pub fn desk() -> Self {
        (0..3).fold(StateDomain::new(), |d, a| d.vary(a, 0..4))
    }

    pub fn len(&self) -> u128 {
        self.vary.iter().map(|(_, vs)| vs.len() as u128).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pairs(&self) -> u128 {
        self.len().saturating_mul(self.len())
    }

    /// Applies the modulus override, if any.
    pub fn program(&self, p: &Program) -> Program {
        match self.modulus {
            Some(m) => p.clone().with_modulus(m),
            None => p.clone(),
        }
    }

    pub fn states(&self, p: &Program) -> Result<Vec<ArchState>, AnalysisError> {
        if self.pairs() > PAIR_LIMIT {
            return Err(AnalysisError::DomainTooLarge { pairs: self.pairs(), limit: PAIR_LIMIT });
        }
        let mut out = Vec::with_capacity(self.len() as usize);
        let mut idx = vec![0usize; self.vary.len()];
        if self.is_empty() {
            return Ok(out);
        }
        loop {
            let mut mem: Memory = self.fixed.iter().map(|(a, v)| (*a, *v)).collect();
            for ((addr, vs), &i) in self.vary.iter().zip(&idx) {
                mem.set(*addr, vs[i]);
            }
            out.push(ArchState::with_memory(p, mem));
            let mut k = self.vary.len();
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.vary[k].1.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// What is being observed: a contract, or the adversary's view of a
/// hardware run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Semantics {
    Contract(ContractId, ContractConfig),
    Hardware(HwConfig),
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Semantics::Contract(c, _) => write!(f, "{c}"),
            Semantics::Hardware(cfg) => write!(f, "hw[{}]", cfg.countermeasure),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Trace {
    Contract(ContractTrace),
    Hardware(Vec<HwObservation>),
}

impl Trace {
    pub fn len(&self) -> usize {
        match self {
            Trace::Contract(t) => t.len(),
            Trace::Hardware(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lines(&self) -> Vec<String> {
        match self {
            Trace::Contract(t) => t.lines(),
            Trace::Hardware(t) => t.iter().map(|o| o.to_string()).collect(),
        }
    }

    /// 1-based position of the first difference; a strict prefix diverges
    /// one past its end.
    pub fn divergence(&self, other: &Trace) -> Option<usize> {
        fn first<T: PartialEq>(a: &[T], b: &[T]) -> Option<usize> {
            match a.iter().zip(b).position(|(x, y)| x != y) {
                Some(i) => Some(i + 1),
                None if a.len() != b.len() => Some(a.len().min(b.len()) + 1),
                None => None,
            }
        }
        match (self, other) {
            (Trace::Contract(a), Trace::Contract(b)) => first(&a.0, &b.0),
            (Trace::Hardware(a), Trace::Hardware(b)) => first(a, b),
            _ => Some(1),
        }
    }
}

pub fn observe(p: &Program, s: &ArchState, sem: &Semantics) -> Result<Trace, AnalysisError> {
    Ok(match sem {
        Semantics::Contract(c, cfg) => Trace::Contract(trace(p, s, *c, cfg)?),
        Semantics::Hardware(cfg) => Trace::Hardware(hw_run(p, s, cfg)?.trace),
    })
}

/// Two initial states and where their traces part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub first: ArchState,
    pub second: ArchState,
    /// 1-based index into the traces.
    pub position: usize,
    pub left: Vec<String>,
    pub right: Vec<String>,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |t: &[String]| t.get(self.position - 1).cloned().unwrap_or_else(|| "<end>".into());
        write!(
            f,
            "traces diverge at position {}: `{}` vs `{}`",
            self.position,
            at(&self.left),
            at(&self.right)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(Box<Counterexample>),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            Verdict::Pass => None,
            Verdict::Fail(c) => Some(c),
        }
    }
}

fn first_error<T>(rs: Vec<Result<T, AnalysisError>>) -> Result<Vec<T>, AnalysisError> {
    rs.into_iter().collect()
}

/// Core search: among states with equal keys, the observed traces must agree.
/// The reported pair is the first one in enumeration order.
fn search<K, F>(p: &Program, states: &[ArchState], key: F, sem: &Semantics) -> Result<Verdict, AnalysisError>
where
    K: Hash + Eq + Send,
    F: Fn(&ArchState) -> Result<K, AnalysisError> + Sync,
{
    let keys = first_error(states.par_iter().map(&key).collect())?;
    let mut rep: HashMap<&K, usize> = HashMap::new();
    let mut group = Vec::with_capacity(states.len());
    let mut size: HashMap<usize, usize> = HashMap::new();
    for (j, k) in keys.iter().enumerate() {
        let r = *rep.entry(k).or_insert(j);
        group.push(r);
        *size.entry(r).or_insert(0) += 1;
    }
    let needed: Vec<usize> = (0..states.len()).filter(|j| size[&group[*j]] > 1).collect();
    let traces = first_error(needed.par_iter().map(|&j| observe(p, &states[j], sem).map(|t| (j, t))).collect())?;
    let traces: HashMap<usize, Trace> = traces.into_iter().collect();
    for &j in &needed {
        let r = group[j];
        if r == j {
            continue;
        }
        let (a, b) = (&traces[&r], &traces[&j]);
        if let Some(position) = a.divergence(b) {
            return Ok(Verdict::Fail(Box::new(Counterexample {
                first: states[r].clone(),
                second: states[j].clone(),
                position,
                left: a.lines(),
                right: b.lines(),
            })));
        }
    }
    Ok(Verdict::Pass)
}

/// Re-runs both states of a counterexample and confirms the divergence.
pub fn replay(p: &Program, sem: &Semantics, cex: &Counterexample) -> Result<bool, AnalysisError> {
    let a = observe(p, &cex.first, sem)?;
    let b = observe(p, &cex.second, sem)?;
    Ok(a.divergence(&b) == Some(cex.position) && a.lines() == cex.left && b.lines() == cex.right)
}

/// The hardware satisfies `contract` on `p` over `dom`: equal contract traces
/// imply equal hardware traces.
pub fn check_contract_satisfaction(
    p: &Program,
    contract: ContractId,
    ccfg: &ContractConfig,
    hw: &HwConfig,
    dom: &StateDomain,
) -> Result<Verdict, AnalysisError> {
    let p = dom.program(p);
    let states = dom.states(&p)?;
    search(&p, &states, |s| Ok(trace(&p, s, contract, ccfg)?), &Semantics::Hardware(hw.clone()))
}

/// Low-equivalent states produce equal traces under `sem`.
pub fn check_ni(p: &Program, pol: &Policy, sem: &Semantics, dom: &StateDomain) -> Result<Verdict, AnalysisError> {
    let p = dom.program(p);
    let states = dom.states(&p)?;
    search(&p, &states, |s| Ok(pol.low_part(&s.mem)), sem)
}

/// Equal sequential-arch traces imply equal traces under `contract`.
pub fn check_wsni(
    p: &Program,
    contract: ContractId,
    ccfg: &ContractConfig,
    dom: &StateDomain,
) -> Result<Verdict, AnalysisError> {
    let p = dom.program(p);
    let states = dom.states(&p)?;
    search(
        &p,
        &states,
        |s| Ok(trace(&p, s, ContractId::SeqArch, ccfg)?),
        &Semantics::Contract(contract, *ccfg),
    )
}

/// Low-equivalent states with equal sequential-ct traces have equal traces
/// under `contract`.
pub fn check_sni(
    p: &Program,
    pol: &Policy,
    contract: ContractId,
    ccfg: &ContractConfig,
    dom: &StateDomain,
) -> Result<Verdict, AnalysisError> {
    let p = dom.program(p);
    let states = dom.states(&p)?;
    search(
        &p,
        &states,
        |s| Ok((pol.low_part(&s.mem), trace(&p, s, ContractId::SeqCt, ccfg)?)),
        &Semantics::Contract(contract, *ccfg),
    )
}

/// Empirical test of `c1 ⊒ c2`: equal `c2` traces imply equal `c1` traces on
/// every program. Returns the index of the first refuting program with its
/// witness.
pub fn contract_stronger_test(
    c1: ContractId,
    c2: ContractId,
    programs: &[Program],
    dom: &StateDomain,
    ccfg: &ContractConfig,
) -> Result<Option<(usize, Counterexample)>, AnalysisError> {
    for (i, p) in programs.iter().enumerate() {
        let p = dom.program(p);
        let states = dom.states(&p)?;
        let v = search(&p, &states, |s| Ok(trace(&p, s, c2, ccfg)?), &Semantics::Contract(c1, *ccfg))?;
        if let Verdict::Fail(cex) = v {
            return Ok(Some((i, *cex)));
        }
    }
    Ok(None)
}

/// The contracts shown as table columns.
pub const COLUMNS: [ContractId; 4] = [ContractId::SeqCt, ContractId::SeqArch, ContractId::SpecCt, ContractId::SpecPcCt];

/// One table cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cell {
    /// Secure because the contract is at least as strong as the baseline one.
    Stronger,
    /// Secure by a weak speculative non-interference check.
    Wsni,
    /// Secure by a speculative non-interference check.
    Sni,
    /// Secure by a direct non-interference check.
    Ni,
    No(Box<Counterexample>),
}

impl Cell {
    pub fn is_yes(&self) -> bool {
        !matches!(self, Cell::No(_))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cell::Stronger => "Y,⊒",
            Cell::Wsni => "Y,wSNI",
            Cell::Sni => "Y,SNI",
            Cell::Ni => "Y,NI",
            Cell::No(_) => "N",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub cells: Vec<(ContractId, Cell)>,
}

impl Row {
    pub fn cell(&self, c: ContractId) -> Option<&Cell> {
        self.cells.iter().find(|(id, _)| *id == c).map(|(_, cell)| cell)
    }

    /// `Y`/`N` per column.
    pub fn pattern(&self) -> String {
        self.cells.iter().map(|(_, c)| if c.is_yes() { 'Y' } else { 'N' }).collect()
    }
}

fn yes_or_no(v: Verdict, yes: Cell) -> Cell {
    match v {
        Verdict::Pass => yes,
        Verdict::Fail(c) => Cell::No(c),
    }
}

/// Sandboxing row: vanilla sandboxing first (non-interference under the
/// sequential arch contract), then weak speculative non-interference per
/// column.
pub fn classify_sandboxing(
    p: &Program,
    pol: &Policy,
    ccfg: &ContractConfig,
    dom: &StateDomain,
) -> Result<Row, AnalysisError> {
    let vanilla = check_ni(p, pol, &Semantics::Contract(ContractId::SeqArch, *ccfg), dom)?;
    let mut cells = Vec::new();
    for c in COLUMNS {
        let cell = match &vanilla {
            Verdict::Fail(cex) => Cell::No(cex.clone()),
            Verdict::Pass if c.at_least(ContractId::SeqArch) => Cell::Stronger,
            Verdict::Pass => yes_or_no(check_wsni(p, c, ccfg, dom)?, Cell::Wsni),
        };
        cells.push((c, cell));
    }
    Ok(Row { cells })
}

/// Constant-time row: the sequential arch column is a direct
/// non-interference check; the others require vanilla constant-time and then
/// speculative non-interference.
pub fn classify_constant_time(
    p: &Program,
    pol: &Policy,
    ccfg: &ContractConfig,
    dom: &StateDomain,
) -> Result<Row, AnalysisError> {
    let vanilla = check_ni(p, pol, &Semantics::Contract(ContractId::SeqCt, *ccfg), dom)?;
    let mut cells = Vec::new();
    for c in COLUMNS {
        let cell = if c == ContractId::SeqArch {
            yes_or_no(check_ni(p, pol, &Semantics::Contract(c, *ccfg), dom)?, Cell::Ni)
        } else {
            match &vanilla {
                Verdict::Fail(cex) => Cell::No(cex.clone()),
                Verdict::Pass if c.at_least(ContractId::SeqCt) => Cell::Stronger,
                Verdict::Pass => yes_or_no(check_sni(p, pol, c, ccfg, dom)?, Cell::Sni),
            }
        };
        cells.push((c, cell));
    }
    Ok(Row { cells })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeResult {
    pub stronger: ContractId,
    pub weaker: ContractId,
    pub witness: Option<(usize, Counterexample)>,
}

/// A hardware configuration satisfied `from` on every program but not the
/// weaker contract `to`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferFailure {
    pub config: usize,
    pub from: ContractId,
    pub to: ContractId,
    pub program: usize,
    pub counterexample: Counterexample,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LatticeReport {
    pub edges: Vec<EdgeResult>,
    pub transfer_failures: Vec<TransferFailure>,
}

impl LatticeReport {
    pub fn passed(&self) -> bool {
        self.edges.iter().all(|e| e.witness.is_none()) && self.transfer_failures.is_empty()
    }
}

/// Tests every lattice edge on `programs`; with hardware configurations,
/// also checks that satisfying a contract carries over to every weaker one.
pub fn check_lattice(
    programs: &[Program],
    dom: &StateDomain,
    ccfg: &ContractConfig,
    hw: &[HwConfig],
) -> Result<LatticeReport, AnalysisError> {
    let mut report = LatticeReport::default();
    for (c1, c2) in ContractId::LATTICE {
        let witness = contract_stronger_test(c1, c2, programs, dom, ccfg)?;
        report.edges.push(EdgeResult { stronger: c1, weaker: c2, witness });
    }
    for (k, cfg) in hw.iter().enumerate() {
        let mut satisfied = BTreeMap::new();
        for c in ContractId::ALL {
            let mut first_fail = None;
            for (i, p) in programs.iter().enumerate() {
                if let Verdict::Fail(cex) = check_contract_satisfaction(p, c, ccfg, cfg, dom)? {
                    first_fail = Some((i, *cex));
                    break;
                }
            }
            satisfied.insert(c, first_fail);
        }
        for c1 in ContractId::ALL {
            for c2 in ContractId::ALL {
                if c1 == c2 || !c1.at_least(c2) || satisfied[&c1].is_some() {
                    continue;
                }
                if let Some((program, cex)) = &satisfied[&c2] {
                    report.transfer_failures.push(TransferFailure {
                        config: k,
                        from: c1,
                        to: c2,
                        program: *program,
                        counterexample: cex.clone(),
                    });
                }
            }
        }
    }
    Ok(report)
}

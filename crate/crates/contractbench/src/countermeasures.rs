//! Secure-speculation mechanisms layered over the pipeline: eager load delay
//! and taint tracking (STT-style and the two NDA propagation policies).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::isa::{Expr, Reg, Value};
use crate::uarch::{BadComponent, Command, Directive, Op};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Countermeasure {
    None,
    Seq,
    LoadDelay,
    Tt,
    NdaStrict,
    NdaPermissive,
}

impl Countermeasure {
    pub const ALL: [Countermeasure; 6] = [
        Countermeasure::None,
        Countermeasure::Seq,
        Countermeasure::LoadDelay,
        Countermeasure::Tt,
        Countermeasure::NdaStrict,
        Countermeasure::NdaPermissive,
    ];

    pub fn labeling(self) -> Option<Labeling> {
        match self {
            Countermeasure::Tt => Some(Labeling::Tt),
            Countermeasure::NdaStrict => Some(Labeling::NdaStrict),
            Countermeasure::NdaPermissive => Some(Labeling::NdaPermissive),
            _ => None,
        }
    }
}

impl fmt::Display for Countermeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Countermeasure::None => "none",
            Countermeasure::Seq => "seq",
            Countermeasure::LoadDelay => "loaddelay",
            Countermeasure::Tt => "tt",
            Countermeasure::NdaStrict => "nda-strict",
            Countermeasure::NdaPermissive => "nda-permissive",
        })
    }
}

impl FromStr for Countermeasure {
    type Err = BadComponent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "none" => Countermeasure::None,
            "seq" => Countermeasure::Seq,
            "loaddelay" | "load-delay" => Countermeasure::LoadDelay,
            "tt" | "stt" => Countermeasure::Tt,
            "nda-strict" => Countermeasure::NdaStrict,
            "nda-permissive" => Countermeasure::NdaPermissive,
            _ => return Err(BadComponent(s.to_string())),
        })
    }
}

/// 1-based buffer positions of the unresolved branches an entry may depend on.
pub type Label = BTreeSet<usize>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Entry {
    pub cmd: Command,
    pub label: Label,
}

impl Entry {
    pub fn unlabeled(cmd: Command) -> Self {
        Entry { cmd, label: Label::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Guard {
    Allowed,
    Delayed,
}

/// Eager load delay: a load may execute only when every earlier branch
/// prediction has been resolved.
pub fn loaddelay_guard(buf: &[Command], d: Directive) -> Guard {
    match d {
        Directive::Execute(i) if i >= 1 && buf.get(i - 1).is_some_and(Command::is_load) => {
            if buf[..i - 1].iter().any(Command::is_pending_branch) {
                Guard::Delayed
            } else {
                Guard::Allowed
            }
        }
        _ => Guard::Allowed,
    }
}

/// Loads, stores and writes to `pc`.
pub fn is_transmit(c: &Command) -> bool {
    match &c.op {
        Op::Load { .. } | Op::Store { .. } => true,
        Op::Assign { dst, .. } => *dst == Reg::PC,
        Op::Skip | Op::Barrier => false,
    }
}

pub fn drop_labels(buf: &[Entry]) -> Vec<Command> {
    buf.iter().map(|e| e.cmd.clone()).collect()
}

/// Hides the values of labelled assignments. With `literal` set, the
/// condition is inverted to the unlabelled entries instead.
pub fn mask(buf: &[Entry], literal: bool) -> Vec<Command> {
    buf.iter()
        .map(|e| {
            let hide = if literal { e.label.is_empty() } else { !e.label.is_empty() };
            match &e.cmd.op {
                Op::Assign { dst, marked, .. } if hide => Command {
                    op: Op::Assign { dst: *dst, expr: Expr::Const(Value::Bot), marked: *marked },
                    tag: e.cmd.tag,
                },
                _ => e.cmd.clone(),
            }
        })
        .collect()
}

pub fn tt_unlabel(buf: &[Entry], d: Directive, literal: bool) -> Vec<Command> {
    match d {
        Directive::Fetch => mask(buf, literal),
        Directive::Retire => drop_labels(buf),
        Directive::Execute(i) => match buf.get(i.wrapping_sub(1)) {
            Some(e) if is_transmit(&e.cmd) => mask(buf, literal),
            _ => drop_labels(buf),
        },
    }
}

/// NDA masks every labelled assignment whatever the directive.
pub fn nda_unlabel(buf: &[Entry], literal: bool) -> Vec<Command> {
    mask(buf, literal)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Labeling {
    Tt,
    NdaStrict,
    NdaPermissive,
}

impl Labeling {
    pub fn unlabel(self, buf: &[Entry], d: Directive, literal: bool) -> Vec<Command> {
        match self {
            Labeling::Tt => tt_unlabel(buf, d, literal),
            Labeling::NdaStrict | Labeling::NdaPermissive => nda_unlabel(buf, literal),
        }
    }
}

/// Positions of the unresolved branches in `buf`.
pub fn pending_branches(buf: &[Entry]) -> Label {
    buf.iter()
        .enumerate()
        .filter(|(_, e)| e.cmd.is_pending_branch())
        .map(|(j, _)| j + 1)
        .collect()
}

/// Union of the labels of the latest in-flight writers of `regs`.
pub fn labels_of(buf: &[Entry], regs: &[Reg]) -> Label {
    let mut out = Label::new();
    for r in regs {
        let writer = buf.iter().rev().find(|e| match &e.cmd.op {
            Op::Load { dst, .. } | Op::Assign { dst, .. } => dst == r,
            _ => false,
        });
        if let Some(e) = writer {
            out.extend(e.label.iter().copied());
        }
    }
    out
}

fn decrement(buf: &[Entry]) -> Vec<Entry> {
    buf.iter()
        .map(|e| Entry {
            cmd: e.cmd.clone(),
            label: e.label.iter().filter(|&&j| j > 1).map(|j| j - 1).collect(),
        })
        .collect()
}

fn strip(buf: &[Entry], j: usize) -> Vec<Entry> {
    buf.iter()
        .map(|e| {
            let mut label = e.label.clone();
            label.remove(&j);
            Entry { cmd: e.cmd.clone(), label }
        })
        .collect()
}

fn fresh_label(kind: Labeling, old: &[Entry], c: &Command) -> Label {
    let transient = || pending_branches(old);
    match (&c.op, kind) {
        (Op::Assign { dst, .. }, _) if *dst == Reg::PC => Label::new(),
        (Op::Load { .. }, _) => transient(),
        (Op::Assign { expr, .. }, Labeling::Tt) => labels_of(old, &expr.vars()),
        (_, Labeling::NdaStrict) => transient(),
        _ => Label::new(),
    }
}

/// Computes the labelled buffer after a successful stage that turned
/// `unlabel(old, d)` into `ul`.
pub fn relabel(kind: Labeling, ul: Vec<Command>, old: &[Entry], d: Directive) -> Vec<Entry> {
    match d {
        Directive::Fetch => {
            let mut out = old.to_vec();
            let fresh: Vec<Command> = ul.into_iter().skip(old.len()).collect();
            for c in fresh {
                let label = fresh_label(kind, old, &c);
                out.push(Entry { cmd: c, label });
            }
            out
        }
        Directive::Retire => decrement(old.get(1..).unwrap_or(&[])),
        Directive::Execute(i) => {
            let k = i - 1;
            let was_pending = old[k].cmd.is_pending_branch();
            let mut out = old[..k].to_vec();
            let cmd = ul[k].clone();
            if was_pending && cmd.tag.is_none() {
                out.push(Entry { cmd, label: Label::new() });
                if ul.len() > i {
                    out.extend(strip(&old[i..], i));
                }
            } else {
                out.push(Entry { cmd, label: old[k].label.clone() });
                out.extend(old[i..].iter().cloned());
            }
            out
        }
    }
}

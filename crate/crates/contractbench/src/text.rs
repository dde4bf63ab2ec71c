//! Line-oriented text formats: initial states, policies, state domains and
//! hardware configurations. `#` starts a comment in all of them.

use std::fmt::Write as _;

use thiserror::Error;

use crate::analysis::{Policy, StateDomain};
use crate::arch::{ArchState, Memory};
use crate::isa::{Program, Value};
use crate::pipeline::HwConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct TextError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, TextError> {
    Err(TextError { line, msg: msg.into() })
}

/// Non-empty lines with comments stripped, numbered from 1.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn num(line: usize, s: &str) -> Result<u64, TextError> {
    s.trim().parse().or_else(|_| err(line, format!("expected a number, found `{}`", s.trim())))
}

fn key_value(line: usize, s: &str) -> Result<(&str, &str), TextError> {
    match s.split_once('=') {
        Some((k, v)) => Ok((k.trim(), v.trim())),
        None => err(line, "expected `name=value`"),
    }
}

/// Parses `reg name=value` and `mem addr=value` lines. Unmentioned registers
/// and cells are 0.
pub fn parse_state(p: &Program, text: &str) -> Result<ArchState, TextError> {
    let mut s = ArchState::with_memory(p, Memory::new());
    for (n, l) in lines(text) {
        let (kind, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        let (k, v) = key_value(n, rest)?;
        match kind {
            "reg" => {
                let Some(r) = p.reg(k) else {
                    return err(n, format!("unknown register `{k}`"));
                };
                let Some(v) = Value::parse(v) else {
                    return err(n, format!("bad value `{v}`"));
                };
                s.regs.set(r, v);
            }
            "mem" => s.mem.set(num(n, k)?, num(n, v)?),
            other => return err(n, format!("unknown directive `{other}`")),
        }
    }
    Ok(s)
}

/// Inverse of [`parse_state`]: zero registers and cells are omitted.
pub fn format_state(p: &Program, s: &ArchState) -> String {
    let mut out = String::new();
    for (r, name) in p.registers().iter() {
        let v = s.regs.get(r);
        if v != Value::Nat(0) {
            let _ = writeln!(out, "reg {name}={v}");
        }
    }
    for (a, v) in s.mem.iter() {
        let _ = writeln!(out, "mem {a}={v}");
    }
    out
}

/// `a`, `a..b` (half-open), `a..=b` or `a..` (unbounded).
fn range(line: usize, s: &str) -> Result<(u64, Option<u64>), TextError> {
    let s = s.trim();
    if let Some((lo, hi)) = s.split_once("..=") {
        return Ok((num(line, lo)?, Some(num(line, hi)? + 1)));
    }
    if let Some((lo, hi)) = s.split_once("..") {
        let hi = if hi.trim().is_empty() { None } else { Some(num(line, hi)?) };
        return Ok((num(line, lo)?, hi));
    }
    let a = num(line, s)?;
    Ok((a, Some(a + 1)))
}

fn format_range(lo: u64, hi: Option<u64>) -> String {
    match hi {
        None => format!("{lo}.."),
        Some(h) if h == lo + 1 => lo.to_string(),
        Some(h) => format!("{lo}..{h}"),
    }
}

/// Parses `low <range>` lines.
pub fn parse_policy(text: &str) -> Result<Policy, TextError> {
    let mut pol = Policy::new();
    for (n, l) in lines(text) {
        match l.split_once(char::is_whitespace) {
            Some(("low", r)) => {
                let (lo, hi) = range(n, r)?;
                pol = pol.with_low(lo, hi);
            }
            _ => return err(n, format!("expected `low <range>`, found `{l}`")),
        }
    }
    Ok(pol)
}

pub fn format_policy(pol: &Policy) -> String {
    pol.ranges().iter().map(|&(lo, hi)| format!("low {}\n", format_range(lo, hi))).collect()
}

/// Parses `vary <addr> [in <range>]`, `fix <addr> = <v>`, `values <V>` and
/// `modulus <M>` lines. A `vary` without a range uses `0..V`.
pub fn parse_domain(text: &str) -> Result<StateDomain, TextError> {
    let mut dom = StateDomain::new();
    let mut values: Option<u64> = None;
    let mut open: Vec<(usize, u64)> = Vec::new();
    for (n, l) in lines(text) {
        let (kind, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        match kind {
            "vary" => match rest.split_once(" in ") {
                Some((a, r)) => {
                    let (lo, hi) = range(n, r)?;
                    let Some(hi) = hi else {
                        return err(n, "value range must be bounded");
                    };
                    dom = dom.vary(num(n, a)?, lo..hi);
                }
                None => {
                    open.push((dom.vary.len(), num(n, rest)?));
                    dom = dom.vary(num(n, rest)?, []);
                }
            },
            "fix" => {
                let (a, v) = key_value(n, rest)?;
                dom = dom.fix(num(n, a)?, num(n, v)?);
            }
            "values" => values = Some(num(n, rest)?),
            "modulus" => {
                let m = num(n, rest)?;
                if m < 2 {
                    return err(n, "modulus must be at least 2");
                }
                dom.modulus = Some(m);
            }
            other => return err(n, format!("unknown directive `{other}`")),
        }
    }
    if !open.is_empty() {
        let Some(v) = values else {
            return err(0, "`vary` without a range needs a `values` line");
        };
        for (i, _) in open {
            dom.vary[i].1 = (0..v).collect();
        }
    }
    Ok(dom)
}

pub fn format_domain(dom: &StateDomain) -> String {
    let mut out = String::new();
    if let Some(m) = dom.modulus {
        let _ = writeln!(out, "modulus {m}");
    }
    for (a, v) in &dom.fixed {
        let _ = writeln!(out, "fix {a} = {v}");
    }
    for (a, vs) in &dom.vary {
        let contiguous = vs.windows(2).all(|w| w[1] == w[0] + 1);
        match (vs.first(), vs.last()) {
            (Some(lo), Some(hi)) if contiguous => {
                let _ = writeln!(out, "vary {a} in {lo}..{}", hi + 1);
            }
            _ => {
                // Non-contiguous value sets have no text form; widen them.
                let hi = vs.iter().max().map_or(0, |m| m + 1);
                let _ = writeln!(out, "vary {a} in 0..{hi}");
            }
        }
    }
    out
}

fn flag(line: usize, v: &str) -> Result<bool, TextError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => err(line, format!("expected a boolean, found `{v}`")),
    }
}

/// Parses `key = value` lines over the defaults. Keys: `buffer_size`,
/// `cache`, `predictor`, `scheduler`, `countermeasure`, `fuel`,
/// `mask_literal`, `expose_labels`.
pub fn parse_hw_config(text: &str) -> Result<HwConfig, TextError> {
    let mut cfg = HwConfig::default();
    for (n, l) in lines(text) {
        let (k, v) = key_value(n, l)?;
        let bad = |e: crate::uarch::BadComponent| TextError { line: n, msg: e.to_string() };
        match k {
            "buffer_size" | "width" => {
                cfg.buffer_size = num(n, v)? as usize;
                if cfg.buffer_size < 2 {
                    return err(n, "buffer_size must be at least 2");
                }
            }
            "cache" => cfg.cache = v.parse().map_err(bad)?,
            "predictor" => cfg.predictor = v.parse().map_err(bad)?,
            "scheduler" => cfg.scheduler = v.parse().map_err(bad)?,
            "countermeasure" => cfg.countermeasure = v.parse().map_err(bad)?,
            "fuel" => cfg.fuel = num(n, v)?,
            "mask_literal" => cfg.mask_literal = flag(n, v)?,
            "expose_labels" => cfg.expose_labels = flag(n, v)?,
            other => return err(n, format!("unknown key `{other}`")),
        }
    }
    Ok(cfg)
}

pub fn format_hw_config(cfg: &HwConfig) -> String {
    format!(
        "buffer_size = {}\ncache = {}\npredictor = {}\nscheduler = {}\ncountermeasure = {}\nfuel = {}\nmask_literal = {}\nexpose_labels = {}\n",
        cfg.buffer_size,
        cfg.cache,
        cfg.predictor,
        cfg.scheduler,
        cfg.countermeasure,
        cfg.fuel,
        cfg.mask_literal,
        cfg.expose_labels
    )
}

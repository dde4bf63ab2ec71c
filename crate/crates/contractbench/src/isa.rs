//! μAsm abstract syntax, its text format, expression evaluation and
//! well-formedness.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Arithmetic modulus used when a program does not choose one.
pub const DEFAULT_MODULUS: u64 = 1 << 16;

/// A register or memory content: a natural number or the undefined value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Value {
    Nat(u64),
    Bot,
}

impl Value {
    pub fn as_nat(self) -> Option<u64> {
        match self {
            Value::Nat(n) => Some(n),
            Value::Bot => None,
        }
    }

    pub fn is_bot(self) -> bool {
        matches!(self, Value::Bot)
    }

    /// Parses `end`, `bot`, `⊥` or a decimal natural.
    pub fn parse(s: &str) -> Option<Value> {
        match s.trim() {
            "end" | "bot" | "⊥" => Some(Value::Bot),
            t => t.parse().ok().map(Value::Nat),
        }
    }
}

impl From<u64> for Value {
    fn from(n: u64) -> Self {
        Value::Nat(n)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nat(n) => write!(f, "{n}"),
            Value::Bot => f.write_str("end"),
        }
    }
}

/// Index into a program's register table. Index 0 is always `pc`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(pub u16);

impl Reg {
    pub const PC: Reg = Reg(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Register names in order of first appearance; `pc` comes first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Registers {
    names: Vec<String>,
}

impl Default for Registers {
    fn default() -> Self {
        Registers { names: vec!["pc".to_string()] }
    }
}

impl Registers {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> Reg {
        if let Some(r) = self.get(name) {
            return r;
        }
        self.names.push(name.to_string());
        Reg((self.names.len() - 1) as u16)
    }

    pub fn get(&self, name: &str) -> Option<Reg> {
        self.names.iter().position(|n| n == name).map(|i| Reg(i as u16))
    }

    pub fn name(&self, r: Reg) -> &str {
        self.names.get(r.index()).map(String::as_str).unwrap_or("?")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Reg, &str)> {
        self.names.iter().enumerate().map(|(i, n)| (Reg(i as u16), n.as_str()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    /// Arithmetic negation modulo the program modulus.
    Neg,
    /// Logical negation: 0 becomes 1, everything else 0.
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Lt,
    Eq,
    And,
    Or,
    Xor,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Lt => "<",
            BinOp::Eq => "=",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
        }
    }

    pub fn apply(self, a: u64, b: u64, modulus: u64) -> u64 {
        let m = modulus as u128;
        let (a, b) = (a as u128 % m, b as u128 % m);
        let r = match self {
            BinOp::Add => (a + b) % m,
            BinOp::Sub => (a + m - b) % m,
            BinOp::Mul => (a * b) % m,
            BinOp::Lt => (a < b) as u128,
            BinOp::Eq => (a == b) as u128,
            BinOp::And => a & b,
            BinOp::Or => a | b,
            BinOp::Xor => a ^ b,
        };
        (r % m) as u64
    }
}

impl UnOp {
    pub fn apply(self, a: u64, modulus: u64) -> u64 {
        let a = a % modulus;
        match self {
            UnOp::Neg => (modulus - a) % modulus,
            UnOp::Not => (a == 0) as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Value),
    Reg(Reg),
    Un(UnOp, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn nat(n: u64) -> Expr {
        Expr::Const(Value::Nat(n))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn un(op: UnOp, a: Expr) -> Expr {
        Expr::Un(op, Box::new(a))
    }

    pub fn ite(c: Expr, t: Expr, f: Expr) -> Expr {
        Expr::Ite(Box::new(c), Box::new(t), Box::new(f))
    }

    /// A literal value, i.e. nothing left to compute.
    pub fn is_resolved(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    pub fn literal(&self) -> Option<Value> {
        match self {
            Expr::Const(v) => Some(*v),
            _ => None,
        }
    }

    /// Registers read by the expression, in syntactic order.
    pub fn vars(&self) -> Vec<Reg> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Reg>) {
        match self {
            Expr::Const(_) => {}
            Expr::Reg(r) => out.push(*r),
            Expr::Un(_, a) => a.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Ite(c, t, f) => {
                c.collect_vars(out);
                t.collect_vars(out);
                f.collect_vars(out);
            }
        }
    }

    /// Strict evaluation: any undefined subexpression makes the result undefined.
    pub fn eval(&self, regs: &[Value], modulus: u64) -> Value {
        match self {
            Expr::Const(Value::Nat(n)) => Value::Nat(n % modulus),
            Expr::Const(Value::Bot) => Value::Bot,
            Expr::Reg(r) => match regs.get(r.index()).copied().unwrap_or(Value::Nat(0)) {
                Value::Nat(n) => Value::Nat(n % modulus),
                Value::Bot => Value::Bot,
            },
            Expr::Un(op, a) => match a.eval(regs, modulus) {
                Value::Nat(x) => Value::Nat(op.apply(x, modulus)),
                Value::Bot => Value::Bot,
            },
            Expr::Bin(op, a, b) => match (a.eval(regs, modulus), b.eval(regs, modulus)) {
                (Value::Nat(x), Value::Nat(y)) => Value::Nat(op.apply(x, y, modulus)),
                _ => Value::Bot,
            },
            Expr::Ite(c, t, f) => {
                match (c.eval(regs, modulus), t.eval(regs, modulus), f.eval(regs, modulus)) {
                    (Value::Nat(c), Value::Nat(t), Value::Nat(f)) => {
                        Value::Nat(if c != 0 { t } else { f })
                    }
                    _ => Value::Bot,
                }
            }
        }
    }

    pub fn display<'a>(&'a self, regs: &'a Registers) -> impl fmt::Display + 'a {
        ExprDisplay { e: self, regs, top: true }
    }
}

struct ExprDisplay<'a> {
    e: &'a Expr,
    regs: &'a Registers,
    top: bool,
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e| ExprDisplay { e, regs: self.regs, top: false };
        match self.e {
            Expr::Const(Value::Nat(n)) => write!(f, "{n}"),
            Expr::Const(Value::Bot) => f.write_str("⊥"),
            Expr::Reg(r) => f.write_str(self.regs.name(*r)),
            Expr::Un(op, a) => {
                let kw = match op {
                    UnOp::Neg => "neg",
                    UnOp::Not => "not",
                };
                write!(f, "{kw} {}", sub(a))
            }
            Expr::Bin(op, a, b) => {
                if self.top {
                    write!(f, "{} {} {}", sub(a), op.symbol(), sub(b))
                } else {
                    write!(f, "({} {} {})", sub(a), op.symbol(), sub(b))
                }
            }
            Expr::Ite(c, t, e) => write!(
                f,
                "ite({}, {}, {})",
                ExprDisplay { e: c, regs: self.regs, top: true },
                ExprDisplay { e: t, regs: self.regs, top: true },
                ExprDisplay { e, regs: self.regs, top: true }
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// No register may be undefined.
    Total,
    /// Undefined values propagate.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("expression reads an undefined value in total mode")]
    Undefined,
}

pub fn eval_expr(e: &Expr, regs: &[Value], modulus: u64, mode: EvalMode) -> Result<Value, EvalError> {
    let v = e.eval(regs, modulus);
    match (mode, v) {
        (EvalMode::Total, Value::Bot) => Err(EvalError::Undefined),
        _ => Ok(v),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    Skip,
    Assign { dst: Reg, expr: Expr },
    /// `dst <- guard ? expr`: assigns when the guard evaluates to 0.
    CondAssign { dst: Reg, guard: Expr, expr: Expr },
    Load { dst: Reg, addr: Expr },
    Store { src: Reg, addr: Expr },
    Jmp { target: Expr },
    Beqz { cond: Reg, target: Value },
    Barrier,
}

impl Instr {
    pub fn is_branch(&self) -> bool {
        matches!(self, Instr::Beqz { .. })
    }

    pub fn display<'a>(&'a self, regs: &'a Registers) -> impl fmt::Display + 'a {
        InstrDisplay { i: self, regs }
    }
}

struct InstrDisplay<'a> {
    i: &'a Instr,
    regs: &'a Registers,
}

impl fmt::Display for InstrDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = |x: &Reg| self.regs.name(*x).to_string();
        match self.i {
            Instr::Skip => f.write_str("skip"),
            Instr::Barrier => f.write_str("spbarr"),
            Instr::Assign { dst, expr } => write!(f, "{} <- {}", r(dst), expr.display(self.regs)),
            Instr::CondAssign { dst, guard, expr } => write!(
                f,
                "{} <- {} ? {}",
                r(dst),
                guard.display(self.regs),
                expr.display(self.regs)
            ),
            Instr::Load { dst, addr } => write!(f, "load {}, {}", r(dst), addr.display(self.regs)),
            Instr::Store { src, addr } => write!(f, "store {}, {}", r(src), addr.display(self.regs)),
            Instr::Jmp { target } => write!(f, "jmp {}", target.display(self.regs)),
            Instr::Beqz { cond, target } => write!(f, "beqz {}, {}", r(cond), target),
        }
    }
}

/// A program: instructions at consecutive addresses from 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    instrs: Vec<Instr>,
    regs: Registers,
    modulus: u64,
}

impl Program {
    pub fn new(instrs: Vec<Instr>, regs: Registers) -> Self {
        Program { instrs, regs, modulus: DEFAULT_MODULUS }
    }

    pub fn with_modulus(mut self, modulus: u64) -> Self {
        assert!(modulus >= 2, "modulus must be at least 2");
        self.modulus = modulus;
        self
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    pub fn registers(&self) -> &Registers {
        &self.regs
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    /// `p(ℓ)`: the instruction at `pc`, if any.
    pub fn at(&self, pc: Value) -> Option<&Instr> {
        match pc {
            Value::Nat(n) => usize::try_from(n).ok().and_then(|i| self.instrs.get(i)),
            Value::Bot => None,
        }
    }

    pub fn reg(&self, name: &str) -> Option<Reg> {
        self.regs.get(name)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.instrs {
            writeln!(f, "{}", i.display(&self.regs))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// An assignment or load whose destination is `pc`.
    WritesPc { addr: u64 },
    /// A branch whose target is its own fall-through address.
    FallThroughTarget { addr: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WritesPc { addr } => write!(f, "address {addr}: instruction writes pc"),
            Violation::FallThroughTarget { addr } => {
                write!(f, "address {addr}: branch targets its fall-through address")
            }
        }
    }
}

pub fn check_well_formed(p: &Program) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    for (addr, i) in p.instrs.iter().enumerate() {
        let addr = addr as u64;
        match i {
            Instr::Assign { dst, .. } | Instr::CondAssign { dst, .. } | Instr::Load { dst, .. }
                if *dst == Reg::PC =>
            {
                out.push(Violation::WritesPc { addr })
            }
            Instr::Beqz { target: Value::Nat(t), .. } if *t == addr + 1 => {
                out.push(Violation::FallThroughTarget { addr })
            }
            _ => {}
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: duplicate label `{label}`")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: unknown label `{label}`")]
    UnknownLabel { line: usize, label: String },
    #[error("program is not well-formed: {}", fmt_violations(.0))]
    IllFormed(Vec<Violation>),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Parses program text and checks well-formedness.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let p = parse_unchecked(text)?;
    check_well_formed(&p).map_err(ParseError::IllFormed)?;
    Ok(p)
}

const KEYWORDS: &[&str] = &[
    "skip", "spbarr", "load", "store", "jmp", "beqz", "end", "and", "or", "xor", "not", "neg", "ite",
];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(u64),
    Arrow,
    Question,
    Comma,
    Colon,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Lt,
    Eq,
    Amp,
    Pipe,
    Caret,
    Bang,
}

struct Lexed {
    tok: Tok,
    col: usize,
}

fn lex(line: &str, lineno: usize) -> Result<Vec<Lexed>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Lexed { tok: Tok::Ident(chars[start..i].iter().collect()), col });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let n = s.parse().map_err(|_| ParseError::Syntax {
                line: lineno,
                col,
                msg: format!("number `{s}` out of range"),
            })?;
            out.push(Lexed { tok: Tok::Num(n), col });
            continue;
        }
        let tok = match c {
            '<' if chars.get(i + 1) == Some(&'-') => {
                i += 1;
                Tok::Arrow
            }
            '←' => Tok::Arrow,
            '?' => Tok::Question,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '<' => Tok::Lt,
            '=' => Tok::Eq,
            '&' => Tok::Amp,
            '|' => Tok::Pipe,
            '^' => Tok::Caret,
            '!' => Tok::Bang,
            _ => {
                return Err(ParseError::Syntax {
                    line: lineno,
                    col,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        };
        i += 1;
        out.push(Lexed { tok, col });
    }
    Ok(out)
}

struct Line {
    no: usize,
    toks: Vec<Lexed>,
    len: usize,
}

/// Splits every source line into label definitions and an optional
/// instruction token list.
fn split_lines(text: &str) -> Result<(Vec<Line>, Vec<(String, usize, u64)>), ParseError> {
    let mut lines = Vec::new();
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let no = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let toks = lex(body, no)?;
        let mut rest = &toks[..];
        while rest.len() >= 2 {
            match (&rest[0].tok, &rest[1].tok) {
                (Tok::Ident(name), Tok::Colon) => {
                    if KEYWORDS.contains(&name.as_str()) {
                        return Err(ParseError::Syntax {
                            line: no,
                            col: rest[0].col,
                            msg: format!("`{name}` is reserved"),
                        });
                    }
                    labels.push((name.clone(), no, lines.len() as u64));
                    rest = &rest[2..];
                }
                _ => break,
            }
        }
        if rest.is_empty() {
            continue;
        }
        let skip = toks.len() - rest.len();
        let toks: Vec<Lexed> = toks.into_iter().skip(skip).collect();
        lines.push(Line { no, toks, len: body.chars().count() });
    }
    Ok((lines, labels))
}

/// Parses program text without the well-formedness check.
pub fn parse_unchecked(text: &str) -> Result<Program, ParseError> {
    let (lines, label_defs) = split_lines(text)?;
    let mut labels: Vec<(String, u64)> = Vec::new();
    for (name, line, addr) in label_defs {
        if labels.iter().any(|(n, _)| *n == name) {
            return Err(ParseError::DuplicateLabel { line, label: name });
        }
        labels.push((name, addr));
    }
    let mut regs = Registers::new();
    let mut instrs = Vec::with_capacity(lines.len());
    for line in &lines {
        let mut p = LineParser { line, pos: 0, labels: &labels, regs: &mut regs };
        let i = p.instr()?;
        p.finish()?;
        instrs.push(i);
    }
    Ok(Program::new(instrs, regs))
}

struct LineParser<'a> {
    line: &'a Line,
    pos: usize,
    labels: &'a [(String, u64)],
    regs: &'a mut Registers,
}

impl LineParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.line.toks.get(self.pos).map(|l| &l.tok)
    }

    fn col(&self) -> usize {
        self.line.toks.get(self.pos).map(|l| l.col).unwrap_or(self.line.len + 1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { line: self.line.no, col: self.col(), msg: msg.into() })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.line.toks.get(self.pos).map(|l| l.tok.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.pos < self.line.toks.len() {
            self.err("unexpected trailing input")
        } else {
            Ok(())
        }
    }

    fn register(&mut self) -> Result<Reg, ParseError> {
        match self.peek() {
            Some(Tok::Ident(name)) if !KEYWORDS.contains(&name.as_str()) => {
                if self.labels.iter().any(|(l, _)| l == name) {
                    return self.err(format!("`{name}` is a label, not a register"));
                }
                let name = name.clone();
                self.pos += 1;
                Ok(self.regs.intern(&name))
            }
            _ => self.err("expected register"),
        }
    }

    fn instr(&mut self) -> Result<Instr, ParseError> {
        if self.eat_kw("skip") {
            return Ok(Instr::Skip);
        }
        if self.eat_kw("spbarr") {
            return Ok(Instr::Barrier);
        }
        if self.eat_kw("load") {
            let dst = self.register()?;
            self.expect(Tok::Comma, "`,`")?;
            let addr = self.expr()?;
            return Ok(Instr::Load { dst, addr });
        }
        if self.eat_kw("store") {
            let src = self.register()?;
            self.expect(Tok::Comma, "`,`")?;
            let addr = self.expr()?;
            return Ok(Instr::Store { src, addr });
        }
        if self.eat_kw("jmp") {
            let target = self.expr()?;
            return Ok(Instr::Jmp { target });
        }
        if self.eat_kw("beqz") {
            let cond = self.register()?;
            self.expect(Tok::Comma, "`,`")?;
            let target = self.target()?;
            return Ok(Instr::Beqz { cond, target });
        }
        let dst = self.register()?;
        self.expect(Tok::Arrow, "`<-`")?;
        let first = self.expr()?;
        if self.eat(&Tok::Question) {
            let expr = self.expr()?;
            return Ok(Instr::CondAssign { dst, guard: first, expr });
        }
        Ok(Instr::Assign { dst, expr: first })
    }

    fn target(&mut self) -> Result<Value, ParseError> {
        match self.bump() {
            Some(Tok::Num(n)) => Ok(Value::Nat(n)),
            Some(Tok::Ident(s)) if s == "end" => Ok(Value::Bot),
            Some(Tok::Ident(s)) => match self.labels.iter().find(|(l, _)| *l == s) {
                Some((_, addr)) => Ok(Value::Nat(*addr)),
                None => Err(ParseError::UnknownLabel { line: self.line.no, label: s }),
            },
            _ => {
                self.pos -= 1;
                self.err("expected branch target")
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(0)
    }

    fn binop_at(&self, level: usize) -> Option<BinOp> {
        let t = self.peek()?;
        let op = match (level, t) {
            (0, Tok::Pipe) => BinOp::Or,
            (0, Tok::Ident(s)) if s == "or" => BinOp::Or,
            (1, Tok::Caret) => BinOp::Xor,
            (1, Tok::Ident(s)) if s == "xor" => BinOp::Xor,
            (2, Tok::Amp) => BinOp::And,
            (2, Tok::Ident(s)) if s == "and" => BinOp::And,
            (3, Tok::Lt) => BinOp::Lt,
            (3, Tok::Eq) => BinOp::Eq,
            (4, Tok::Plus) => BinOp::Add,
            (4, Tok::Minus) => BinOp::Sub,
            (5, Tok::Star) => BinOp::Mul,
            _ => return None,
        };
        Some(op)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, ParseError> {
        if level > 5 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.binop_at(level) {
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) || self.eat_kw("neg") {
            return Ok(Expr::un(UnOp::Neg, self.unary()?));
        }
        if self.eat(&Tok::Bang) || self.eat_kw("not") {
            return Ok(Expr::un(UnOp::Not, self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Expr::nat(n))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(s)) if s == "ite" => {
                self.pos += 1;
                self.expect(Tok::LParen, "`(`")?;
                let c = self.expr()?;
                self.expect(Tok::Comma, "`,`")?;
                let t = self.expr()?;
                self.expect(Tok::Comma, "`,`")?;
                let f = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::ite(c, t, f))
            }
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                if let Some((_, addr)) = self.labels.iter().find(|(l, _)| *l == s) {
                    self.pos += 1;
                    return Ok(Expr::nat(*addr));
                }
                Ok(Expr::Reg(self.register()?))
            }
            _ => self.err("expected expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = "x <- y < size_A\nbeqz x, end\nload z, A + y\nz <- z * 64\nload w, B + z\n";

    #[test]
    fn parses_single_skip() {
        let p = parse_program("skip").unwrap();
        assert_eq!(p.instrs(), &[Instr::Skip]);
    }

    #[test]
    fn parses_bounds_check_listing() {
        let p = parse_program(EXAMPLE1).unwrap();
        assert_eq!(p.len(), 5);
        let x = p.reg("x").unwrap();
        assert_eq!(p.instrs()[1], Instr::Beqz { cond: x, target: Value::Bot });
        assert!(check_well_formed(&p).is_ok());
    }

    #[test]
    fn fall_through_branch_is_rejected() {
        let err = parse_program("beqz x, L1\nL1: skip").unwrap_err();
        assert_eq!(err, ParseError::IllFormed(vec![Violation::FallThroughTarget { addr: 0 }]));
    }

    #[test]
    fn assigning_pc_is_a_violation() {
        let p = Program::new(vec![Instr::Assign { dst: Reg::PC, expr: Expr::nat(3) }], Registers::new());
        assert_eq!(check_well_formed(&p), Err(vec![Violation::WritesPc { addr: 0 }]));
    }

    #[test]
    fn label_errors() {
        assert!(matches!(
            parse_program("L: skip\nL: skip"),
            Err(ParseError::DuplicateLabel { line: 2, .. })
        ));
        assert!(matches!(
            parse_program("beqz x, Nowhere"),
            Err(ParseError::UnknownLabel { line: 1, .. })
        ));
        assert!(matches!(
            parse_program("x <- 3 +"),
            Err(ParseError::Syntax { line: 1, col: 9, .. })
        ));
    }

    #[test]
    fn comments_labels_and_conditional_update() {
        let p = parse_program("# header\nstart: x <- 1 ? 7 # set\n  beqz x, start\n").unwrap();
        assert_eq!(p.len(), 2);
        assert!(matches!(p.instrs()[0], Instr::CondAssign { .. }));
        assert_eq!(p.instrs()[1], Instr::Beqz { cond: p.reg("x").unwrap(), target: Value::Nat(0) });
    }

    #[test]
    fn evaluation_examples() {
        let lt = Expr::bin(BinOp::Lt, Expr::nat(3), Expr::nat(5));
        assert_eq!(eval_expr(&lt, &[], 16, EvalMode::Total), Ok(Value::Nat(1)));
        let regs = [Value::Nat(0), Value::Bot];
        let z = Expr::Reg(Reg(1));
        assert_eq!(eval_expr(&z, &regs, 16, EvalMode::Partial), Ok(Value::Bot));
        let plus = Expr::bin(BinOp::Add, z.clone(), Expr::nat(1));
        assert_eq!(eval_expr(&plus, &regs, 16, EvalMode::Partial), Ok(Value::Bot));
        assert_eq!(eval_expr(&plus, &regs, 16, EvalMode::Total), Err(EvalError::Undefined));
    }

    #[test]
    fn modular_operators() {
        assert_eq!(BinOp::Sub.apply(1, 3, 16), 14);
        assert_eq!(BinOp::Mul.apply(5, 4, 16), 4);
        assert_eq!(UnOp::Neg.apply(1, 16), 15);
        assert_eq!(UnOp::Not.apply(0, 16), 1);
        assert_eq!(UnOp::Not.apply(9, 16), 0);
        assert_eq!(BinOp::Or.apply(2, 1, 16), 3);
        let ite = Expr::ite(Expr::nat(2), Expr::nat(7), Expr::nat(9));
        assert_eq!(ite.eval(&[], 16), Value::Nat(7));
        let ite = Expr::ite(Expr::nat(0), Expr::nat(7), Expr::nat(9));
        assert_eq!(ite.eval(&[], 16), Value::Nat(9));
    }

    #[test]
    fn precedence() {
        let p = parse_program("x <- 1 + 2 * 3 < 8 and 1").unwrap();
        let Instr::Assign { expr, .. } = &p.instrs()[0] else { panic!() };
        assert_eq!(expr.eval(&[Value::Nat(0); 2], 256), Value::Nat(1));
        assert_eq!(expr.display(p.registers()).to_string(), "((1 + (2 * 3)) < 8) and 1");
    }

    #[test]
    fn print_then_parse_is_identity() {
        let src = "load y, 0\nx <- neg (y - 1) xor not y\nx <- y = 2 ? ite(x, 1, y)\nL: store x, y * 3\nbeqz x, end\njmp L\nbeqz y, L\nspbarr\nskip\n";
        let p = parse_program(src).unwrap();
        let q = parse_program(&p.to_string()).unwrap();
        assert_eq!(p, q);
    }
}

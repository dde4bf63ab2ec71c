use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use contractbench::analysis::{
    check_contract_satisfaction, check_lattice, check_ni, check_sni, check_wsni, classify_constant_time,
    classify_sandboxing, Cell, Counterexample, Policy, Semantics, StateDomain, Verdict,
};
use contractbench::contracts::{trace, ContractConfig, ContractId};
use contractbench::countermeasures::Countermeasure;
use contractbench::pipeline::{hw_run, HwConfig};
use contractbench::{arch_run, corpus, gen, parse_program, text, ArchState, Program};

#[derive(Parser)]
#[command(name = "contractbench", version, about = "Leakage contracts for speculative execution")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[arg(long, global = true, value_enum, default_value_t = Format::Plain)]
    format: Format,
    /// Step bound for every run.
    #[arg(long, global = true)]
    fuel: Option<u64>,
    /// Speculative window of the speculative contracts.
    #[arg(long, global = true)]
    window: Option<u64>,
    /// Mask unlabelled rather than labelled assignments.
    #[arg(long, global = true)]
    mask_literal: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Plain,
    JsonLines,
}

#[derive(Subcommand)]
enum Cmd {
    /// Architectural run to the final state.
    Run(Single),
    /// Contract trace.
    Trace {
        #[arg(long)]
        contract: ContractId,
        #[command(flatten)]
        single: Single,
    },
    /// Hardware trace, one adversary view per step.
    Hwrun {
        #[command(flatten)]
        hw: HwArgs,
        #[command(flatten)]
        single: Single,
    },
    /// Decide a security property over a state domain.
    Check {
        #[command(subcommand)]
        what: CheckCmd,
    },
    /// Table rows for a list of programs.
    Classify {
        #[command(subcommand)]
        what: ClassifyCmd,
    },
    /// Test every edge of the contract lattice.
    Lattice {
        #[arg(long)]
        domain: Option<PathBuf>,
        /// Also test this many random 8-instruction programs.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Programs (corpus names or files); the whole corpus if empty.
        programs: Vec<String>,
    },
}

#[derive(Args)]
struct Single {
    /// Corpus name or program file.
    program: String,
    /// Initial state file (`reg name=value` / `mem addr=value` lines).
    #[arg(long)]
    state: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct HwArgs {
    /// Hardware configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration's countermeasure.
    #[arg(long)]
    countermeasure: Option<Countermeasure>,
}

#[derive(Args)]
struct Target {
    program: String,
    #[arg(long)]
    domain: Option<PathBuf>,
    /// Write the two states of a counterexample to `<prefix>.1.state` and
    /// `<prefix>.2.state`.
    #[arg(long)]
    emit: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CheckCmd {
    /// Hardware satisfies a contract.
    Sat {
        #[arg(long)]
        contract: ContractId,
        #[command(flatten)]
        hw: HwArgs,
        #[command(flatten)]
        target: Target,
    },
    /// Non-interference under a contract, or under the hardware when
    /// `--config`/`--countermeasure` is given instead.
    Ni {
        #[arg(long)]
        contract: Option<ContractId>,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[command(flatten)]
        hw: HwArgs,
        #[command(flatten)]
        target: Target,
    },
    /// Speculative non-interference.
    Sni {
        #[arg(long)]
        contract: ContractId,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[command(flatten)]
        target: Target,
    },
    /// Weak speculative non-interference.
    Wsni {
        #[arg(long)]
        contract: ContractId,
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Subcommand)]
enum ClassifyCmd {
    Sandbox(Rows),
    Ct(Rows),
}

#[derive(Args)]
struct Rows {
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(required = true)]
    programs: Vec<String>,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

/// A corpus name, or else a path to a program file.
fn load_program(arg: &str) -> Result<(String, Program), Failure> {
    if let Some(p) = corpus::program(arg) {
        return Ok((arg.to_string(), p));
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(Failure(format!("`{arg}` is neither a corpus program nor a file")));
    }
    let p = parse_program(&read(path)?).map_err(|e| Failure(format!("{arg}: {e}")))?;
    Ok((arg.to_string(), p))
}

fn load_state(p: &Program, path: Option<&PathBuf>) -> Result<ArchState, Failure> {
    match path {
        Some(f) => Ok(text::parse_state(p, &read(f)?)?),
        None => Ok(ArchState::initial(p)),
    }
}

fn load_domain(name: &str, path: Option<&PathBuf>) -> Result<StateDomain, Failure> {
    match path {
        Some(f) => Ok(text::parse_domain(&read(f)?)?),
        None if corpus::source(name).is_some() => Ok(corpus::default_domain(name)),
        None => Ok(StateDomain::desk()),
    }
}

fn load_policy(name: &str, path: Option<&PathBuf>) -> Result<Policy, Failure> {
    match path {
        Some(f) => Ok(text::parse_policy(&read(f)?)?),
        None if corpus::source(name).is_some() => Ok(corpus::table_policy()),
        None => Ok(Policy::new()),
    }
}

struct Ctx {
    format: Format,
    fuel: Option<u64>,
    window: Option<u64>,
    mask_literal: bool,
}

impl Ctx {
    fn contract_config(&self, hw: Option<&HwConfig>) -> ContractConfig {
        let mut c = ContractConfig::default();
        if let Some(h) = hw {
            c.window = h.buffer_size as u64 + 2;
        }
        if let Some(w) = self.window {
            c.window = w;
        }
        if let Some(f) = self.fuel {
            c.fuel = f;
        }
        c
    }

    fn hw_config(&self, a: &HwArgs) -> Result<HwConfig, Failure> {
        let mut cfg = match &a.config {
            Some(f) => text::parse_hw_config(&read(f)?)?,
            None => HwConfig::default(),
        };
        if let Some(cm) = a.countermeasure {
            cfg.countermeasure = cm;
        }
        if let Some(f) = self.fuel {
            cfg.fuel = f;
        }
        cfg.mask_literal |= self.mask_literal;
        Ok(cfg)
    }

    fn json(&self) -> bool {
        self.format == Format::JsonLines
    }
}

fn report(ctx: &Ctx, p: &Program, what: &str, v: &Verdict, emit: Option<&PathBuf>) -> Outcome {
    match v {
        Verdict::Pass => {
            if ctx.json() {
                println!("{}", json!({"check": what, "verdict": "pass"}));
            } else {
                println!("{what}: pass");
            }
            Ok(true)
        }
        Verdict::Fail(cex) => {
            print_counterexample(ctx, p, what, cex);
            if let Some(prefix) = emit {
                for (k, s) in [(1, &cex.first), (2, &cex.second)] {
                    let path = format!("{}.{k}.state", prefix.display());
                    fs::write(&path, text::format_state(p, s)).map_err(|e| Failure(format!("{path}: {e}")))?;
                }
            }
            Ok(false)
        }
    }
}

fn print_counterexample(ctx: &Ctx, p: &Program, what: &str, cex: &Counterexample) {
    if ctx.json() {
        println!(
            "{}",
            json!({
                "check": what,
                "verdict": "counterexample",
                "position": cex.position,
                "first": text::format_state(p, &cex.first),
                "second": text::format_state(p, &cex.second),
                "left": cex.left,
                "right": cex.right,
            })
        );
        return;
    }
    println!("{what}: counterexample, {cex}");
    for (label, s) in [("first", &cex.first), ("second", &cex.second)] {
        println!("# {label} state");
        print!("{}", text::format_state(p, s));
    }
}

fn cmd_run(ctx: &Ctx, s: &Single) -> Outcome {
    let (_, p) = load_program(&s.program)?;
    let s0 = load_state(&p, s.state.as_ref())?;
    let (fin, steps) = arch_run(&p, &s0, ctx.fuel.unwrap_or(contractbench::arch::DEFAULT_FUEL))?;
    if ctx.json() {
        println!("{}", json!({"steps": steps, "state": text::format_state(&p, &fin)}));
    } else {
        println!("steps {steps}");
        print!("{}", text::format_state(&p, &fin));
    }
    Ok(true)
}

fn cmd_trace(ctx: &Ctx, c: ContractId, s: &Single) -> Outcome {
    let (_, p) = load_program(&s.program)?;
    let s0 = load_state(&p, s.state.as_ref())?;
    let t = trace(&p, &s0, c, &ctx.contract_config(None))?;
    for line in t.lines() {
        if ctx.json() {
            println!("{}", json!({"contract": c.name(), "observation": line}));
        } else {
            println!("{line}");
        }
    }
    Ok(true)
}

fn cmd_hwrun(ctx: &Ctx, hw: &HwArgs, s: &Single) -> Outcome {
    let (_, p) = load_program(&s.program)?;
    let s0 = load_state(&p, s.state.as_ref())?;
    let cfg = ctx.hw_config(hw)?;
    let run = hw_run(&p, &s0, &cfg)?;
    for (k, view) in run.trace.iter().enumerate() {
        let dir = if k == 0 { "init".to_string() } else { run.directives[k - 1].to_string() };
        if ctx.json() {
            println!("{}", json!({"step": k, "dir": dir, "view": view.to_string()}));
        } else {
            println!("step {k} dir={dir} view={view}");
        }
    }
    Ok(true)
}

fn cmd_check(ctx: &Ctx, what: &CheckCmd) -> Outcome {
    match what {
        CheckCmd::Sat { contract, hw, target } => {
            let (name, p) = load_program(&target.program)?;
            let dom = load_domain(&name, target.domain.as_ref())?;
            let cfg = ctx.hw_config(hw)?;
            let v = check_contract_satisfaction(&p, *contract, &ctx.contract_config(Some(&cfg)), &cfg, &dom)?;
            let label = format!("sat {} {} {name}", cfg.countermeasure, contract);
            report(ctx, &dom.program(&p), &label, &v, target.emit.as_ref())
        }
        CheckCmd::Ni { contract, policy, hw, target } => {
            let (name, p) = load_program(&target.program)?;
            let dom = load_domain(&name, target.domain.as_ref())?;
            let pol = load_policy(&name, policy.as_ref())?;
            let sem = match contract {
                Some(c) => Semantics::Contract(*c, ctx.contract_config(None)),
                None if hw.config.is_some() || hw.countermeasure.is_some() => Semantics::Hardware(ctx.hw_config(hw)?),
                None => return Err(Failure("give --contract or a hardware --config/--countermeasure".into())),
            };
            let v = check_ni(&p, &pol, &sem, &dom)?;
            report(ctx, &dom.program(&p), &format!("ni {sem} {name}"), &v, target.emit.as_ref())
        }
        CheckCmd::Sni { contract, policy, target } => {
            let (name, p) = load_program(&target.program)?;
            let dom = load_domain(&name, target.domain.as_ref())?;
            let pol = load_policy(&name, policy.as_ref())?;
            let v = check_sni(&p, &pol, *contract, &ctx.contract_config(None), &dom)?;
            report(ctx, &dom.program(&p), &format!("sni {contract} {name}"), &v, target.emit.as_ref())
        }
        CheckCmd::Wsni { contract, target } => {
            let (name, p) = load_program(&target.program)?;
            let dom = load_domain(&name, target.domain.as_ref())?;
            let v = check_wsni(&p, *contract, &ctx.contract_config(None), &dom)?;
            report(ctx, &dom.program(&p), &format!("wsni {contract} {name}"), &v, target.emit.as_ref())
        }
    }
}

fn cmd_classify(ctx: &Ctx, sandbox: bool, rows: &Rows) -> Outcome {
    let ccfg = ctx.contract_config(None);
    if !ctx.json() {
        let heads: Vec<String> = contractbench::analysis::COLUMNS.iter().map(|c| format!("{:<8}", c.name())).collect();
        println!("{:<8} {}", "program", heads.join(" "));
    }
    for arg in &rows.programs {
        let (name, p) = load_program(arg)?;
        let dom = load_domain(&name, rows.domain.as_ref())?;
        let pol = load_policy(&name, rows.policy.as_ref())?;
        let row = if sandbox {
            classify_sandboxing(&p, &pol, &ccfg, &dom)?
        } else {
            classify_constant_time(&p, &pol, &ccfg, &dom)?
        };
        if ctx.json() {
            let cells: serde_json::Map<String, serde_json::Value> =
                row.cells.iter().map(|(c, cell)| (c.name().to_string(), json!(cell.to_string()))).collect();
            println!("{}", json!({"program": name, "cells": cells}));
        } else {
            let cells: Vec<String> = row.cells.iter().map(|(_, c): &(ContractId, Cell)| format!("{:<8}", c.to_string())).collect();
            println!("{name:<8} {}", cells.join(" "));
        }
    }
    Ok(true)
}

fn cmd_lattice(ctx: &Ctx, domain: Option<&PathBuf>, random: usize, seed: u64, names: &[String]) -> Outcome {
    let mut programs: Vec<Program> = if names.is_empty() {
        corpus::all().into_iter().map(|(_, p)| p).collect()
    } else {
        names.iter().map(|n| load_program(n).map(|(_, p)| p)).collect::<Result<_, _>>()?
    };
    programs.extend(gen::random_programs(seed, random, 8));
    let dom = match domain {
        Some(f) => text::parse_domain(&read(f)?)?,
        None => StateDomain::desk(),
    };
    let report = check_lattice(&programs, &dom, &ctx.contract_config(None), &[])?;
    for e in &report.edges {
        let ok = e.witness.is_none();
        if ctx.json() {
            println!(
                "{}",
                json!({"stronger": e.stronger.name(), "weaker": e.weaker.name(), "pass": ok,
                       "witness_program": e.witness.as_ref().map(|(i, _)| *i)})
            );
        } else {
            let tail = match &e.witness {
                None => "pass".to_string(),
                Some((i, cex)) => format!("witness in program {i}: {cex}"),
            };
            println!("{} ⊒ {}: {tail}", e.stronger, e.weaker);
        }
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { format: cli.format, fuel: cli.fuel, window: cli.window, mask_literal: cli.mask_literal };
    let out = match &cli.cmd {
        Cmd::Run(s) => cmd_run(&ctx, s),
        Cmd::Trace { contract, single } => cmd_trace(&ctx, *contract, single),
        Cmd::Hwrun { hw, single } => cmd_hwrun(&ctx, hw, single),
        Cmd::Check { what } => cmd_check(&ctx, what),
        Cmd::Classify { what } => match what {
            ClassifyCmd::Sandbox(r) => cmd_classify(&ctx, true, r),
            ClassifyCmd::Ct(r) => cmd_classify(&ctx, false, r),
        },
        Cmd::Lattice { domain, random, seed, programs } => cmd_lattice(&ctx, domain.as_ref(), *random, *seed, programs),
    };
    match out {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

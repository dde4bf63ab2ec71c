//! Python bindings: parse programs, run them architecturally, under a
//! contract or on the modelled hardware, and run the security checks.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use contractbench::analysis::{self, Verdict};
use contractbench::contracts::{ContractConfig, ContractId};
use contractbench::countermeasures::Countermeasure;
use contractbench::pipeline::HwConfig;
use contractbench::{corpus, text, ArchState, Memory};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn contract(name: &str) -> PyResult<ContractId> {
    name.parse().map_err(err)
}

fn hw_config(config: Option<&str>, countermeasure: Option<&str>) -> PyResult<HwConfig> {
    let mut cfg = match config {
        Some(t) => text::parse_hw_config(t).map_err(err)?,
        None => HwConfig::default(),
    };
    if let Some(cm) = countermeasure {
        cfg.countermeasure = cm.parse::<Countermeasure>().map_err(err)?;
    }
    Ok(cfg)
}

/// A parsed, well-formed program.
#[pyclass(name = "Program", module = "contractbench_py")]
struct PyProgram {
    inner: contractbench::Program,
}

impl PyProgram {
    fn state(&self, mem: Option<BTreeMap<u64, u64>>) -> ArchState {
        let mem: Memory = mem.unwrap_or_default().into_iter().collect();
        ArchState::with_memory(&self.inner, mem)
    }
}

#[pymethods]
impl PyProgram {
    #[new]
    fn new(source: &str) -> PyResult<Self> {
        contractbench::parse_program(source).map(|inner| PyProgram { inner }).map_err(err)
    }

    /// One of the shipped example programs.
    #[staticmethod]
    fn corpus(name: &str) -> PyResult<Self> {
        corpus::program(name)
            .map(|inner| PyProgram { inner })
            .ok_or_else(|| PyValueError::new_err(format!("no corpus program `{name}`")))
    }

    #[staticmethod]
    fn corpus_names() -> Vec<&'static str> {
        corpus::SOURCES.iter().map(|(n, _)| *n).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    /// Final state of the architectural run as `(registers, memory)`.
    #[pyo3(signature = (mem=None))]
    fn run(&self, mem: Option<BTreeMap<u64, u64>>) -> PyResult<(BTreeMap<String, String>, BTreeMap<u64, u64>)> {
        let s0 = self.state(mem);
        let (fin, _) = contractbench::arch_run(&self.inner, &s0, contractbench::arch::DEFAULT_FUEL).map_err(err)?;
        let regs = self.inner.registers().iter().map(|(r, n)| (n.to_string(), fin.regs.get(r).to_string())).collect();
        Ok((regs, fin.mem.iter().collect()))
    }

    /// Contract trace, one observation per string.
    #[pyo3(signature = (contract_name, mem=None, window=6))]
    fn trace(&self, contract_name: &str, mem: Option<BTreeMap<u64, u64>>, window: u64) -> PyResult<Vec<String>> {
        let cfg = ContractConfig { window, ..ContractConfig::default() };
        let t = contractbench::contracts::trace(&self.inner, &self.state(mem), contract(contract_name)?, &cfg)
            .map_err(err)?;
        Ok(t.lines())
    }

    /// Adversary views of a hardware run. `config` uses the `key = value`
    /// text format.
    #[pyo3(signature = (mem=None, config=None, countermeasure=None))]
    fn hw_run(
        &self,
        mem: Option<BTreeMap<u64, u64>>,
        config: Option<&str>,
        countermeasure: Option<&str>,
    ) -> PyResult<Vec<String>> {
        let cfg = hw_config(config, countermeasure)?;
        let run = contractbench::hw_run(&self.inner, &self.state(mem), &cfg).map_err(err)?;
        Ok(run.lines())
    }
}

fn verdict(p: &contractbench::Program, v: Verdict) -> Option<BTreeMap<&'static str, String>> {
    v.counterexample().map(|c| {
        BTreeMap::from([
            ("position", c.position.to_string()),
            ("first", text::format_state(p, &c.first)),
            ("second", text::format_state(p, &c.second)),
        ])
    })
}

fn domain(program: &str, domain_text: Option<&str>) -> PyResult<analysis::StateDomain> {
    match domain_text {
        Some(t) => text::parse_domain(t).map_err(err),
        None => Ok(corpus::default_domain(program)),
    }
}

/// Checks that the hardware satisfies a contract; returns `None` or a
/// counterexample summary.
#[pyfunction]
#[pyo3(signature = (program, contract_name, countermeasure="none", config=None, domain_text=None))]
fn check_sat(
    program: &PyProgram,
    contract_name: &str,
    countermeasure: &str,
    config: Option<&str>,
    domain_text: Option<&str>,
) -> PyResult<Option<BTreeMap<&'static str, String>>> {
    let hw = hw_config(config, Some(countermeasure))?;
    let ccfg = ContractConfig { window: hw.buffer_size as u64 + 2, ..ContractConfig::default() };
    let dom = domain("", domain_text)?;
    let v = analysis::check_contract_satisfaction(&program.inner, contract(contract_name)?, &ccfg, &hw, &dom)
        .map_err(err)?;
    Ok(verdict(&program.inner, v))
}

/// A sandboxing (`"sandbox"`) or constant-time (`"ct"`) table row for a
/// corpus program, as contract name to cell text.
#[pyfunction]
#[pyo3(signature = (kind, name, policy_text=None, domain_text=None))]
fn classify(
    kind: &str,
    name: &str,
    policy_text: Option<&str>,
    domain_text: Option<&str>,
) -> PyResult<BTreeMap<String, String>> {
    let p = PyProgram::corpus(name)?.inner;
    let pol = match policy_text {
        Some(t) => text::parse_policy(t).map_err(err)?,
        None => corpus::table_policy(),
    };
    let dom = domain(name, domain_text)?;
    let ccfg = ContractConfig::default();
    let row = match kind {
        "sandbox" => analysis::classify_sandboxing(&p, &pol, &ccfg, &dom),
        "ct" => analysis::classify_constant_time(&p, &pol, &ccfg, &dom),
        other => return Err(PyValueError::new_err(format!("unknown table `{other}`"))),
    }
    .map_err(err)?;
    Ok(row.cells.iter().map(|(c, cell)| (c.name().to_string(), cell.to_string())).collect())
}

#[pymodule]
fn contractbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProgram>()?;
    m.add_function(wrap_pyfunction!(check_sat, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    Ok(())
}

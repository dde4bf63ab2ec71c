//! Executable hardware-software contracts for secure speculation.
//!
//! The crate interprets μAsm programs under an architectural semantics, a family
//! of leakage contracts, and a speculative out-of-order pipeline with pluggable
//! countermeasures, and decides security properties by bounded enumeration.

pub mod analysis;
pub mod arch;
pub mod contracts;
pub mod corpus;
pub mod countermeasures;
pub mod gen;
pub mod isa;
pub mod pipeline;
pub mod text;
pub mod uarch;

pub use arch::{arch_run, arch_step, ArchError, ArchState, Memory, RegFile};
pub use contracts::{ContractId, ContractTrace, Observation, Window};
pub use isa::{parse_program, EvalMode, Expr, Instr, ParseError, Program, Reg, Value};
pub use pipeline::{hw_run, HwConfig, HwObservation, HwRun, HwState};

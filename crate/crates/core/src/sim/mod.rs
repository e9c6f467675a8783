//! Cost model for the baseline processor and the TT-Edge processor.
//!
//! The simulator never changes numerics: both machines run the same
//! pipeline through a simulated [`GemmExecutor`], and only the counters
//! charged along the way differ. Phase times are weighted sums of those
//! counters; energy is phase time times the power state of the phase.

mod energy;
mod gemm;
mod machine;
mod trace;

pub use energy::{
    energy_report, reference_phase_times, summary, ComparisonSummary, PhaseReport, REFERENCE_PHASE_TIMES_MS,
};
pub use gemm::{block_count, blocked_gemm, ExecMode, GemmExecutor, Operand};
pub use machine::{CostModel, MachineConfig, Phase, PowerStates, Variant, WORD_BYTES};
pub use trace::{EventTrace, PhaseCounters};

use crate::error::Result;
use crate::tensor::Tensor;
use crate::tt::{tt_decompose, TtCores};

/// Address of the `i`-th diagonal (`order = 0`) or superdiagonal
/// (`order = 1`) element of a row-major matrix of width `a_width` at
/// `a_addr`, where the HBD engine's vector fetch starts.
pub fn hbd_addr(a_addr: u64, a_width: u64, i: u64, order: u64) -> u64 {
    a_addr + i * (a_width + 1) + order
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub cores: TtCores,
    pub trace: EventTrace,
    pub reports: Vec<PhaseReport>,
}

pub fn simulate_ttd(w: &Tensor, epsilon: f64, machine: &MachineConfig) -> Result<SimulationRun> {
    machine.validate()?;
    let mut exec = GemmExecutor::simulated(machine.clone());
    let cores = tt_decompose(w, epsilon, &mut exec)?;
    let trace = exec.into_trace();
    let reports = energy_report(&trace.phase_times_ms(&machine.cost_ns), machine);
    Ok(SimulationRun { cores, trace, reports })
}

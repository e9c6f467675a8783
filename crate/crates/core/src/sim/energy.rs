//! Phase time/energy reports. Energy is power times time, nothing else:
//! `energy_mj = power_mw * time_ms / 1000`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};

use super::machine::{MachineConfig, Phase, Variant};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub variant: Variant,
    pub phase: Phase,
    pub time_ms: f64,
    pub energy_mj: f64,
    pub core_gated: bool,
}

/// Phase times (ms) measured on the FPGA prototypes for ResNet-32
/// compression: `(phase, baseline, tt_edge)`.
pub const REFERENCE_PHASE_TIMES_MS: [(Phase, f64, f64); 5] = [
    (Phase::Hbd, 5626.42, 2743.80),
    (Phase::QrDecomp, 1554.66, 1554.66),
    (Phase::SortTrunc, 312.56, 31.37),
    (Phase::UpdateSvdInput, 46.65, 46.65),
    (Phase::ReshapeEtc, 189.24, 189.24),
];

pub fn reference_phase_times(variant: Variant) -> BTreeMap<Phase, f64> {
    REFERENCE_PHASE_TIMES_MS
        .iter()
        .map(|&(p, b, t)| (p, if variant == Variant::Baseline { b } else { t }))
        .collect()
}

pub fn energy_report(phase_times_ms: &BTreeMap<Phase, f64>, machine: &MachineConfig) -> Vec<PhaseReport> {
    phase_times_ms
        .iter()
        .map(|(&phase, &time_ms)| PhaseReport {
            variant: machine.variant,
            phase,
            time_ms,
            energy_mj: machine.power_of(phase) * time_ms / 1000.0,
            core_gated: machine.is_gated(phase),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub baseline_time_ms: f64,
    pub ttedge_time_ms: f64,
    pub baseline_energy_mj: f64,
    pub ttedge_energy_mj: f64,
    /// Baseline time over TT-Edge time.
    pub speedup: f64,
    /// `100 * (1 - E_ttedge / E_baseline)`.
    pub energy_reduction_pct: f64,
}

pub fn summary(baseline: &[PhaseReport], ttedge: &[PhaseReport]) -> Result<ComparisonSummary> {
    let phases = |r: &[PhaseReport]| r.iter().map(|p| p.phase).collect::<BTreeSet<_>>();
    if phases(baseline) != phases(ttedge) {
        return Err(Error::PhaseSetMismatch);
    }
    let totals = |r: &[PhaseReport]| r.iter().fold((0.0, 0.0), |(t, e), p| (t + p.time_ms, e + p.energy_mj));
    let (bt, be) = totals(baseline);
    let (tt, te) = totals(ttedge);
    Ok(ComparisonSummary {
        baseline_time_ms: bt,
        ttedge_time_ms: tt,
        baseline_energy_mj: be,
        ttedge_energy_mj: te,
        speedup: bt / tt,
        energy_reduction_pct: 100.0 * (1.0 - te / be),
    })
}

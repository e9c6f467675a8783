use std::collections::BTreeMap;

use serde::Serialize;

use super::machine::{CostModel, Phase};

/// Event counts for one phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhaseCounters {
    pub gemm_block_calls: u64,
    pub dma_words_in: u64,
    pub dma_words_out: u64,
    pub config_msgs: u64,
    pub core_flops: u64,
    pub fpalu_ops: u64,
    /// Subset of `dma_words_in` spent re-reading Householder vectors that
    /// were already fetched once.
    pub hh_refetch_words: u64,
}

impl PhaseCounters {
    /// Weighted sum of the counters, in milliseconds.
    pub fn time_ms(&self, cost: &CostModel) -> f64 {
        let ns = (self.dma_words_in + self.dma_words_out) as f64 * cost.dma_word
            + self.gemm_block_calls as f64 * cost.gemm_block_op
            + self.core_flops as f64 * cost.core_flop
            + self.config_msgs as f64 * cost.config_msg
            + self.fpalu_ops as f64 * cost.fpalu_op;
        ns / 1e6
    }

    fn add(&mut self, other: &PhaseCounters) {
        self.gemm_block_calls += other.gemm_block_calls;
        self.dma_words_in += other.dma_words_in;
        self.dma_words_out += other.dma_words_out;
        self.config_msgs += other.config_msgs;
        self.core_flops += other.core_flops;
        self.fpalu_ops += other.fpalu_ops;
        self.hh_refetch_words += other.hh_refetch_words;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventTrace {
    phases: [PhaseCounters; 5],
    /// High-water mark of words held in the scratchpad.
    pub spm_resident_words: u64,
}

impl EventTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn phase(&self, phase: Phase) -> &PhaseCounters {
        &self.phases[phase.index()]
    }

    pub(crate) fn phase_mut(&mut self, phase: Phase) -> &mut PhaseCounters {
        &mut self.phases[phase.index()]
    }

    pub fn total(&self) -> PhaseCounters {
        let mut t = PhaseCounters::default();
        self.phases.iter().for_each(|p| t.add(p));
        t
    }

    pub fn phase_times_ms(&self, cost: &CostModel) -> BTreeMap<Phase, f64> {
        Phase::ALL.iter().map(|&p| (p, self.phase(p).time_ms(cost))).collect()
    }
}

impl Serialize for EventTrace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let phases: BTreeMap<&str, &PhaseCounters> = Phase::ALL.iter().map(|p| (p.name(), self.phase(*p))).collect();
        let mut st = s.serialize_struct("EventTrace", 2)?;
        st.serialize_field("phases", &phases)?;
        st.serialize_field("spm_resident_words", &self.spm_resident_words)?;
        st.end()
    }
}

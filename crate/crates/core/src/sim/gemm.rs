//! Blockwise GEMM execution with DMA/SPM/config accounting.
//!
//! Every matrix product in the pipeline goes through a [`GemmExecutor`].
//! In reference mode it is a plain [`matmul_ref`] and records nothing. In
//! simulated mode the product is executed tile by tile with the machine's
//! block size and each event is charged to the current [`Phase`].
//!
//! Tiles are streamed: for every output tile `(i, j)` the A- and B-blocks
//! along `k` are loaded and the C-block stays in the scratchpad until the
//! `k` loop ends, so a product of `(m x k)(k x n)` moves
//! `words(A)*ceil(n/b) + words(B)*ceil(m/b)` words in and `m*n` out.
//! Accumulation runs along `k` in ascending order starting from zero,
//! which makes the blocked result bit-identical to the reference product.

use crate::error::{Error, Result};
use crate::tensor::{matmul_ref, Matrix};

use super::machine::{MachineConfig, Phase, Variant, WORD_BYTES};
use super::trace::EventTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Reference,
    Simulated,
}

/// Where a GEMM operand comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    /// Loaded from DRAM block by block.
    Streamed,
    /// A Householder vector (or its scaled copy). The TT-Edge engine keeps
    /// these in the scratchpad; the baseline re-reads them from DRAM.
    Householder,
}

#[derive(Debug, Clone)]
pub struct GemmExecutor {
    machine: MachineConfig,
    mode: ExecMode,
    trace: EventTrace,
    phase: Phase,
    retained_words: u64,
}

fn ceil_div(a: usize, b: usize) -> u64 {
    a.div_ceil(b) as u64
}

/// `ceil(m/b) * ceil(n/b) * ceil(k/b)` for an `(m x k)(k x n)` product.
pub fn block_count(m: usize, k: usize, n: usize, block: usize) -> u64 {
    ceil_div(m, block) * ceil_div(n, block) * ceil_div(k, block)
}

impl Default for GemmExecutor {
    fn default() -> Self {
        Self::reference()
    }
}

impl GemmExecutor {
    pub fn reference() -> Self {
        Self {
            machine: MachineConfig::baseline(),
            mode: ExecMode::Reference,
            trace: EventTrace::new(),
            phase: Phase::ReshapeEtc,
            retained_words: 0,
        }
    }

    pub fn simulated(machine: MachineConfig) -> Self {
        Self {
            machine,
            mode: ExecMode::Simulated,
            ..Self::reference()
        }
    }

    pub fn machine(&self) -> &MachineConfig {
        &self.machine
    }

    pub fn mode(&self) -> ExecMode {
        self.mode
    }

    pub fn trace(&self) -> &EventTrace {
        &self.trace
    }

    pub fn into_trace(self) -> EventTrace {
        self.trace
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    fn simulating(&self) -> bool {
        self.mode == ExecMode::Simulated
    }

    fn check_spm(&mut self, working_words: u64) -> Result<()> {
        let words = working_words + self.retained_words;
        let needed_bytes = words * WORD_BYTES;
        if needed_bytes > self.machine.spm_bytes {
            return Err(Error::SpmOverflow {
                needed_bytes,
                capacity_bytes: self.machine.spm_bytes,
            });
        }
        self.trace.spm_resident_words = self.trace.spm_resident_words.max(words);
        Ok(())
    }

    pub fn multiply(&mut self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        self.multiply_with(a, b, Operand::Streamed, Operand::Streamed)
    }

    pub fn multiply_with(&mut self, a: &Matrix, b: &Matrix, a_src: Operand, b_src: Operand) -> Result<Matrix> {
        match self.mode {
            ExecMode::Reference => matmul_ref(a, b),
            ExecMode::Simulated => {
                if a.cols() != b.rows() {
                    return Err(Error::DimMismatch(format!(
                        "cannot multiply {}x{} by {}x{}",
                        a.rows(),
                        a.cols(),
                        b.rows(),
                        b.cols()
                    )));
                }
                self.charge_gemm(a.rows(), a.cols(), b.cols(), a_src, b_src)?;
                Ok(tiled_product(a, b, self.machine.gemm_block))
            }
        }
    }

    /// Charges the events of an `(m x k)(k x n)` product without computing it.
    pub fn charge_gemm(&mut self, m: usize, k: usize, n: usize, a_src: Operand, b_src: Operand) -> Result<()> {
        if !self.simulating() {
            return Ok(());
        }
        let bs = self.machine.gemm_block;
        self.check_spm(3 * (bs * bs) as u64)?;

        let blocks = block_count(m, k, n, bs);
        let a_words = (m * k) as u64 * ceil_div(n, bs);
        let b_words = (k * n) as u64 * ceil_div(m, bs);
        let tt_edge = self.machine.variant == Variant::TtEdge;
        let (mut words_in, mut refetch) = (0, 0);
        for (src, words) in [(a_src, a_words), (b_src, b_words)] {
            match src {
                Operand::Streamed => words_in += words,
                Operand::Householder if tt_edge => {}
                Operand::Householder => {
                    words_in += words;
                    refetch += words;
                }
            }
        }
        let config = if self.machine.uses_direct_gemm(self.phase) {
            1
        } else {
            blocks
        };

        let c = self.trace.phase_mut(self.phase);
        c.gemm_block_calls += blocks;
        c.dma_words_in += words_in;
        c.dma_words_out += (m * n) as u64;
        c.hh_refetch_words += refetch;
        c.config_msgs += config;
        Ok(())
    }

    /// Non-GEMM arithmetic the TTD engine can take over (reflector
    /// generation, vector division, sorting, truncation). The baseline
    /// runs it on the core; TT-Edge runs it on the shared FP-ALU.
    pub fn offload_ops(&mut self, ops: u64) {
        if !self.simulating() {
            return;
        }
        let variant = self.machine.variant;
        let c = self.trace.phase_mut(self.phase);
        match variant {
            Variant::Baseline => c.core_flops += ops,
            Variant::TtEdge => c.fpalu_ops += ops,
        }
    }

    /// Data the baseline core must move through DRAM for offloadable work.
    /// The engine operates on scratchpad-resident data, so TT-Edge pays
    /// nothing here.
    pub fn offload_transfer(&mut self, words_in: u64, words_out: u64) {
        if !self.simulating() || self.machine.variant == Variant::TtEdge {
            return;
        }
        let c = self.trace.phase_mut(self.phase);
        c.dma_words_in += words_in;
        c.dma_words_out += words_out;
    }

    /// Arithmetic that stays on the main core on both machines.
    pub fn core_ops(&mut self, ops: u64) {
        if self.simulating() {
            self.trace.phase_mut(self.phase).core_flops += ops;
        }
    }

    /// Core-driven transfers that both machines perform identically.
    pub fn core_transfer(&mut self, words_in: u64, words_out: u64) {
        if self.simulating() {
            let c = self.trace.phase_mut(self.phase);
            c.dma_words_in += words_in;
            c.dma_words_out += words_out;
        }
    }

    /// Reads a Householder vector of `len` words. The first read comes from
    /// DRAM on both machines; later reads are refetches on the baseline and
    /// free on TT-Edge, which retained the vector.
    pub fn fetch_householder(&mut self, len: usize, first_use: bool) {
        if !self.simulating() {
            return;
        }
        let tt_edge = self.machine.variant == Variant::TtEdge;
        let c = self.trace.phase_mut(self.phase);
        if first_use {
            c.dma_words_in += len as u64;
        } else if !tt_edge {
            c.dma_words_in += len as u64;
            c.hh_refetch_words += len as u64;
        }
    }

    /// Keeps a Householder vector resident in the scratchpad (TT-Edge only).
    pub fn retain_householder(&mut self, len: usize) -> Result<()> {
        if !self.simulating() || self.machine.variant != Variant::TtEdge {
            return Ok(());
        }
        self.retained_words += len as u64;
        self.check_spm(0)
    }

    pub fn release_householders(&mut self) {
        self.retained_words = 0;
    }
}

/// Tile-by-tile product; see the module docs for the accumulation order.
fn tiled_product(a: &Matrix, b: &Matrix, bs: usize) -> Matrix {
    let (m, kk, n) = (a.rows(), a.cols(), b.cols());
    let (ad, bd) = (a.data(), b.data());
    let mut c = vec![0.0; m * n];
    for i0 in (0..m).step_by(bs) {
        let i1 = (i0 + bs).min(m);
        for j0 in (0..n).step_by(bs) {
            let j1 = (j0 + bs).min(n);
            for k0 in (0..kk).step_by(bs) {
                let k1 = (k0 + bs).min(kk);
                for i in i0..i1 {
                    for j in j0..j1 {
                        let mut acc = c[i * n + j];
                        for k in k0..k1 {
                            acc += ad[i * kk + k] * bd[k * n + j];
                        }
                        c[i * n + j] = acc;
                    }
                }
            }
        }
    }
    Matrix::new(m, n, c).expect("product of non-empty operands")
}

/// Blockwise product through `exec`, with all operands streamed.
pub fn blocked_gemm(a: &Matrix, b: &Matrix, exec: &mut GemmExecutor) -> Result<Matrix> {
    exec.multiply(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::new(m, n, (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn blocks_of(m: usize, k: usize, n: usize) -> u64 {
        let mut exec = GemmExecutor::simulated(MachineConfig::baseline());
        let a = Matrix::zeros(m, k);
        let b = Matrix::zeros(k, n);
        exec.set_phase(Phase::QrDecomp);
        blocked_gemm(&a, &b, &mut exec).unwrap();
        exec.trace().phase(Phase::QrDecomp).gemm_block_calls
    }

    #[test]
    fn block_call_examples() {
        assert_eq!(blocks_of(16, 16, 16), 1);
        assert_eq!(blocks_of(17, 16, 16), 2);
        assert_eq!(blocks_of(64, 64, 64), 64);
    }

    #[test]
    fn simulated_equals_reference_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(m, k, n) in &[(1, 1, 1), (17, 33, 5), (40, 16, 31), (3, 50, 2)] {
            let a = random(m, k, &mut rng);
            let b = random(k, n, &mut rng);
            let mut exec = GemmExecutor::simulated(MachineConfig::tt_edge());
            assert_eq!(blocked_gemm(&a, &b, &mut exec).unwrap(), matmul_ref(&a, &b).unwrap());
        }
    }

    #[test]
    fn dma_and_config_accounting() {
        let a = Matrix::zeros(20, 40);
        let b = Matrix::zeros(40, 33);
        let mut base = GemmExecutor::simulated(MachineConfig::baseline());
        let mut edge = GemmExecutor::simulated(MachineConfig::tt_edge());
        base.set_phase(Phase::Hbd);
        edge.set_phase(Phase::Hbd);
        blocked_gemm(&a, &b, &mut base).unwrap();
        blocked_gemm(&a, &b, &mut edge).unwrap();
        let (cb, ce) = (base.trace().phase(Phase::Hbd), edge.trace().phase(Phase::Hbd));
        let blocks = 2 * 3 * 3;
        assert_eq!(cb.gemm_block_calls, blocks);
        assert_eq!(cb.dma_words_in, 800 * 3 + 1320 * 2);
        assert_eq!(cb.dma_words_out, 660);
        assert_eq!(cb.config_msgs, blocks);
        assert_eq!(ce.config_msgs, 1);
        assert_eq!(ce.dma_words_in, cb.dma_words_in);
    }

    #[test]
    fn householder_operands() {
        let v = Matrix::zeros(1, 20);
        let sub = Matrix::zeros(20, 20);
        let mut base = GemmExecutor::simulated(MachineConfig::baseline());
        let mut edge = GemmExecutor::simulated(MachineConfig::tt_edge());
        for e in [&mut base, &mut edge] {
            e.set_phase(Phase::Hbd);
            e.multiply_with(&v, &sub, Operand::Householder, Operand::Streamed)
                .unwrap();
        }
        let (cb, ce) = (base.trace().phase(Phase::Hbd), edge.trace().phase(Phase::Hbd));
        assert_eq!(cb.hh_refetch_words, 40);
        assert_eq!(ce.hh_refetch_words, 0);
        assert_eq!(cb.dma_words_in - ce.dma_words_in, 40);
    }

    #[test]
    fn reference_mode_records_nothing() {
        let mut exec = GemmExecutor::reference();
        blocked_gemm(&Matrix::eye(40), &Matrix::eye(40), &mut exec).unwrap();
        exec.offload_ops(10);
        exec.core_ops(10);
        exec.fetch_householder(5, false);
        assert_eq!(exec.trace(), &EventTrace::new());
    }

    #[test]
    fn spm_overflow() {
        let mut cfg = MachineConfig::tt_edge();
        cfg.spm_bytes = 3 * 16 * 16 * 4 - 1;
        let mut exec = GemmExecutor::simulated(cfg.clone());
        assert!(matches!(
            blocked_gemm(&Matrix::eye(2), &Matrix::eye(2), &mut exec),
            Err(Error::SpmOverflow { .. })
        ));

        cfg.spm_bytes = 3 * 16 * 16 * 4 + 40;
        let mut exec = GemmExecutor::simulated(cfg);
        exec.retain_householder(10).unwrap();
        blocked_gemm(&Matrix::eye(2), &Matrix::eye(2), &mut exec).unwrap();
        assert_eq!(exec.trace().spm_resident_words, 3 * 256 + 10);
        exec.retain_householder(1).unwrap();
        assert!(matches!(
            blocked_gemm(&Matrix::eye(2), &Matrix::eye(2), &mut exec),
            Err(Error::SpmOverflow { .. })
        ));
    }

    #[test]
    fn dim_mismatch() {
        let mut exec = GemmExecutor::simulated(MachineConfig::baseline());
        assert!(matches!(
            blocked_gemm(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3), &mut exec),
            Err(Error::DimMismatch(_))
        ));
    }
}

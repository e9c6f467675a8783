//! Tensor-train decomposition and decoding.
//!
//! `tt_decompose` sweeps left to right: unfold the remainder to
//! `[r_{k-1} n_k, rest]`, take its SVD, sort the basis, truncate against a
//! threshold fixed by the first SVD, keep `U_t` as core `k` and carry
//! `Sigma_t V_t^T` forward.

use crate::error::{Error, Result};
use crate::sim::{GemmExecutor, Operand, Phase};
use crate::svd::{compute_delta, delta_truncation, sorting_basis_counted, svd_with_precision, SvdResult};
use crate::tensor::{tensor_contract, Matrix, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TtCores {
    cores: Vec<Tensor>,
    ranks: Vec<usize>,
}

impl TtCores {
    /// Validates boundary ranks and the rank chain.
    pub fn new(cores: Vec<Tensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::EmptyTensor);
        }
        let mut ranks = Vec::with_capacity(cores.len() + 1);
        for (k, core) in cores.iter().enumerate() {
            let d = core.dims();
            if d.len() != 3 {
                return Err(Error::RankChainBroken {
                    core: k,
                    detail: format!("core must be 3-D, got dims {d:?}"),
                });
            }
            match ranks.last() {
                None => ranks.push(d[0]),
                Some(&prev) if prev != d[0] => {
                    return Err(Error::RankChainBroken {
                        core: k,
                        detail: format!("left rank {} != previous right rank {prev}", d[0]),
                    })
                }
                _ => {}
            }
            ranks.push(d[2]);
        }
        if ranks[0] != 1 || *ranks.last().unwrap() != 1 {
            return Err(Error::RankChainBroken {
                core: if ranks[0] != 1 { 0 } else { cores.len() - 1 },
                detail: format!("boundary ranks must be 1, got {ranks:?}"),
            });
        }
        Ok(Self { cores, ranks })
    }

    pub fn cores(&self) -> &[Tensor] {
        &self.cores
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Mode sizes `n_1..n_N`.
    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dims()[1]).collect()
    }

    /// `sum_k r_{k-1} n_k r_k`.
    pub fn parameter_count(&self) -> usize {
        self.cores.iter().map(Tensor::numel).sum()
    }
}

/// Decomposes `w` so that the relative reconstruction error stays within
/// `epsilon`. All matrix products go through `exec`.
pub fn tt_decompose(w: &Tensor, epsilon: f64, exec: &mut GemmExecutor) -> Result<TtCores> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let dims = w.dims().to_vec();
    let n = dims.len();
    let precision = w.precision();
    let mut cores = Vec::with_capacity(n);
    let mut remainder = w.data().to_vec();
    let mut r_prev = 1usize;
    let mut delta = 0.0;

    for (k, &n_k) in dims.iter().enumerate().take(n - 1) {
        let rows = r_prev * n_k;
        let cols = remainder.len() / rows;
        let unfolded = Matrix::new(rows, cols, std::mem::take(&mut remainder))?;

        let res = svd_with_precision(&unfolded, exec, precision)?;

        exec.set_phase(Phase::SortTrunc);
        if k == 0 {
            delta = compute_delta(epsilon, n, &res.sigma)?;
            // norm (MACs + SQRT), then MUL and DIV
            exec.offload_ops(res.sigma.len() as u64 + 3);
        }
        let (sorted, _, stats) = sorting_basis_counted(&res);
        charge_sorting(exec, &res, stats.comparisons, stats.swaps);
        let truncated = delta_truncation(&sorted, delta, precision);
        charge_truncation(exec, sorted.sigma.len(), truncated.sigma.len());

        exec.set_phase(Phase::UpdateSvdInput);
        let r_k = truncated.sigma.len();
        remainder = scale_rows(&truncated, exec)?;

        exec.set_phase(Phase::ReshapeEtc);
        let words = (rows * r_k) as u64;
        exec.core_ops(words);
        exec.core_transfer(words, words);
        let core = Tensor::with_precision(vec![r_prev, n_k, r_k], truncated.u.into_data(), precision)?;
        cores.push(core);
        r_prev = r_k;
    }

    exec.set_phase(Phase::ReshapeEtc);
    let n_last = dims[n - 1];
    let words = remainder.len() as u64;
    exec.core_ops(words);
    exec.core_transfer(words, words);
    cores.push(Tensor::with_precision(vec![r_prev, n_last, 1], remainder, precision)?);
    TtCores::new(cores)
}

/// `Sigma_t * V_t^T` as a row scaling, charged as the `k x k` by
/// `k x cols` GEMM it replaces.
fn scale_rows(t: &SvdResult, exec: &mut GemmExecutor) -> Result<Vec<f64>> {
    let k = t.sigma.len();
    let cols = t.v_t.cols();
    exec.charge_gemm(k, k, cols, Operand::Streamed, Operand::Streamed)?;
    let mut out = t.v_t.clone().into_data();
    for (r, s) in t.sigma.iter().enumerate() {
        out[r * cols..(r + 1) * cols].iter_mut().for_each(|x| *x *= s);
    }
    Ok(out)
}

fn charge_sorting(exec: &mut GemmExecutor, res: &SvdResult, comparisons: usize, swaps: usize) {
    let k = res.sigma.len();
    exec.offload_ops((comparisons + swaps) as u64);
    // singular values are read once; permuted bases are read and written back
    let moved = if swaps > 0 {
        k * (res.u.rows() + res.v_t.cols())
    } else {
        0
    };
    exec.offload_transfer((k + moved) as u64, (k + moved) as u64);
}

/// Checks tail norms from the full rank downwards until the kept rank is
/// reached: one MAC per element plus SQRT and compare per check.
fn charge_truncation(exec: &mut GemmExecutor, len: usize, kept: usize) {
    let checks = len - kept + 1;
    exec.offload_ops((checks * 2 + (len - kept) + 1) as u64);
    exec.offload_transfer(len as u64, 0);
}

/// Left fold of [`tensor_contract`] over the cores, squeezed to `[n_1..n_N]`.
pub fn tt_decode(cores: &TtCores) -> Result<Tensor> {
    // revalidate in case the value came from elsewhere
    let checked = TtCores::new(cores.cores.clone())?;
    let mut acc = checked.cores[0].clone();
    for core in &checked.cores[1..] {
        acc = tensor_contract(&acc, core)?;
    }
    acc.into_reshaped(&checked.dims())
}

/// `numel(original) / parameter_count(cores)`. Not clamped.
pub fn compression_ratio(original_dims: &[usize], cores: &TtCores) -> f64 {
    original_dims.iter().product::<usize>() as f64 / cores.parameter_count() as f64
}

/// `|w - decode(cores)|_F / |w|_F`, or 0 when both are exactly zero.
pub fn reconstruction_error(w: &Tensor, cores: &TtCores) -> Result<f64> {
    let approx = tt_decode(cores)?;
    if approx.dims() != w.dims() {
        return Err(Error::ShapeMismatch {
            expected: w.dims().to_vec(),
            actual: approx.dims().to_vec(),
        });
    }
    let diff: f64 = w
        .data()
        .iter()
        .zip(approx.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm = w.frobenius_norm();
    if norm == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(diff / norm)
}

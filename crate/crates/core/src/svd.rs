//! SVD assembly, basis sorting and delta truncation.
//!
//! `svd` bidiagonalizes with [`crate::householder::bidiagonalize`] and then
//! diagonalizes `B = Q_L * Sigma * Q_R^T` with implicit-shift QR (Wilkinson
//! shift, Givens rotations), giving `U = U_B * Q_L` and
//! `V^T = Q_R^T * V_B^T`.

use crate::error::{Error, Result};
use crate::householder::bidiagonalize;
use crate::sim::{GemmExecutor, Phase};
use crate::tensor::{frobenius_norm, Matrix, Precision};

/// Thin SVD: `u` is `M x k`, `v_t` is `k x N`, `k = min(M, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v_t: Matrix,
}

impl SvdResult {
    /// Number of singular values above `max(M, N) * eps * sigma_max`.
    pub fn numerical_rank(&self, precision: Precision) -> usize {
        let smax = self.sigma.iter().cloned().fold(0.0, f64::max);
        let tol = self.u.rows().max(self.v_t.cols()) as f64 * precision.epsilon() * smax;
        self.sigma.iter().filter(|&&s| s > tol).count()
    }

    /// `u * diag(sigma) * v_t`, computed with the reference product.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (c, s) in self.sigma.iter().enumerate() {
                us.set(r, c, us.get(r, c) * s);
            }
        }
        crate::tensor::matmul_ref(&us, &self.v_t).expect("conforming factors")
    }
}

/// `ind[j]` is the original position of the j-th largest singular value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortPermutation {
    pub ind: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SortStats {
    pub comparisons: usize,
    pub swaps: usize,
}

/// Result of diagonalizing an upper-bidiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BidiagSvd {
    pub q_l: Matrix,
    pub sigma: Vec<f64>,
    pub q_r_t: Matrix,
    pub sweeps: usize,
    pub rotations: usize,
}

fn givens(f: f64, g: f64) -> (f64, f64, f64) {
    if g == 0.0 {
        (1.0, 0.0, f)
    } else {
        let r = f.hypot(g);
        (f / r, g / r, r)
    }
}

/// `x_i <- c x_i + s x_j`, `x_j <- -s x_i + c x_j` on rows `i`, `j`.
fn rotate_rows(m: &mut Matrix, i: usize, j: usize, c: f64, s: f64) {
    for col in 0..m.cols() {
        let (a, b) = (m.get(i, col), m.get(j, col));
        m.set(i, col, c * a + s * b);
        m.set(j, col, -s * a + c * b);
    }
}

fn rotate_cols(m: &mut Matrix, i: usize, j: usize, c: f64, s: f64) {
    for row in 0..m.rows() {
        let (a, b) = (m.get(row, i), m.get(row, j));
        m.set(row, i, c * a + s * b);
        m.set(row, j, -s * a + c * b);
    }
}

struct BidiagQr {
    d: Vec<f64>,
    e: Vec<f64>,
    q_l: Matrix,
    q_r_t: Matrix,
    rotations: usize,
}

impl BidiagQr {
    // B <- R B on rows (i, j); Q_L <- Q_L R^T
    fn left(&mut self, i: usize, j: usize, c: f64, s: f64) {
        rotate_cols(&mut self.q_l, i, j, c, s);
        self.rotations += 1;
    }

    // B <- B R^T on columns (i, j); Q_R^T <- R Q_R^T
    fn right(&mut self, i: usize, j: usize, c: f64, s: f64) {
        rotate_rows(&mut self.q_r_t, i, j, c, s);
        self.rotations += 1;
    }

    fn wilkinson_shift(&self, p: usize, q: usize) -> f64 {
        let (d, e) = (&self.d, &self.e);
        let above = if q - 1 > p { e[q - 2] * e[q - 2] } else { 0.0 };
        let t11 = d[q - 1] * d[q - 1] + above;
        let t12 = d[q - 1] * e[q - 1];
        let t22 = d[q] * d[q] + e[q - 1] * e[q - 1];
        let delta = (t11 - t22) / 2.0;
        let denom = delta + crate::householder::sign(delta) * delta.hypot(t12);
        if denom == 0.0 {
            t22
        } else {
            t22 - t12 * t12 / denom
        }
    }

    /// One implicit-shift QR step on the unreduced block `p..=q`.
    fn sweep(&mut self, p: usize, q: usize) {
        let mu = self.wilkinson_shift(p, q);
        let mut y = self.d[p] * self.d[p] - mu;
        let mut z = self.d[p] * self.e[p];
        for k in p..q {
            let (c, s, r) = givens(y, z);
            if k > p {
                self.e[k - 1] = r;
            }
            let (dk, ek, dk1) = (self.d[k], self.e[k], self.d[k + 1]);
            self.d[k] = c * dk + s * ek;
            self.e[k] = -s * dk + c * ek;
            let bulge = s * dk1;
            self.d[k + 1] = c * dk1;
            self.right(k, k + 1, c, s);

            let (c, s, r) = givens(self.d[k], bulge);
            self.d[k] = r;
            let (ek, dk1) = (self.e[k], self.d[k + 1]);
            self.e[k] = c * ek + s * dk1;
            self.d[k + 1] = -s * ek + c * dk1;
            if k + 1 < q {
                let ek1 = self.e[k + 1];
                z = s * ek1;
                self.e[k + 1] = c * ek1;
                y = self.e[k];
            }
            self.left(k, k + 1, c, s);
        }
    }

    /// `d[i] == 0` with `i < q`: push `e[i]` out along row `i`.
    fn chase_row(&mut self, i: usize, q: usize) {
        let mut bulge = self.e[i];
        self.e[i] = 0.0;
        for j in i + 1..=q {
            let (c, s, r) = givens(self.d[j], bulge);
            self.d[j] = r;
            if j < q {
                bulge = -s * self.e[j];
                self.e[j] *= c;
            }
            self.left(j, i, c, s);
        }
    }

    /// `d[q] == 0`: push `e[q-1]` up along column `q`.
    fn chase_col(&mut self, p: usize, q: usize) {
        let mut bulge = self.e[q - 1];
        self.e[q - 1] = 0.0;
        for j in (p..q).rev() {
            let (c, s, r) = givens(self.d[j], bulge);
            self.d[j] = r;
            if j > p {
                bulge = -s * self.e[j - 1];
                self.e[j - 1] *= c;
            }
            self.right(j, q, c, s);
        }
    }
}

/// Diagonalizes an upper-bidiagonal square matrix.
///
/// Superdiagonal entries with `|e_i| <= tol * (|d_i| + |d_{i+1}|)` are
/// deflated, `tol = 1e-14` (`1e-6` in 32-bit mode). Gives up with
/// [`Error::NoConvergence`] after `30 * N` QR sweeps.
pub fn diagonalize_bidiagonal(b: &Matrix, precision: Precision) -> Result<BidiagSvd> {
    let n = b.rows();
    if b.cols() != n {
        return Err(Error::ShapeError(format!(
            "bidiagonal matrix must be square, got {}x{}",
            n,
            b.cols()
        )));
    }
    for r in 0..n {
        for c in 0..n {
            if c != r && c != r + 1 && b.get(r, c) != 0.0 {
                return Err(Error::ShapeError(format!(
                    "entry ({r},{c}) outside the upper bidiagonal"
                )));
            }
        }
    }
    let tol = match precision {
        Precision::F64 => 1e-14,
        Precision::F32 => 1e-6,
    };
    let mut st = BidiagQr {
        d: (0..n).map(|i| b.get(i, i)).collect(),
        e: (0..n.saturating_sub(1)).map(|i| b.get(i, i + 1)).collect(),
        q_l: Matrix::eye(n),
        q_r_t: Matrix::eye(n),
        rotations: 0,
    };
    let scale = st.d.iter().chain(&st.e).fold(0.0f64, |m, x| m.max(x.abs()));
    let zero_tol = tol * scale;
    let max_sweeps = 30 * n;
    let mut sweeps = 0;

    loop {
        for i in 0..n.saturating_sub(1) {
            if st.e[i].abs() <= tol * (st.d[i].abs() + st.d[i + 1].abs()) {
                st.e[i] = 0.0;
            }
        }
        let mut q = n.saturating_sub(1);
        while q > 0 && st.e[q - 1] == 0.0 {
            q -= 1;
        }
        if q == 0 {
            break;
        }
        let mut p = q - 1;
        while p > 0 && st.e[p - 1] != 0.0 {
            p -= 1;
        }
        if let Some(i) = (p..=q).find(|&i| st.d[i].abs() <= zero_tol) {
            st.d[i] = 0.0;
            if i < q {
                st.chase_row(i, q);
            } else {
                st.chase_col(p, q);
            }
            continue;
        }
        if sweeps >= max_sweeps {
            return Err(Error::NoConvergence { sweeps });
        }
        st.sweep(p, q);
        sweeps += 1;
    }

    for i in 0..n {
        if st.d[i] < 0.0 {
            st.d[i] = -st.d[i];
            for r in 0..n {
                st.q_l.set(r, i, -st.q_l.get(r, i));
            }
        }
    }
    Ok(BidiagSvd {
        q_l: st.q_l,
        sigma: st.d,
        q_r_t: st.q_r_t,
        sweeps,
        rotations: st.rotations,
    })
}

pub fn svd(a: &Matrix, exec: &mut GemmExecutor) -> Result<SvdResult> {
    svd_with_precision(a, exec, Precision::F64)
}

pub fn svd_with_precision(a: &Matrix, exec: &mut GemmExecutor, precision: Precision) -> Result<SvdResult> {
    let f = bidiagonalize(a, exec)?;
    exec.set_phase(Phase::QrDecomp);
    let k = f.b.rows();
    // A wide input yields a lower-bidiagonal L; diagonalize L^T and swap.
    let (left, sigma, right_t, rotations) = if f.lower {
        let dg = diagonalize_bidiagonal(&f.b.transpose(), precision)?;
        (dg.q_r_t.transpose(), dg.sigma, dg.q_l.transpose(), dg.rotations)
    } else {
        let dg = diagonalize_bidiagonal(&f.b, precision)?;
        (dg.q_l, dg.sigma, dg.q_r_t, dg.rotations)
    };
    // c, s and r per rotation plus two rows of length k
    exec.core_ops((rotations * (6 * k + 8)) as u64);
    let u = exec.multiply(&f.u_b, &left)?;
    let v_t = exec.multiply(&right_t, &f.v_b_t)?;
    Ok(SvdResult { u, sigma, v_t })
}

/// Descending bubble sort that swaps only on strict inequality, so ties
/// keep their original order.
pub fn bubble_sort_desc(values: &[f64]) -> (Vec<f64>, Vec<usize>, SortStats) {
    let mut vals = values.to_vec();
    let mut ind: Vec<usize> = (0..vals.len()).collect();
    let mut stats = SortStats::default();
    for pass in 0..vals.len().saturating_sub(1) {
        let mut swapped = false;
        for j in 0..vals.len() - 1 - pass {
            stats.comparisons += 1;
            if vals[j] < vals[j + 1] {
                vals.swap(j, j + 1);
                ind.swap(j, j + 1);
                stats.swaps += 1;
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    (vals, ind, stats)
}

pub fn sorting_basis(res: &SvdResult) -> (SvdResult, SortPermutation) {
    let (sorted, perm, _) = sorting_basis_counted(res);
    (sorted, perm)
}

/// [`sorting_basis`] plus the comparison/swap counts of the sort.
pub fn sorting_basis_counted(res: &SvdResult) -> (SvdResult, SortPermutation, SortStats) {
    let (sigma, ind, stats) = bubble_sort_desc(&res.sigma);
    let k = sigma.len();
    let mut u = Matrix::zeros(res.u.rows(), k);
    let mut v_t = Matrix::zeros(k, res.v_t.cols());
    for (j, &src) in ind.iter().enumerate() {
        for r in 0..u.rows() {
            u.set(r, j, res.u.get(r, src));
        }
        v_t.set_block(j, 0, &res.v_t.block(src, src + 1, 0, res.v_t.cols()));
    }
    (SvdResult { u, sigma, v_t }, SortPermutation { ind }, stats)
}

/// `delta = epsilon / sqrt(n_dims - 1) * |sigma_first|_2`.
///
/// `|W|_F` equals the 2-norm of the singular values of any unfolding of
/// `W`, so the norm of the first SVD's spectrum stands in for it.
pub fn compute_delta(epsilon: f64, n_dims: usize, sigma_first: &[f64]) -> Result<f64> {
    if n_dims < 2 {
        return Err(Error::BadDims(n_dims));
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(epsilon / ((n_dims - 1) as f64).sqrt() * frobenius_norm(sigma_first))
}

/// Number of components kept by [`delta_truncation`].
///
/// `k` is the smallest 1-based index `i <= rank` with
/// `|sigma[i..rank]| < delta`, and components `1..=k` are kept. Without
/// such an index `k = rank`. Components past the numerical rank are only
/// dropped while the dropped tail stays below `delta`, and `k >= 1`.
pub fn truncation_rank(sigma: &[f64], rank: usize, delta: f64) -> usize {
    let len = sigma.len();
    // suffix[i] = sum of squares of sigma[i..rank]
    let mut suffix = vec![0.0; rank + 1];
    for i in (0..rank).rev() {
        suffix[i] = suffix[i + 1] + sigma[i] * sigma[i];
    }
    let mut k = (0..rank).find(|&i| suffix[i].sqrt() < delta).map_or(rank, |i| i + 1);
    k = k.max(1).min(len);
    while k < len && frobenius_norm(&sigma[k..]) >= delta {
        k += 1;
    }
    k
}

/// Keeps the leading components of a sorted SVD.
pub fn delta_truncation(res: &SvdResult, delta: f64, precision: Precision) -> SvdResult {
    let rank = res.numerical_rank(precision);
    let k = truncation_rank(&res.sigma, rank, delta);
    SvdResult {
        u: res.u.block(0, res.u.rows(), 0, k),
        sigma: res.sigma[..k].to_vec(),
        v_t: res.v_t.block(0, k, 0, res.v_t.cols()),
    }
}

//! Shared oracles and generators for the integration tests.
//!
//! The oracles here deliberately avoid the library's own numerics: the
//! singular values come from cyclic Jacobi on `A^T A`, reflectors are
//! formed as explicit dense matrices, and decoding is a direct sum over
//! rank indices.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

use ttedge::format::write_tensor;
use ttedge::synth::random_cores;
use ttedge::tensor::{Matrix, Precision, Tensor};
use ttedge::tt::{tt_decode, TtCores};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor {
    let n = dims.iter().product();
    Tensor::new(dims.to_vec(), random_vec(rng, n)).unwrap()
}

/// Plain triple loop, independent of the library's products.
pub fn naive_mul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows());
    let mut c = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            c.set(i, j, s);
        }
    }
    c
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `max |Q^T Q - I|` over the columns of `q`.
pub fn column_orthogonality_defect(q: &Matrix) -> f64 {
    let g = naive_mul(&q.transpose(), q);
    max_abs_diff(&g, &Matrix::eye(q.cols()))
}

/// `max |Q Q^T - I|` over the rows of `q`.
pub fn row_orthogonality_defect(q: &Matrix) -> f64 {
    let g = naive_mul(q, &q.transpose());
    max_abs_diff(&g, &Matrix::eye(q.rows()))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(s: &Matrix) -> Vec<f64> {
    let n = s.rows();
    assert_eq!(n, s.cols());
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| s.row(i).to_vec()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

/// Singular values of `a` as square roots of the Jacobi eigenvalues of the
/// smaller Gram matrix, descending.
pub fn oracle_singular_values(a: &Matrix) -> Vec<f64> {
    let gram = if a.rows() >= a.cols() {
        naive_mul(&a.transpose(), a)
    } else {
        naive_mul(a, &a.transpose())
    };
    jacobi_eigenvalues(&gram)
        .into_iter()
        .map(|e| e.max(0.0).sqrt())
        .collect()
}

/// Dense `H = I + v v^T / beta` for `beta = v[0] * q`.
pub fn explicit_reflector(q: f64, v: &[f64]) -> Matrix {
    let beta = v[0] * q;
    let n = v.len();
    let mut h = Matrix::eye(n);
    for i in 0..n {
        for j in 0..n {
            h.set(i, j, h.get(i, j) + v[i] * v[j] / beta);
        }
    }
    h
}

/// Direct evaluation of every element as a sum over all rank indices.
pub fn brute_force_decode(cores: &TtCores) -> Tensor {
    let dims = cores.dims();
    let n: usize = dims.iter().product();
    let mut out = vec![0.0; n];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut idx = vec![0; dims.len()];
        let mut rem = flat;
        for k in (0..dims.len()).rev() {
            idx[k] = rem % dims[k];
            rem /= dims[k];
        }
        // row vector of length r_k carried across cores
        let mut acc = vec![1.0];
        for (k, core) in cores.cores().iter().enumerate() {
            let (r0, nk, r1) = (core.dims()[0], core.dims()[1], core.dims()[2]);
            let mut next = vec![0.0; r1];
            for a in 0..r0 {
                for b in 0..r1 {
                    next[b] += acc[a] * core.data()[(a * nk + idx[k]) * r1 + b];
                }
            }
            acc = next;
        }
        *slot = acc[0];
    }
    Tensor::new(dims, out).unwrap()
}

pub fn relative_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.dims(), b.dims());
    let d: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    d / a.frobenius_norm()
}

/// Raw archive bytes with arbitrary (possibly inconsistent) header fields.
pub fn raw_archive(ranks: &[u64], dims: &[u64], payload: &[f64]) -> Vec<u8> {
    let mut out = b"TTEA".to_vec();
    out.extend_from_slice(&1u32.to_le_bytes());
    out.push(0);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    ranks.iter().for_each(|r| out.extend_from_slice(&r.to_le_bytes()));
    dims.iter().for_each(|d| out.extend_from_slice(&d.to_le_bytes()));
    payload.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    out
}

/// Block edge of the default machines.
pub const B: usize = 16;

pub fn blocks(m: usize, k: usize, n: usize) -> u64 {
    (m.div_ceil(B) * k.div_ceil(B) * n.div_ceil(B)) as u64
}

/// Block calls of one reflector update: two rank-one GEMMs.
pub fn update_blocks(rows: usize, cols: usize, left: bool) -> u64 {
    if rows == 0 || cols == 0 {
        return 0;
    }
    if left {
        blocks(1, rows, cols) + blocks(rows, 1, cols)
    } else {
        blocks(rows, cols, 1) + blocks(rows, 1, cols)
    }
}

/// Expected HBD block calls for a generic `m x n` matrix, reduction plus
/// accumulation; wide inputs are reduced through the transpose.
pub fn hbd_blocks(m: usize, n: usize) -> u64 {
    let (m, n) = if m >= n { (m, n) } else { (n, m) };
    let mut total = 0;
    for i in 0..n {
        if i + 1 < n {
            total += update_blocks(m - i, n - i - 1, true);
            total += update_blocks(m - i - 1, n - i - 1, false);
        }
        total += update_blocks(m - i, n - i, true);
        if i + 1 < n {
            total += update_blocks(n - i - 1, n - i - 1, false);
        }
    }
    total
}

pub fn qr_blocks(m: usize, n: usize) -> u64 {
    let k = m.min(n);
    blocks(m, k, k) + blocks(k, k, n)
}

/// `[HBD, QR, update]` block calls rebuilt from the dims and the resulting
/// ranks.
pub fn expected_blocks(dims: &[usize], cores: &TtCores) -> [u64; 3] {
    let ranks = cores.ranks();
    let total: usize = dims.iter().product();
    let mut out = [0; 3];
    let mut remaining = total;
    for k in 0..dims.len() - 1 {
        let rows = ranks[k] * dims[k];
        let cols = remaining / dims[k];
        out[0] += hbd_blocks(rows, cols);
        out[1] += qr_blocks(rows, cols);
        out[2] += blocks(ranks[k + 1], ranks[k + 1], cols);
        remaining = cols;
    }
    out
}

pub fn rank_one_fixture(dir: &Path) -> PathBuf {
    let (a, b, c) = ([1.0, 2.0, 3.0], [1.0, -1.0, 0.5, 2.0], [1.0, 0.0, -2.0, 1.5, 0.25]);
    let mut data = Vec::new();
    for x in a {
        for y in b {
            for z in c {
                data.push(x * y * z);
            }
        }
    }
    let path = dir.join("rank1.tted");
    write_tensor(&path, &Tensor::new(vec![3, 4, 5], data).unwrap()).unwrap();
    path
}

/// Fixture tensors: random, low-rank, rank-one and a small f32 tensor.
pub fn fixtures(dir: &Path) -> Vec<PathBuf> {
    let mut r = rng(77);
    let mut out = vec![rank_one_fixture(dir)];
    let tensors = [
        random_tensor(&mut r, &[6, 5, 4]),
        random_tensor(&mut r, &[3, 4, 3, 4]),
        tt_decode(&random_cores(&[5, 6, 7], &[1, 2, 3, 1], 4).unwrap()).unwrap(),
        random_tensor(&mut r, &[12, 10]),
        {
            let t = random_tensor(&mut r, &[4, 4, 4]);
            Tensor::with_precision(vec![4, 4, 4], t.into_data(), Precision::F32).unwrap()
        },
    ];
    for (i, t) in tensors.iter().enumerate() {
        let path = dir.join(format!("fixture{i}.tted"));
        write_tensor(&path, t).unwrap();
        out.push(path);
    }
    out
}

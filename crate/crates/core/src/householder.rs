//! Householder bidiagonalization in two phases.
//!
//! Reduction walks the diagonal, generating a left reflector for column `i`
//! and a right reflector for row `i`, and stores the first element of each
//! Householder vector back into the eliminated position of the working
//! matrix (the remaining elements are already there). Accumulation then
//! replays the stored vectors in reverse order to build `U_B` and `V_B^T`.
//!
//! Reflector application never forms `H`. With `beta = v[0] * q`,
//! `H = I + v v^T / beta`, so a left update is `sub + (v/beta)(v^T sub)`
//! and a right update is `sub + (sub v)(v/beta)^T`: two GEMMs and one
//! vector division.

use crate::error::{Error, Result};
use crate::sim::{GemmExecutor, Operand, Phase};
use crate::tensor::Matrix;

/// `sign(0) = +1`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HouseholderStep {
    /// `-sign(x[0]) * |x|`, the value left on the bidiagonal.
    pub q: f64,
    /// `x` with `v[0] = x[0] + sign(x[0]) * |x|`.
    pub v: Vec<f64>,
}

impl HouseholderStep {
    pub fn beta(&self) -> f64 {
        self.v[0] * self.q
    }
}

pub fn house(x: &[f64]) -> HouseholderStep {
    assert!(!x.is_empty(), "house needs a non-empty vector");
    let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut v = x.to_vec();
    if norm == 0.0 {
        return HouseholderStep { q: 0.0, v };
    }
    let s = sign(x[0]);
    v[0] += s * norm;
    HouseholderStep { q: -s * norm, v }
}

/// Which side the reflector acts on (`order` 0 and 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left = 0,
    Right = 1,
}

/// Returns `H * sub` (left) or `sub * H` (right) for the reflector defined
/// by `q` and `v`. Both products go through `exec`.
pub fn house_mm_update(q: f64, v: &[f64], sub: &Matrix, side: Side, exec: &mut GemmExecutor) -> Result<Matrix> {
    let expected = match side {
        Side::Left => sub.rows(),
        Side::Right => sub.cols(),
    };
    if v.len() != expected {
        return Err(Error::DimMismatch(format!(
            "reflector of length {} cannot act on {:?} of a {}x{} block",
            v.len(),
            side,
            sub.rows(),
            sub.cols()
        )));
    }
    let beta = v[0] * q;
    if q == 0.0 || beta == 0.0 {
        return Err(Error::DegenerateBeta);
    }
    if sub.rows() == 0 || sub.cols() == 0 {
        return Ok(sub.clone());
    }

    // VEC DIVISION: beta plus one division per element.
    exec.offload_ops(v.len() as u64 + 1);
    let scaled: Vec<f64> = v.iter().map(|x| x / beta).collect();
    let n = v.len();

    let outer = match side {
        Side::Left => {
            let v_row = Matrix::new(1, n, v.to_vec())?;
            let vt_sub = exec.multiply_with(&v_row, sub, Operand::Householder, Operand::Streamed)?;
            let col = Matrix::new(n, 1, scaled)?;
            exec.multiply_with(&col, &vt_sub, Operand::Householder, Operand::Streamed)?
        }
        Side::Right => {
            let v_col = Matrix::new(n, 1, v.to_vec())?;
            let sub_v = exec.multiply_with(sub, &v_col, Operand::Streamed, Operand::Householder)?;
            let row = Matrix::new(1, n, scaled)?;
            exec.multiply_with(&sub_v, &row, Operand::Streamed, Operand::Householder)?
        }
    };
    let data = sub.data().iter().zip(outer.data()).map(|(s, o)| s + o).collect();
    Matrix::new(sub.rows(), sub.cols(), data)
}

/// `A = U_B * B * V_B^T`.
///
/// For a tall input (`M >= N`) `u_b` is `M x N`, `b` is `N x N` upper
/// bidiagonal and `v_b_t` is `N x N`. A wide input is factored through its
/// transpose, so `u_b` is `M x M`, `b` is `M x M` *lower* bidiagonal
/// (`lower == true`) and `v_b_t` is `M x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BidiagFactorization {
    pub u_b: Matrix,
    pub b: Matrix,
    pub v_b_t: Matrix,
    pub lower: bool,
}

impl BidiagFactorization {
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.b.rows()).map(|i| self.b.get(i, i)).collect()
    }

    /// The off-diagonal band: `b[i][i+1]` (upper) or `b[i+1][i]` (lower).
    pub fn off_diagonal(&self) -> Vec<f64> {
        (0..self.b.rows().saturating_sub(1))
            .map(|i| {
                if self.lower {
                    self.b.get(i + 1, i)
                } else {
                    self.b.get(i, i + 1)
                }
            })
            .collect()
    }
}

pub fn bidiagonalize(a: &Matrix, exec: &mut GemmExecutor) -> Result<BidiagFactorization> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::ShapeError(format!(
            "cannot bidiagonalize a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if a.rows() >= a.cols() {
        return bidiagonalize_tall(a, exec);
    }
    let f = bidiagonalize_tall(&a.transpose(), exec)?;
    Ok(BidiagFactorization {
        u_b: f.v_b_t.transpose(),
        b: f.b.transpose(),
        v_b_t: f.u_b.transpose(),
        lower: true,
    })
}

fn bidiagonalize_tall(a: &Matrix, exec: &mut GemmExecutor) -> Result<BidiagFactorization> {
    let (m, n) = (a.rows(), a.cols());
    exec.set_phase(Phase::Hbd);
    let mut work = a.clone();
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n.saturating_sub(1)];

    // Householder reduction
    for i in 0..n {
        let x = work.column(i)[i..].to_vec();
        exec.fetch_householder(x.len(), true);
        exec.retain_householder(x.len())?;
        exec.offload_ops(x.len() as u64 + 3);
        let left = house(&x);
        diag[i] = left.q;
        if left.q != 0.0 && i + 1 < n {
            let sub = work.block(i, m, i + 1, n);
            let updated = house_mm_update(left.q, &left.v, &sub, Side::Left, exec)?;
            work.set_block(i, i + 1, &updated);
        }
        work.set(i, i, left.v[0]);

        if i + 1 < n {
            let y = work.row(i)[i + 1..].to_vec();
            exec.fetch_householder(y.len(), true);
            exec.retain_householder(y.len())?;
            exec.offload_ops(y.len() as u64 + 3);
            let right = house(&y);
            sup[i] = right.q;
            if right.q != 0.0 && i + 1 < m {
                let sub = work.block(i + 1, m, i + 1, n);
                let updated = house_mm_update(right.q, &right.v, &sub, Side::Right, exec)?;
                work.set_block(i + 1, i + 1, &updated);
            }
            work.set(i, i + 1, right.v[0]);
        }
    }

    // Householder accumulation, i = N-1 down to 0
    let mut u_b = Matrix::identity(m, n);
    let mut v_b_t = Matrix::eye(n);
    for i in (0..n).rev() {
        if diag[i] != 0.0 {
            let v_left = work.column(i)[i..].to_vec();
            exec.fetch_householder(v_left.len(), false);
            let sub = u_b.block(i, m, i, n);
            let updated = house_mm_update(diag[i], &v_left, &sub, Side::Left, exec)?;
            u_b.set_block(i, i, &updated);
        }
        if i + 1 < n && sup[i] != 0.0 {
            let v_right = work.row(i)[i + 1..].to_vec();
            exec.fetch_householder(v_right.len(), false);
            let sub = v_b_t.block(i + 1, n, i + 1, n);
            let updated = house_mm_update(sup[i], &v_right, &sub, Side::Right, exec)?;
            v_b_t.set_block(i + 1, i + 1, &updated);
        }
    }
    exec.release_householders();

    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        b.set(i, i, diag[i]);
        if i + 1 < n {
            b.set(i, i + 1, sup[i]);
        }
    }
    Ok(BidiagFactorization {
        u_b,
        b,
        v_b_t,
        lower: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::matmul_ref;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `I - 2 v v^T / (v^T v)`, formed explicitly.
    fn explicit_reflector(v: &[f64]) -> Matrix {
        let n = v.len();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let mut h = Matrix::eye(n);
        for r in 0..n {
            for c in 0..n {
                h.set(r, c, h.get(r, c) - 2.0 * v[r] * v[c] / vv);
            }
        }
        h
    }

    fn reconstruct(f: &BidiagFactorization) -> Matrix {
        matmul_ref(&matmul_ref(&f.u_b, &f.b).unwrap(), &f.v_b_t).unwrap()
    }

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    fn orth_defect(q: &Matrix, columns: bool) -> f64 {
        let g = if columns {
            matmul_ref(&q.transpose(), q).unwrap()
        } else {
            matmul_ref(q, &q.transpose()).unwrap()
        };
        g.sub(&Matrix::eye(g.rows())).unwrap().max_abs()
    }

    #[test]
    fn house_examples() {
        let h = house(&[3.0, 4.0]);
        assert_eq!((h.q, h.v.clone()), (-5.0, vec![8.0, 4.0]));
        let h = house(&[5.0, 0.0, 0.0]);
        assert_eq!((h.q, h.v.clone()), (-5.0, vec![10.0, 0.0, 0.0]));
        let h = house(&[0.0, 0.0]);
        assert_eq!((h.q, h.v.clone()), (0.0, vec![0.0, 0.0]));
        // sign(0) = +1
        let h = house(&[0.0, 2.0]);
        assert_eq!((h.q, h.v.clone()), (-2.0, vec![2.0, 2.0]));
    }

    #[test]
    fn house_does_not_mutate_input() {
        let x = vec![1.0, -2.0, 2.0];
        let _ = house(&x);
        assert_eq!(x, vec![1.0, -2.0, 2.0]);
    }

    #[test]
    fn update_maps_generating_column_to_q() {
        let h = house(&[3.0, 4.0]);
        let sub = Matrix::from_rows(&[&[3.0], &[4.0]]).unwrap();
        let out = house_mm_update(h.q, &h.v, &sub, Side::Left, &mut GemmExecutor::reference()).unwrap();
        assert!((out.get(0, 0) + 5.0).abs() < 1e-14);
        assert!(out.get(1, 0).abs() < 1e-14);
    }

    #[test]
    fn update_with_axis_vector_flips_first_row() {
        let h = house(&[2.0, 0.0, 0.0]);
        let sub = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).unwrap();
        let out = house_mm_update(h.q, &h.v, &sub, Side::Left, &mut GemmExecutor::reference()).unwrap();
        let expect = matmul_ref(&explicit_reflector(&h.v), &sub).unwrap();
        assert!(out.sub(&expect).unwrap().max_abs() < 1e-14);
        assert_eq!(out.row(0), &[-1.0, -2.0]);
        assert_eq!(&out.data()[2..], &sub.data()[2..]);
    }

    #[test]
    fn right_update_matches_explicit_reflector() {
        let h = house(&[0.0, 1.0]);
        let sub = Matrix::eye(2);
        let out = house_mm_update(h.q, &h.v, &sub, Side::Right, &mut GemmExecutor::reference()).unwrap();
        let expect = matmul_ref(&sub, &explicit_reflector(&h.v)).unwrap();
        assert!(out.sub(&expect).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn update_errors() {
        let mut exec = GemmExecutor::reference();
        let sub = Matrix::eye(3);
        assert!(matches!(
            house_mm_update(-1.0, &[1.0, 0.0], &sub, Side::Left, &mut exec),
            Err(Error::DimMismatch(_))
        ));
        assert!(matches!(
            house_mm_update(0.0, &[0.0, 0.0, 0.0], &sub, Side::Right, &mut exec),
            Err(Error::DegenerateBeta)
        ));
    }

    #[test]
    fn identity_bidiagonalizes_to_signed_identity() {
        let a = Matrix::eye(3);
        let f = bidiagonalize(&a, &mut GemmExecutor::reference()).unwrap();
        for i in 0..3 {
            assert!((f.b.get(i, i).abs() - 1.0).abs() < 1e-15);
        }
        assert!(f.off_diagonal().iter().all(|&e| e == 0.0));
        assert!(rel_err(&reconstruct(&f), &a) < 1e-15);
    }

    #[test]
    fn bidiagonal_input_keeps_magnitudes() {
        let a = Matrix::from_rows(&[&[2.0, 1.0, 0.0], &[0.0, 3.0, 4.0], &[0.0, 0.0, 5.0]]).unwrap();
        let f = bidiagonalize(&a, &mut GemmExecutor::reference()).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)] {
            assert!((f.b.get(i, j).abs() - a.get(i, j)).abs() < 1e-14, "({i},{j})");
        }
        assert!(rel_err(&reconstruct(&f), &a) < 1e-15);
    }

    #[test]
    fn random_tall_and_wide() {
        let mut rng = ChaCha8Rng::seed_from_u64(6 * 4);
        for &(m, n) in &[(6, 4), (4, 6), (1, 1), (1, 5), (5, 1), (7, 7)] {
            let a = Matrix::new(m, n, (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let f = bidiagonalize(&a, &mut GemmExecutor::reference()).unwrap();
            assert!(rel_err(&reconstruct(&f), &a) <= 1e-12, "{m}x{n}");
            assert!(orth_defect(&f.u_b, true) < 1e-10);
            assert!(orth_defect(&f.v_b_t, false) < 1e-10);
            assert_eq!(f.lower, m < n);
            let k = f.b.rows();
            for r in 0..k {
                for c in 0..k {
                    let band = if f.lower {
                        r == c || r == c + 1
                    } else {
                        r == c || c == r + 1
                    };
                    if !band {
                        assert_eq!(f.b.get(r, c), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_column_is_skipped() {
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 2.0], &[0.0, 3.0]]).unwrap();
        let f = bidiagonalize(&a, &mut GemmExecutor::reference()).unwrap();
        assert_eq!(f.b.get(0, 0), 0.0);
        assert!(rel_err(&reconstruct(&f), &a) < 1e-14);
        let z = Matrix::zeros(3, 2);
        let f = bidiagonalize(&z, &mut GemmExecutor::reference()).unwrap();
        assert_eq!(reconstruct(&f).max_abs(), 0.0);
    }

    #[test]
    fn empty_matrix_rejected() {
        assert!(matches!(
            bidiagonalize(&Matrix::zeros(3, 0), &mut GemmExecutor::reference()),
            Err(Error::ShapeError(_))
        ));
    }

    #[test]
    fn many_random_factorizations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        for _ in 0..1000 {
            let m = rng.gen_range(1..=32);
            let n = rng.gen_range(1..=32);
            let a = Matrix::new(m, n, (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let f = bidiagonalize(&a, &mut GemmExecutor::reference()).unwrap();
            assert!(rel_err(&reconstruct(&f), &a) <= 1e-12, "{m}x{n}");
            assert!(orth_defect(&f.u_b, true) <= 1e-10);
            assert!(orth_defect(&f.v_b_t, false) <= 1e-10);
        }
    }
}

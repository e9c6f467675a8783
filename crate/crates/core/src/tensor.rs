//! Dense row-major tensors and matrices.
//!
//! All storage is `f64`. A tensor also carries a [`Precision`] flag: in
//! 32-bit mode every element is rounded to the nearest `f32` on
//! construction and the file writer emits 4-byte elements. Reshape only
//! reinterprets dims; element order never changes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl Precision {
    /// Machine epsilon of the mode.
    pub fn epsilon(self) -> f64 {
        match self {
            Precision::F64 => f64::EPSILON,
            Precision::F32 => f32::EPSILON as f64,
        }
    }

    pub fn round(self, x: f64) -> f64 {
        match self {
            Precision::F64 => x,
            Precision::F32 => x as f32 as f64,
        }
    }
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidDims(dims.to_vec()));
    }
    Ok(dims.iter().product())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
    precision: Precision,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::with_precision(dims, data, Precision::F64)
    }

    pub fn with_precision(dims: Vec<usize>, mut data: Vec<f64>, precision: Precision) -> Result<Self> {
        let numel = check_dims(&dims)?;
        if data.len() != numel {
            return Err(Error::DataLength { len: data.len(), dims });
        }
        if precision == Precision::F32 {
            data.iter_mut().for_each(|x| *x = precision.round(*x));
        }
        Ok(Self { dims, data, precision })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let numel = check_dims(&dims)?;
        Self::new(dims, vec![0.0; numel])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Reinterprets the element sequence under `new_dims`.
    pub fn reshape(&self, new_dims: &[usize]) -> Result<Tensor> {
        self.clone().into_reshaped(new_dims)
    }

    pub fn into_reshaped(mut self, new_dims: &[usize]) -> Result<Tensor> {
        let numel = check_dims(new_dims)?;
        if numel != self.data.len() {
            return Err(Error::ElementCountMismatch {
                from: self.data.len(),
                to: numel,
            });
        }
        self.dims = new_dims.to_vec();
        Ok(self)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.data)
    }

    /// Views the tensor as a matrix. A 1-D tensor of length n becomes `[1, n]`.
    pub fn to_matrix(&self) -> Result<Matrix> {
        match self.dims.as_slice() {
            [n] => Matrix::new(1, *n, self.data.clone()),
            [r, c] => Matrix::new(*r, *c, self.data.clone()),
            d => Err(Error::ShapeError(format!(
                "expected a 1-D or 2-D tensor, got dims {d:?}"
            ))),
        }
    }
}

/// `sqrt(sum x^2)` over a flat slice.
pub fn frobenius_norm(data: &[f64]) -> f64 {
    data.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(&[rows, cols])?;
        if data.len() != rows * cols {
            return Err(Error::DataLength {
                len: data.len(),
                dims: vec![rows, cols],
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeError("ragged rows".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    /// Matrices with a zero extent are allowed here; they arise as empty
    /// trailing submatrices and are never multiplied.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// `rows x cols` with ones on the main diagonal.
    pub fn identity(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m.data[i * cols + i] = 1.0;
        }
        m
    }

    pub fn eye(n: usize) -> Self {
        Self::identity(n, n)
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// Copies rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Matrix {
        let mut out = Matrix::zeros(r1 - r0, c1 - c0);
        for r in r0..r1 {
            let src = &self.data[r * self.cols + c0..r * self.cols + c1];
            out.data[(r - r0) * out.cols..(r - r0 + 1) * out.cols].copy_from_slice(src);
        }
        out
    }

    /// Writes `src` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Matrix) {
        for r in 0..src.rows {
            let dst = (r0 + r) * self.cols + c0;
            self.data[dst..dst + src.cols].copy_from_slice(src.row(r));
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.data)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimMismatch(format!(
                "{}x{} - {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn into_tensor(self) -> Tensor {
        Tensor {
            dims: vec![self.rows, self.cols],
            data: self.data,
            precision: Precision::F64,
        }
    }
}

/// Triple-loop product, inner dimension innermost, accumulating from 0.0.
pub fn matmul_ref(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::DimMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut c = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for j in 0..b.cols {
            let mut acc = 0.0;
            for k in 0..a.cols {
                acc += a.data[i * a.cols + k] * b.data[k * b.cols + j];
            }
            c.data[i * b.cols + j] = acc;
        }
    }
    Ok(c)
}

/// Contracts the last mode of `x` with the first mode of `y` by reshaping
/// both to matrices, multiplying, and reshaping the product back.
pub fn tensor_contract(x: &Tensor, y: &Tensor) -> Result<Tensor> {
    let (&inner, x_outer) = x.dims.split_last().expect("tensor has >= 1 dim");
    let (&inner_y, y_outer) = y.dims.split_first().expect("tensor has >= 1 dim");
    if inner != inner_y {
        return Err(Error::ContractDimMismatch {
            left: inner,
            right: inner_y,
        });
    }
    let rows: usize = x_outer.iter().product();
    let cols: usize = y_outer.iter().product();
    let a = Matrix::new(rows, inner, x.data.clone())?;
    let b = Matrix::new(inner, cols, y.data.clone())?;
    let product = matmul_ref(&a, &b)?;

    let mut dims: Vec<usize> = x_outer.iter().chain(y_outer).copied().collect();
    if dims.is_empty() {
        dims.push(1);
    }
    Ok(Tensor {
        dims,
        data: product.data,
        precision: x.precision,
    })
}

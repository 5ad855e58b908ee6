//! Dense order-3 tensors, matrices, and Tucker factorizations.
//!
//! Indices are 0-based in code. Tensor entries are stored with the first
//! index varying fastest: entry `(i, j, k)` of an `n1 x n2 x n3` tensor lives
//! at `i + n1 * (j + n2 * k)`. Matrices are row-major.
//!
//! Unfoldings follow the cyclic index law: the mode-`k` unfolding has rows
//! indexed by `i_k` and columns by `i_{k+1} + n_{k+1} * i_{k+2}` (modes taken
//! cyclically). They are built entry by entry from that law, never by
//! reinterpreting memory.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
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

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// `self * other`.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let orow = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^T * other`.
    pub fn transpose_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "row counts differ");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (r, a) in arow.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`.
    pub fn mul_transpose(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "column counts differ");
        Matrix::from_fn(self.rows, other.rows, |r, c| dot(self.row(r), other.row(c)))
    }

    /// `self^T * self`.
    pub fn gram(&self) -> Matrix {
        self.transpose_mul(self)
    }

    pub fn leading_columns(&self, k: usize) -> Matrix {
        Matrix::from_fn(self.rows, k, |r, c| self.get(r, c))
    }

    pub fn with_column(&self, col: Vec<f64>) -> Matrix {
        assert_eq!(col.len(), self.rows);
        Matrix::from_fn(self.rows, self.cols + 1, |r, c| {
            if c < self.cols {
                self.get(r, c)
            } else {
                col[r]
            }
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest Euclidean row norm.
    pub fn two_to_inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense `n1 x n2 x n3` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        let len = dims.0 * dims.1 * dims.2;
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(Error::Shape(format!("dimensions must be positive, got {dims:?}")));
        }
        if data.len() != len {
            return Err(Error::Shape(format!(
                "tensor {dims:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for k in 0..dims.2 {
            for j in 0..dims.1 {
                for i in 0..dims.0 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    /// Checked element access.
    pub fn get(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        if i >= self.dims.0 || j >= self.dims.1 || k >= self.dims.2 {
            return Err(Error::Index {
                i,
                j,
                k,
                dims: self.dims,
            });
        }
        Ok(self.data[self.offset(i, j, k)])
    }

    /// Contiguous frontal slice `k` (length `n1 * n2`, `i` fastest).
    pub fn slice(&self, k: usize) -> &[f64] {
        let s = self.dims.0 * self.dims.1;
        &self.data[k * s..(k + 1) * s]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.dims.0 * self.dims.1;
        &mut self.data[k * s..(k + 1) * s]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.check_same(other)?;
        Ok(Tensor3 {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn check_same(&self, other: &Tensor3) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "tensor dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        mode_unfold(self, mode)
    }

    /// Mode-`mode` product `self x_mode m`, where `m` is `p x n_mode`.
    pub fn mode_product(&self, mode: usize, m: &Matrix) -> Result<Tensor3> {
        mode_product(self, mode, m)
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        debug_assert!(i < self.dims.0 && j < self.dims.1 && k < self.dims.2);
        &self.data[self.offset(i, j, k)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        debug_assert!(i < self.dims.0 && j < self.dims.1 && k < self.dims.2);
        let o = self.offset(i, j, k);
        &mut self.data[o]
    }
}

fn check_mode(mode: usize) -> Result<()> {
    if !(1..=3).contains(&mode) {
        return Err(Error::InvalidArgument(format!("mode must be 1, 2 or 3, got {mode}")));
    }
    Ok(())
}

fn dims_array(dims: (usize, usize, usize)) -> [usize; 3] {
    [dims.0, dims.1, dims.2]
}

/// Mode-`mode` unfolding (`mode` in 1..=3).
pub fn mode_unfold(t: &Tensor3, mode: usize) -> Result<Matrix> {
    check_mode(mode)?;
    let n = dims_array(t.dims);
    let k0 = mode - 1;
    let (k1, k2) = ((k0 + 1) % 3, (k0 + 2) % 3);
    let mut out = Matrix::zeros(n[k0], n[k1] * n[k2]);
    for c in 0..t.dims.2 {
        for b in 0..t.dims.1 {
            for a in 0..t.dims.0 {
                let idx = [a, b, c];
                let col = idx[k1] + n[k1] * idx[k2];
                out.set(idx[k0], col, t[(a, b, c)]);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`mode_unfold`].
pub fn mode_fold(m: &Matrix, mode: usize, dims: (usize, usize, usize)) -> Result<Tensor3> {
    check_mode(mode)?;
    let n = dims_array(dims);
    let k0 = mode - 1;
    let (k1, k2) = ((k0 + 1) % 3, (k0 + 2) % 3);
    if m.rows() != n[k0] || m.cols() != n[k1] * n[k2] {
        return Err(Error::Shape(format!(
            "{}x{} matrix cannot fold into {dims:?} along mode {mode}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(Tensor3::from_fn(dims, |a, b, c| {
        let idx = [a, b, c];
        m.get(idx[k0], idx[k1] + n[k1] * idx[k2])
    }))
}

/// `t x_mode m` with `m` of shape `p x n_mode`.
pub fn mode_product(t: &Tensor3, mode: usize, m: &Matrix) -> Result<Tensor3> {
    check_mode(mode)?;
    let (n1, n2, n3) = t.dims;
    let nk = dims_array(t.dims)[mode - 1];
    if m.cols() != nk {
        return Err(Error::Shape(format!(
            "mode-{mode} product needs {nk} matrix columns, got {}",
            m.cols()
        )));
    }
    let p = m.rows();
    match mode {
        1 => {
            let mut out = Tensor3::zeros((p, n2, n3));
            for f in 0..n2 * n3 {
                let fiber = &t.data[f * n1..(f + 1) * n1];
                let ofiber = &mut out.data[f * p..(f + 1) * p];
                for (a, o) in ofiber.iter_mut().enumerate() {
                    *o = dot(m.row(a), fiber);
                }
            }
            Ok(out)
        }
        2 => {
            let mut out = Tensor3::zeros((n1, p, n3));
            for k in 0..n3 {
                for b in 0..p {
                    let orow = b * n1 + k * n1 * p;
                    for j in 0..n2 {
                        let coef = m.get(b, j);
                        if coef == 0.0 {
                            continue;
                        }
                        let src = &t.data[n1 * (j + n2 * k)..n1 * (j + n2 * k) + n1];
                        for (o, s) in out.data[orow..orow + n1].iter_mut().zip(src) {
                            *o += coef * s;
                        }
                    }
                }
            }
            Ok(out)
        }
        _ => {
            let s = n1 * n2;
            let mut out = Tensor3::zeros((n1, n2, p));
            for c in 0..p {
                let (_, rest) = out.data.split_at_mut(c * s);
                let oslice = &mut rest[..s];
                for k in 0..n3 {
                    let coef = m.get(c, k);
                    if coef == 0.0 {
                        continue;
                    }
                    for (o, x) in oslice.iter_mut().zip(&t.data[k * s..(k + 1) * s]) {
                        *o += coef * x;
                    }
                }
            }
            Ok(out)
        }
    }
}

pub fn frobenius_norm(t: &Tensor3) -> f64 {
    t.data.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn two_to_inf_norm(m: &Matrix) -> f64 {
    m.two_to_inf_norm()
}

/// Core tensor with one factor matrix per mode; represents
/// `core x_1 u x_2 v x_3 w`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerFactors {
    pub core: Tensor3,
    pub u: Matrix,
    pub v: Matrix,
    pub w: Matrix,
}

impl TuckerFactors {
    pub fn new(core: Tensor3, u: Matrix, v: Matrix, w: Matrix) -> Result<Self> {
        let f = Self { core, u, v, w };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let (r1, r2, r3) = self.core.dims();
        for (name, m, r) in [("u", &self.u, r1), ("v", &self.v, r2), ("w", &self.w, r3)] {
            if m.cols() != r {
                return Err(Error::Shape(format!(
                    "factor {name} has {} columns, core rank is {r}",
                    m.cols()
                )));
            }
            if r > m.rows() {
                return Err(Error::Shape(format!(
                    "factor {name}: rank {r} exceeds dimension {}",
                    m.rows()
                )));
            }
        }
        Ok(())
    }

    pub fn ranks(&self) -> (usize, usize, usize) {
        self.core.dims()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.u.rows(), self.v.rows(), self.w.rows())
    }

    pub fn assemble(&self) -> Tensor3 {
        tucker_assemble(self).expect("factors validated at construction")
    }
}

/// `m_{ijk} = sum_{abc} S_{abc} U_{ia} V_{jb} W_{kc}`.
pub fn tucker_assemble(f: &TuckerFactors) -> Result<Tensor3> {
    f.validate()?;
    f.core
        .mode_product(1, &f.u)?
        .mode_product(2, &f.v)?
        .mode_product(3, &f.w)
}

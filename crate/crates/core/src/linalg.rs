//! Small dense linear-algebra helpers backed by `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Above this size, Gram-matrix eigendecompositions are replaced by
/// subspace iteration.
const DIRECT_LIMIT: usize = 400;

pub(crate) fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
/// Column `c` of the returned matrix is the eigenvector of value `c`.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if m.rows() != m.cols() {
        return Err(Error::Shape(format!(
            "symmetric_eigen needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let eig = SymmetricEigen::new(to_na(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Singular values of `m`, sorted descending.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(m).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// The `r`-th largest singular value (1-based `r`).
pub fn sigma_r(m: &Matrix, r: usize) -> Result<f64> {
    let k = m.rows().min(m.cols());
    if r == 0 || r > k {
        return Err(Error::InvalidArgument(format!(
            "singular value index {r} outside 1..={k}"
        )));
    }
    Ok(singular_values(m)[r - 1])
}

/// Spectral norm (largest singular value); zero for empty matrices.
pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Orthonormal basis of the leading `r`-dimensional left singular subspace.
pub fn leading_left_singular_vectors(m: &Matrix, r: usize) -> Result<Matrix> {
    let (rows, cols) = (m.rows(), m.cols());
    if r == 0 || r > rows {
        return Err(Error::InvalidArgument(format!(
            "requested {r} singular vectors from a matrix with {rows} rows"
        )));
    }
    if rows <= DIRECT_LIMIT {
        let (_, vecs) = symmetric_eigen(&m.mul_transpose(m))?;
        return Ok(vecs.leading_columns(r));
    }
    if cols <= DIRECT_LIMIT {
        let svd = to_na(m).svd(true, false);
        let u = svd.u.expect("left vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut out = Matrix::from_fn(rows, r, |i, c| {
            order.get(c).map_or(0.0, |&src| u[(i, src)])
        });
        if r > order.len() {
            // rank(m) < r: complete the basis with arbitrary orthonormal directions
            out = complete_basis(&out, order.len());
        }
        return Ok(out);
    }
    Ok(subspace_iteration(m, r))
}

/// Block power iteration on `m m^T` with Rayleigh-Ritz extraction.
fn subspace_iteration(m: &Matrix, r: usize) -> Matrix {
    let rows = m.rows();
    let p = (r + 8).min(rows);
    // deterministic start: a fixed pseudo-random block
    let mut state = 0x9e37_79b9_7f4a_7c15_u64;
    let mut q = Matrix::from_fn(rows, p, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    q = orthonormalize(&q);
    let mut prev: Option<Matrix> = None;
    for _ in 0..200 {
        let z = m.mul(&m.transpose_mul(&q));
        q = orthonormalize(&z);
        let lead = rayleigh_ritz(m, &q, r);
        if let Some(p) = &prev {
            // compare projectors through ||P^T Q||_F^2 = r at convergence
            let overlap = p.transpose_mul(&lead).frobenius_norm().powi(2);
            if (r as f64 - overlap).abs() < 1e-13 * r as f64 {
                return lead;
            }
        }
        prev = Some(lead);
    }
    prev.expect("at least one iteration")
}

fn rayleigh_ritz(m: &Matrix, q: &Matrix, r: usize) -> Matrix {
    let b = q.transpose_mul(m);
    let (_, vecs) = symmetric_eigen(&b.mul_transpose(&b)).expect("square");
    q.mul(&vecs.leading_columns(r))
}

/// Orthonormal columns spanning the columns of `m` (thin QR).
pub fn orthonormalize(m: &Matrix) -> Matrix {
    let qr = to_na(m).qr();
    from_na(&qr.q())
}

/// Extends the first `k` orthonormal columns of `m` to a full orthonormal set
/// of `m.cols()` columns.
fn complete_basis(m: &Matrix, k: usize) -> Matrix {
    let (rows, cols) = (m.rows(), m.cols());
    let mut out = m.leading_columns(k);
    let mut e = 0;
    while out.cols() < cols && e < rows {
        let mut v: Vec<f64> = (0..rows).map(|i| if i == e { 1.0 } else { 0.0 }).collect();
        for c in 0..out.cols() {
            let d: f64 = (0..rows).map(|i| out.get(i, c) * v[i]).sum();
            for (i, x) in v.iter_mut().enumerate() {
                *x -= d * out.get(i, c);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out = out.with_column(v.iter().map(|x| x / norm).collect());
        }
        e += 1;
    }
    out
}

/// Inverse symmetric square root `A^{-1/2}` of a positive-definite matrix.
///
/// Fails when the smallest eigenvalue is below `rel_tol` times the largest.
pub fn inverse_sqrt_spd(a: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let (vals, vecs) = symmetric_eigen(a)?;
    let max = vals.first().copied().unwrap_or(0.0);
    let min = vals.last().copied().unwrap_or(0.0);
    if !(max > 0.0) || min <= rel_tol * max {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::Singular { condition });
    }
    let n = a.rows();
    Ok(Matrix::from_fn(n, n, |r, c| {
        (0..n)
            .map(|k| vecs.get(r, k) * vecs.get(c, k) / vals[k].sqrt())
            .sum()
    }))
}

//! Independent oracles shared by the integration suites. None of these call
//! the library routine they check.

#![allow(dead_code)]

use longnet::estimator::{grad_factors, log_likelihood};
use longnet::events::equal_partition;
use longnet::{Matrix, Tensor3, TuckerFactors};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, a: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-a..a))
}

pub fn uniform_tensor(rng: &mut ChaCha8Rng, dims: (usize, usize, usize), a: f64) -> Tensor3 {
    Tensor3::from_fn(dims, |_, _, _| rng.random_range(-a..a))
}

/// Quadruple-loop Tucker assembly.
pub fn naive_assemble(f: &TuckerFactors) -> Tensor3 {
    let (r1, r2, r3) = f.core.dims();
    Tensor3::from_fn(f.dims(), |i, j, k| {
        let mut s = 0.0;
        for a in 0..r1 {
            for b in 0..r2 {
                for c in 0..r3 {
                    s += f.core[(a, b, c)] * f.u.get(i, a) * f.v.get(j, b) * f.w.get(k, c);
                }
            }
        }
        s
    })
}

/// Random Tucker factors whose assembled tensor has `max |m| = peak`.
pub fn bounded_factors(
    rng: &mut ChaCha8Rng,
    dims: (usize, usize, usize),
    ranks: (usize, usize, usize),
    peak: f64,
) -> TuckerFactors {
    let u = uniform_matrix(rng, dims.0, ranks.0, 1.0);
    let v = uniform_matrix(rng, dims.1, ranks.1, 1.0);
    let w = uniform_matrix(rng, dims.2, ranks.2, 1.0);
    let core = uniform_tensor(rng, ranks, 1.0);
    let f = TuckerFactors::new(core, u, v, w).unwrap();
    let s = peak / naive_assemble(&f).max_abs();
    TuckerFactors {
        core: f.core.map(|x| x * s),
        ..f
    }
}

/// Largest blockwise relative error `||g_fd - g|| / ||g||` between the
/// analytic factor gradients and central differences of the
/// log-likelihood, on a random instance with `|m| <= 3`.
pub fn gradient_check(seed: u64, dims: (usize, usize, usize), ranks: (usize, usize, usize)) -> f64 {
    let mut rng = rng(seed);
    let f = bounded_factors(&mut rng, dims, ranks, 3.0);
    let counts = Tensor3::from_fn(dims, |_, _, _| rng.random_range(0..7) as f64);
    let partition = equal_partition(2.0, dims.2).unwrap();
    let lambda0 = 1.3;
    let analytic = grad_factors(&f, &counts, &partition, lambda0).unwrap();
    let objective = |g: &TuckerFactors| log_likelihood(&naive_assemble(g), &counts, &partition, lambda0).unwrap();
    let h = 1e-6;

    let mut worst: f64 = 0.0;
    for block in 0..4 {
        let len = match block {
            0 => f.core.len(),
            1 => f.u.as_slice().len(),
            2 => f.v.as_slice().len(),
            _ => f.w.as_slice().len(),
        };
        let (mut num, mut den) = (0.0, 0.0);
        for p in 0..len {
            let shifted = |delta: f64| {
                let mut g = f.clone();
                match block {
                    0 => g.core.as_mut_slice()[p] += delta,
                    1 => g.u.as_mut_slice()[p] += delta,
                    2 => g.v.as_mut_slice()[p] += delta,
                    _ => g.w.as_mut_slice()[p] += delta,
                }
                g
            };
            let fd = (objective(&shifted(h)) - objective(&shifted(-h))) / (2.0 * h);
            let exact = match block {
                0 => analytic.core.as_slice()[p],
                1 => analytic.u.as_slice()[p],
                2 => analytic.v.as_slice()[p],
                _ => analytic.w.as_slice()[p],
            };
            num += (fd - exact).powi(2);
            den += exact.powi(2);
        }
        worst = worst.max((num / den).sqrt());
    }
    worst
}

/// Within-segment sum of squares by a two-pass loop.
pub fn segment_loss(rows: &Matrix, first: usize, last: usize) -> f64 {
    let d = rows.cols();
    let count = (last - first + 1) as f64;
    let mut loss = 0.0;
    for c in 0..d {
        let mean = (first..=last).map(|r| rows.get(r, c)).sum::<f64>() / count;
        loss += (first..=last).map(|r| (rows.get(r, c) - mean).powi(2)).sum::<f64>();
    }
    loss
}

/// Every split of `0..l` into `k` contiguous segments, as last indices.
pub fn all_splits(l: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, l: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            cur.push(l - 1);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for end in start..=(l - k) {
            cur.push(end);
            rec(end + 1, l, k - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, l, k, &mut Vec::new(), &mut out);
    out
}

pub fn split_loss(rows: &Matrix, ends: &[usize]) -> f64 {
    let mut first = 0;
    let mut total = 0.0;
    for &e in ends {
        total += segment_loss(rows, first, e);
        first = e + 1;
    }
    total
}

/// Exhaustive minimum of the split loss.
pub fn exhaustive_best(rows: &Matrix, k: usize) -> (f64, Vec<usize>) {
    all_splits(rows.rows(), k)
        .into_iter()
        .map(|s| (split_loss(rows, &s), s))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix; eigenvalues
/// descending, eigenvectors in columns.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|r| a.row(r).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|r| (0..n).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q))).map(|(p, q)| m[p][q].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y][y].total_cmp(&m[x][x]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[r][order[c]]);
    (values, vectors)
}

/// `A^{-1/2}` of a symmetric positive-definite matrix via [`jacobi_eigen`].
pub fn jacobi_inverse_sqrt(a: &Matrix) -> Matrix {
    let (vals, vecs) = jacobi_eigen(a);
    let n = a.rows();
    Matrix::from_fn(n, n, |r, c| (0..n).map(|k| vecs.get(r, k) * vecs.get(c, k) / vals[k].sqrt()).sum())
}

/// Loop-based mode-`mode` unfolding by the cyclic index law.
pub fn loop_unfold(t: &Tensor3, mode: usize) -> Matrix {
    let (n1, n2, n3) = t.dims();
    match mode {
        1 => Matrix::from_fn(n1, n2 * n3, |i, c| t[(i, c % n2, c / n2)]),
        2 => Matrix::from_fn(n2, n3 * n1, |j, c| t[(c / n3, j, c % n3)]),
        _ => Matrix::from_fn(n3, n1 * n2, |k, c| t[(c % n1, c / n1, k)]),
    }
}

/// Leading `r` eigenvectors of `m m^T` by Jacobi.
fn leading_gram_vectors(m: &Matrix, r: usize) -> Matrix {
    let (_, vecs) = jacobi_eigen(&m.mul_transpose(m));
    Matrix::from_fn(m.rows(), r, |i, c| vecs.get(i, c))
}

fn orthonormal_columns(rng: &mut ChaCha8Rng, n: usize, r: usize) -> Matrix {
    let a = uniform_matrix(rng, n, r, 1.0);
    let g = jacobi_inverse_sqrt(&a.gram());
    a.mul(&g)
}

fn mode_mul_t(t: &Tensor3, mode: usize, m: &Matrix) -> Tensor3 {
    // t x_mode m^T, written as loops
    let (n1, n2, n3) = t.dims();
    let r = m.cols();
    match mode {
        1 => Tensor3::from_fn((r, n2, n3), |a, j, k| (0..n1).map(|i| m.get(i, a) * t[(i, j, k)]).sum()),
        2 => Tensor3::from_fn((n1, r, n3), |i, b, k| (0..n2).map(|j| m.get(j, b) * t[(i, j, k)]).sum()),
        _ => Tensor3::from_fn((n1, n2, r), |i, j, c| (0..n3).map(|k| m.get(k, c) * t[(i, j, k)]).sum()),
    }
}

/// Best rank-`ranks` Tucker reconstruction error found by alternating
/// least squares from several random orthonormal starts.
pub fn als_best_error(t: &Tensor3, ranks: (usize, usize, usize), starts: usize, seed: u64) -> f64 {
    let (n1, n2, n3) = t.dims();
    let norm2: f64 = t.as_slice().iter().map(|x| x * x).sum();
    let mut rng = rng(seed);
    let mut best = f64::INFINITY;
    for _ in 0..starts {
        let mut v = orthonormal_columns(&mut rng, n2, ranks.1);
        let mut w = orthonormal_columns(&mut rng, n3, ranks.2);
        let mut err = f64::INFINITY;
        for _ in 0..200 {
            let u = leading_gram_vectors(&loop_unfold(&mode_mul_t(&mode_mul_t(t, 2, &v), 3, &w), 1), ranks.0);
            v = leading_gram_vectors(&loop_unfold(&mode_mul_t(&mode_mul_t(t, 1, &u), 3, &w), 2), ranks.1);
            w = leading_gram_vectors(&loop_unfold(&mode_mul_t(&mode_mul_t(t, 1, &u), 2, &v), 3), ranks.2);
            let core = mode_mul_t(&mode_mul_t(&mode_mul_t(t, 1, &u), 2, &v), 3, &w);
            let core2: f64 = core.as_slice().iter().map(|x| x * x).sum();
            let next = (norm2 - core2).max(0.0).sqrt();
            let done = (err - next).abs() <= 1e-13 * norm2.sqrt();
            err = next;
            if done {
                break;
            }
        }
        best = best.min(err);
    }
    let _ = n1;
    best
}

/// `||a - b||_F`.
pub fn distance(a: &Tensor3, b: &Tensor3) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

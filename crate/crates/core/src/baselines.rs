//! Spectral Tucker estimators: truncated higher-order SVD and higher-order
//! orthogonal iteration.

use crate::error::{Error, Result};
use crate::linalg::leading_left_singular_vectors;
use crate::tensor::{mode_unfold, Matrix, Tensor3, TuckerFactors};

pub const HOOI_DEFAULT_ITERS: usize = 50;
pub const HOOI_DEFAULT_TOL: f64 = 1e-9;

fn check_ranks(t: &Tensor3, ranks: (usize, usize, usize)) -> Result<()> {
    let (n1, n2, n3) = t.dims();
    let ok = |r: usize, n: usize| r >= 1 && r <= n;
    if !(ok(ranks.0, n1) && ok(ranks.1, n2) && ok(ranks.2, n3)) {
        return Err(Error::InvalidArgument(format!(
            "ranks {ranks:?} must lie in 1..=dims {:?}",
            t.dims()
        )));
    }
    Ok(())
}

fn core_of(t: &Tensor3, u: &Matrix, v: &Matrix, w: &Matrix) -> Result<Tensor3> {
    t.mode_product(1, &u.transpose())?
        .mode_product(2, &v.transpose())?
        .mode_product(3, &w.transpose())
}

/// Truncated HOSVD: each factor holds the leading left singular vectors of
/// the corresponding unfolding; the core is `t` projected onto them.
pub fn hosvd(t: &Tensor3, ranks: (usize, usize, usize)) -> Result<TuckerFactors> {
    check_ranks(t, ranks)?;
    let u = leading_left_singular_vectors(&mode_unfold(t, 1)?, ranks.0)?;
    let v = leading_left_singular_vectors(&mode_unfold(t, 2)?, ranks.1)?;
    let w = leading_left_singular_vectors(&mode_unfold(t, 3)?, ranks.2)?;
    let core = core_of(t, &u, &v, &w)?;
    TuckerFactors::new(core, u, v, w)
}

/// Result of [`hooi`] with the per-iteration reconstruction errors.
#[derive(Debug, Clone)]
pub struct HooiResult {
    pub factors: TuckerFactors,
    /// `||t - assemble(factors)||_F` after HOSVD (first entry) and after
    /// each sweep.
    pub errors: Vec<f64>,
}

/// Higher-order orthogonal iteration started from HOSVD. Runs at most
/// `iters` sweeps, stopping early when the relative change of the
/// reconstruction error falls below `tol`.
pub fn hooi(t: &Tensor3, ranks: (usize, usize, usize), iters: usize, tol: f64) -> Result<HooiResult> {
    if iters == 0 {
        return Err(Error::InvalidArgument("HOOI needs at least one iteration".into()));
    }
    let mut f = hosvd(t, ranks)?;
    let norm2 = t.frobenius_norm().powi(2);
    // for orthonormal factors ||t - [S; U, V, W]||^2 = ||t||^2 - ||S||^2
    let error_of = |core: &Tensor3| (norm2 - core.frobenius_norm().powi(2)).max(0.0).sqrt();
    let mut errors = vec![error_of(&f.core)];
    for _ in 0..iters {
        let u = leading_left_singular_vectors(
            &mode_unfold(
                &t.mode_product(2, &f.v.transpose())?.mode_product(3, &f.w.transpose())?,
                1,
            )?,
            ranks.0,
        )?;
        let v = leading_left_singular_vectors(
            &mode_unfold(
                &t.mode_product(1, &u.transpose())?.mode_product(3, &f.w.transpose())?,
                2,
            )?,
            ranks.1,
        )?;
        let w = leading_left_singular_vectors(
            &mode_unfold(
                &t.mode_product(1, &u.transpose())?.mode_product(2, &v.transpose())?,
                3,
            )?,
            ranks.2,
        )?;
        let core = core_of(t, &u, &v, &w)?;
        let err = error_of(&core);
        let prev = *errors.last().expect("non-empty");
        f = TuckerFactors::new(core, u, v, w)?;
        errors.push(err);
        if (prev - err).abs() <= tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(HooiResult { factors: f, errors })
}

//! Synthetic ground truth with piecewise-constant temporal embeddings,
//! Poisson-process edge sampling, and error metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::estimator::EXP_CLAMP;
use crate::events::{Edge, EdgeSet, Partition};
use crate::linalg::{inverse_sqrt_spd, orthonormalize};
use crate::tensor::{Matrix, Tensor3, TuckerFactors};

const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    /// Nodes per side (`n1 = n2 = n`).
    pub n: usize,
    pub horizon: f64,
    pub ranks: (usize, usize, usize),
    /// Number of true constant segments.
    pub k0: usize,
    /// Value on the core superdiagonal; other core entries are zero.
    pub diag_s: f64,
    pub lambda0: f64,
    pub seed: u64,
    /// Bound on largest / smallest true segment width.
    pub max_length_ratio: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 50,
            horizon: 50.0,
            ranks: (3, 3, 3),
            k0: 3,
            diag_s: 0.5,
            lambda0: 1.0,
            seed: 0,
            max_length_ratio: 3.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let (r1, r2, r3) = self.ranks;
        if self.n == 0 || r1 == 0 || r2 == 0 || r3 == 0 || r1 > self.n || r2 > self.n {
            return Err(Error::InvalidArgument(format!(
                "ranks {:?} must be positive and at most n = {}",
                self.ranks, self.n
            )));
        }
        if self.k0 == 0 {
            return Err(Error::InvalidArgument("k0 must be at least 1".into()));
        }
        if self.k0 < r3 {
            return Err(Error::Infeasible(format!(
                "k0 = {} segments cannot carry an orthogonal temporal factor of rank {r3}",
                self.k0
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.max_length_ratio >= 1.0) {
            return Err(Error::InvalidArgument("max_length_ratio must be at least 1".into()));
        }
        if !(self.lambda0 > 0.0) {
            return Err(Error::InvalidArgument("lambda0 must be positive".into()));
        }
        if !self.diag_s.is_finite() {
            return Err(Error::InvalidArgument("diag_s must be finite".into()));
        }
        Ok(())
    }
}

/// True factors (with `w` holding one row per true segment) and the true
/// change points.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub factors: TuckerFactors,
    pub eta: Partition,
}

/// Norms relevant to the constraint radii of the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub core_frobenius: f64,
    pub u_two_to_inf: f64,
    pub v_two_to_inf: f64,
    pub max_w_row: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl NormReport {
    /// Smallest radii for which the truth satisfies the theoretical
    /// norm bounds, in the order `(c_S, c1, c2, c3)`.
    pub fn required_radii(&self, k0: usize) -> (f64, f64, f64, f64) {
        let k = k0 as f64;
        (
            self.core_frobenius * 2f64.max((k * self.d_min).powf(-0.5)),
            self.u_two_to_inf,
            self.v_two_to_inf,
            self.max_w_row * 2f64.max((k * self.d_max).sqrt()),
        )
    }
}

impl GroundTruth {
    /// The `n x n x K0` log-intensity tensor on the true segments.
    pub fn theta(&self) -> Tensor3 {
        self.factors.assemble()
    }

    pub fn horizon(&self) -> f64 {
        self.eta.horizon()
    }

    pub fn norm_report(&self) -> NormReport {
        let w = self.eta.widths();
        let t = self.eta.horizon();
        NormReport {
            core_frobenius: self.factors.core.frobenius_norm(),
            u_two_to_inf: self.factors.u.two_to_inf_norm(),
            v_two_to_inf: self.factors.v.two_to_inf_norm(),
            max_w_row: self.factors.w.two_to_inf_norm(),
            d_min: w.iter().copied().fold(f64::INFINITY, f64::min) / t,
            d_max: w.iter().copied().fold(0.0, f64::max) / t,
        }
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_change_points(cfg: &SyntheticConfig, rng: &mut impl Rng) -> Result<Partition> {
    let t = cfg.horizon;
    if cfg.k0 == 1 {
        return Partition::new(vec![t]);
    }
    for _ in 0..MAX_REJECTIONS {
        let mut pts: Vec<f64> = (0..cfg.k0 - 1).map(|_| rng.random_range(0.0..t)).collect();
        pts.sort_by(f64::total_cmp);
        pts.push(t);
        let mut prev = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for &p in &pts {
            lo = lo.min(p - prev);
            hi = hi.max(p - prev);
            prev = p;
        }
        if lo > 0.0 && hi <= cfg.max_length_ratio * lo {
            return Partition::new(pts);
        }
    }
    Err(Error::Infeasible(format!(
        "no change points with length ratio <= {} after {MAX_REJECTIONS} draws",
        cfg.max_length_ratio
    )))
}

/// Draws a ground truth: random change points with bounded length ratio,
/// `U`, `V` with orthonormal columns scaled by `sqrt(n)`, a temporal factor
/// whitened so that `sum_k d_k w_k w_k^T = T I`, and a superdiagonal core.
pub fn generate_truth(cfg: &SyntheticConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (r1, r2, r3) = cfg.ranks;
    let eta = random_change_points(cfg, &mut rng)?;
    let root_n = (cfg.n as f64).sqrt();
    let u = orthonormalize(&gaussian_matrix(cfg.n, r1, &mut rng)).scale(root_n);
    let v = orthonormalize(&gaussian_matrix(cfg.n, r2, &mut rng)).scale(root_n);

    let a = gaussian_matrix(cfg.k0, r3, &mut rng);
    let widths = eta.widths();
    let weighted = Matrix::from_fn(cfg.k0, r3, |k, c| a.get(k, c) * widths[k]);
    let gram = a.transpose_mul(&weighted);
    let w = a
        .mul(&inverse_sqrt_spd(&gram, 1e-12)?)
        .scale(cfg.horizon.sqrt());

    let core = Tensor3::from_fn((r1, r2, r3), |x, y, z| {
        if x == y && y == z {
            cfg.diag_s
        } else {
            0.0
        }
    });
    Ok(GroundTruth {
        factors: TuckerFactors::new(core, u, v, w)?,
        eta,
    })
}

/// For every pair and true segment, draws a Poisson count with mean
/// `lambda0 exp(theta) width` and places the events uniformly in the segment.
pub fn sample_edges(gt: &GroundTruth, lambda0: f64, seed: u64) -> Result<EdgeSet> {
    let theta = gt.theta();
    if theta.max_abs() > EXP_CLAMP {
        return Err(Error::ClampBinding {
            value: theta.max_abs(),
            limit: EXP_CLAMP,
        });
    }
    let (n1, n2, k0) = theta.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = EdgeSet::new(n1, n2, gt.horizon())?;
    for k in 0..k0 {
        let start = gt.eta.start(k);
        let end = gt.eta.breakpoints()[k];
        let width = end - start;
        for j in 0..n2 {
            for i in 0..n1 {
                let mean = lambda0 * theta[(i, j, k)].exp() * width;
                let count = if mean > 0.0 {
                    Poisson::new(mean)
                        .map_err(|e| Error::InvalidArgument(format!("Poisson mean {mean}: {e}")))?
                        .sample(&mut rng) as usize
                } else {
                    0
                };
                for _ in 0..count {
                    let mut t = start + width * rng.random::<f64>();
                    if t >= end {
                        t = end.next_down();
                    }
                    edges.push(Edge { i, j, t })?;
                }
            }
        }
    }
    Ok(edges)
}

/// `||m_hat - m_star||_F^2 / (n1 n2 n3)`.
pub fn estimation_error(m_hat: &Tensor3, m_star: &Tensor3) -> Result<f64> {
    let d = m_hat.sub(m_star)?;
    Ok(d.frobenius_norm().powi(2) / d.len() as f64)
}

/// The true log-intensity on an arbitrary partition: slice `l` takes the
/// value of the true segment containing the interval's left endpoint.
pub fn expand_truth(gt: &GroundTruth, partition: &Partition) -> Result<Tensor3> {
    if partition.horizon() != gt.horizon() {
        return Err(Error::HorizonMismatch {
            edges: gt.horizon(),
            partition: partition.horizon(),
        });
    }
    let theta = gt.theta();
    let (n1, n2, _) = theta.dims();
    let mut out = Tensor3::zeros((n1, n2, partition.interval_count()));
    for l in 0..partition.interval_count() {
        let k = gt
            .eta
            .locate(partition.start(l))
            .expect("left endpoints lie in [0, T)");
        out.slice_mut(l).copy_from_slice(theta.slice(k));
    }
    Ok(out)
}

/// Comparison target for an estimate on a data-driven partition: the true
/// segment tensor when the segment counts agree (slice `k` against true
/// segment `k`), otherwise [`expand_truth`].
pub fn adaptive_target(gt: &GroundTruth, eta_hat: &Partition) -> Result<Tensor3> {
    if eta_hat.interval_count() == gt.eta.interval_count() {
        if eta_hat.horizon() != gt.horizon() {
            return Err(Error::HorizonMismatch {
                edges: gt.horizon(),
                partition: eta_hat.horizon(),
            });
        }
        Ok(gt.theta())
    } else {
        expand_truth(gt, eta_hat)
    }
}

/// Expected pair totals `sum_l lambda0 exp(m_ijl) d_l` over the window.
pub fn predicted_pair_counts(m: &Tensor3, partition: &Partition, lambda0: f64) -> Result<Matrix> {
    let (n1, n2, n3) = m.dims();
    if n3 != partition.interval_count() {
        return Err(Error::Shape(format!(
            "{n3} slices vs {} intervals",
            partition.interval_count()
        )));
    }
    let mut out = Matrix::zeros(n1, n2);
    for l in 0..n3 {
        let exposure = lambda0 * partition.width(l);
        for j in 0..n2 {
            for i in 0..n1 {
                out.set(i, j, out.get(i, j) + exposure * m[(i, j, l)].clamp(-EXP_CLAMP, EXP_CLAMP).exp());
            }
        }
    }
    Ok(out)
}

/// `||(truth - pred) o mask||_F / ||truth o mask||_F`.
pub fn masked_prediction_error(truth: &Matrix, pred: &Matrix, mask: &Matrix) -> Result<f64> {
    let dims = (truth.rows(), truth.cols());
    if (pred.rows(), pred.cols()) != dims || (mask.rows(), mask.cols()) != dims {
        return Err(Error::Shape("truth, prediction and mask must share dimensions".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for ((t, p), m) in truth.as_slice().iter().zip(pred.as_slice()).zip(mask.as_slice()) {
        num += (m * (t - p)).powi(2);
        den += (m * t).powi(2);
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator("held-out pairs carry no edges".into()));
    }
    Ok((num / den).sqrt())
}

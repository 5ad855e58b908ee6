//! Penalized Poisson likelihood for Tucker-factored log-intensities and the
//! projected gradient descent that maximizes it.
//!
//! For counts `Y` binned on a partition with widths `d_l`, the log-likelihood
//! of a log-intensity tensor `M` is
//!
//! ```text
//! l(M) = sum_{ijl} M_ijl * Y_ijl - lambda0 * exp(M_ijl) * d_l
//! ```
//!
//! and the fit minimizes `-l(M) + gamma * J(U, V, W)` where `J` penalizes
//! departures from `U^T U = n1 I` (and likewise for `V`, `W`).

use crate::baselines::hosvd;
use crate::error::{Error, Result};
use crate::events::Partition;
use crate::tensor::{mode_unfold, Matrix, Tensor3, TuckerFactors};

/// Log-intensities are clamped to `[-EXP_CLAMP, EXP_CLAMP]` inside `exp`.
pub const EXP_CLAMP: f64 = 30.0;

/// Additive smoothing used by [`initialize`] before taking logs.
pub const INIT_SMOOTHING: f64 = 0.5;

#[inline]
fn clamped_exp(m: f64) -> f64 {
    m.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
}

/// Radii of the constraint sets: a Frobenius ball for the core and row-norm
/// balls for the factor matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radii {
    pub core: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl Radii {
    /// `slack` times the current norms of `f`.
    pub fn around(f: &TuckerFactors, slack: f64) -> Self {
        Self {
            core: slack * f.core.frobenius_norm(),
            u: slack * f.u.two_to_inf_norm(),
            v: slack * f.v.two_to_inf_norm(),
            w: slack * f.w.two_to_inf_norm(),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, r) in [("c_S", self.core), ("c1", self.u), ("c2", self.v), ("c3", self.w)] {
            if !(r > 0.0) {
                return Err(Error::InvalidArgument(format!("radius {name} must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdConfig {
    /// Known baseline intensity.
    pub lambda0: f64,
    /// Orthogonality penalty weight; `None` uses `n1 * n2 * n3 * H * lambda0`.
    pub gamma: Option<f64>,
    /// Step-size constant `c`; the base step is `c / (n1 n2 n3 H)` with `H`
    /// the mean interval width.
    pub step_c: f64,
    pub max_iters: usize,
    /// Stop once the relative Frobenius change of the assembled tensor drops
    /// below this.
    pub tol: f64,
    /// Constraint radii; `None` derives them from the initializer.
    pub radii: Option<Radii>,
    /// Multiplier applied to initializer norms when `radii` is `None`.
    pub radius_slack: f64,
    /// Times `step_c` may be halved after rejected steps before giving up.
    pub max_halvings: usize,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            lambda0: 1.0,
            gamma: None,
            step_c: 0.1,
            max_iters: 500,
            tol: 1e-8,
            radii: None,
            radius_slack: 2.0,
            max_halvings: 10,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda0 must be positive, got {}", self.lambda0)));
        }
        if !(self.step_c > 0.0) {
            return Err(Error::InvalidArgument(format!("step_c must be positive, got {}", self.step_c)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0) {
                return Err(Error::InvalidArgument(format!("gamma must be non-negative, got {g}")));
            }
        }
        if let Some(r) = &self.radii {
            r.validate()?;
        }
        if !(self.radius_slack > 0.0) {
            return Err(Error::InvalidArgument("radius_slack must be positive".into()));
        }
        Ok(())
    }

    /// Penalty weight for a problem with the given dimensions and partition.
    pub fn gamma_for(&self, dims: (usize, usize, usize), partition: &Partition) -> f64 {
        self.gamma.unwrap_or_else(|| {
            (dims.0 * dims.1 * dims.2) as f64 * partition.mean_width() * self.lambda0
        })
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub factors: TuckerFactors,
    /// The assembled log-intensity tensor of `factors`.
    pub assembled: Tensor3,
    /// Penalized objective `-l + gamma J` of the initial iterate followed by
    /// one value per iteration.
    pub objective_trace: Vec<f64>,
    pub iters_run: usize,
    /// Step constant actually used after any divergence halvings.
    pub step_c: f64,
}

impl FitResult {
    /// Objective trace as CSV (`iteration,objective`).
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,objective\n");
        for (i, v) in self.objective_trace.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

/// Gradients of the log-likelihood with respect to each Tucker component.
#[derive(Debug, Clone)]
pub struct FactorGradients {
    pub core: Tensor3,
    pub u: Matrix,
    pub v: Matrix,
    pub w: Matrix,
}

/// Optional per-pair weights (1 = observed, 0 = held out) over `n1 x n2`.
pub type PairMask = Matrix;

fn check_problem(
    m: &Tensor3,
    counts: &Tensor3,
    partition: &Partition,
    mask: Option<&PairMask>,
) -> Result<()> {
    m.check_same(counts)?;
    let (n1, n2, n3) = counts.dims();
    if n3 != partition.interval_count() {
        return Err(Error::Shape(format!(
            "count tensor has {n3} slices, partition has {} intervals",
            partition.interval_count()
        )));
    }
    if let Some(mask) = mask {
        if (mask.rows(), mask.cols()) != (n1, n2) {
            return Err(Error::Shape(format!(
                "mask is {}x{}, expected {n1}x{n2}",
                mask.rows(),
                mask.cols()
            )));
        }
    }
    Ok(())
}

/// Log-likelihood and its entrywise gradient in one pass.
fn likelihood_and_gradient(
    m: &Tensor3,
    counts: &Tensor3,
    widths: &[f64],
    lambda0: f64,
    mask: Option<&PairMask>,
) -> (f64, Tensor3) {
    let (n1, n2, _) = m.dims();
    let mut grad = Tensor3::zeros(m.dims());
    let mut total = 0.0;
    let s = n1 * n2;
    for (l, &width) in widths.iter().enumerate() {
        let exposure = lambda0 * width;
        let ms = m.slice(l);
        let ys = counts.slice(l);
        let gs = grad.slice_mut(l);
        for p in 0..s {
            let weight = mask.map_or(1.0, |mk| mk.get(p % n1, p / n1));
            if weight == 0.0 {
                continue;
            }
            let rate = exposure * clamped_exp(ms[p]);
            total += weight * (ms[p] * ys[p] - rate);
            gs[p] = weight * (ys[p] - rate);
        }
    }
    (total, grad)
}

/// `sum_{ijl} m_ijl Y_ijl - lambda0 exp(m_ijl) (tau_l - tau_{l-1})`.
pub fn log_likelihood(m: &Tensor3, counts: &Tensor3, partition: &Partition, lambda0: f64) -> Result<f64> {
    log_likelihood_masked(m, counts, partition, lambda0, None)
}

/// Like [`log_likelihood`], but pairs with zero mask weight contribute
/// neither counts nor exposure.
pub fn log_likelihood_masked(
    m: &Tensor3,
    counts: &Tensor3,
    partition: &Partition,
    lambda0: f64,
    mask: Option<&PairMask>,
) -> Result<f64> {
    check_problem(m, counts, partition, mask)?;
    Ok(likelihood_and_gradient(m, counts, &partition.widths(), lambda0, mask).0)
}

/// Entrywise gradient `Y_ijl - lambda0 exp(m_ijl) (tau_l - tau_{l-1})`.
pub fn grad_m(m: &Tensor3, counts: &Tensor3, partition: &Partition, lambda0: f64) -> Result<Tensor3> {
    check_problem(m, counts, partition, None)?;
    Ok(likelihood_and_gradient(m, counts, &partition.widths(), lambda0, None).1)
}

/// Chain rule of an entrywise gradient `g` through the Tucker assembly.
pub fn backpropagate(f: &TuckerFactors, g: &Tensor3) -> Result<FactorGradients> {
    if g.dims() != f.dims() {
        return Err(Error::Shape(format!(
            "gradient dims {:?} vs factor dims {:?}",
            g.dims(),
            f.dims()
        )));
    }
    let s = &f.core;
    // g x_3 W^T, shared by the U and V gradients
    let gw = g.mode_product(3, &f.w.transpose())?;
    let a1 = gw.mode_product(2, &f.v.transpose())?;
    let u = mode_unfold(&a1, 1)?.mul_transpose(&mode_unfold(s, 1)?);
    let a2 = gw.mode_product(1, &f.u.transpose())?;
    let v = mode_unfold(&a2, 2)?.mul_transpose(&mode_unfold(s, 2)?);
    let a3 = g
        .mode_product(1, &f.u.transpose())?
        .mode_product(2, &f.v.transpose())?;
    let w = mode_unfold(&a3, 3)?.mul_transpose(&mode_unfold(s, 3)?);
    let core = a1.mode_product(1, &f.u.transpose())?;
    Ok(FactorGradients { core, u, v, w })
}

/// Gradients of `l(assemble(f))` with respect to core and factors.
pub fn grad_factors(
    f: &TuckerFactors,
    counts: &Tensor3,
    partition: &Partition,
    lambda0: f64,
) -> Result<FactorGradients> {
    let m = f.assemble();
    let g = grad_m(&m, counts, partition, lambda0)?;
    backpropagate(f, &g)
}

fn orthogonality_defect(x: &Matrix) -> Matrix {
    let n = x.rows() as f64;
    x.gram().scale(1.0 / n).sub(&Matrix::identity(x.cols()))
}

/// `J = 1/4 (||U^T U/n1 - I||_F^2 + ||V^T V/n2 - I||_F^2 + ||W^T W/n3 - I||_F^2)`.
pub fn regularizer(f: &TuckerFactors) -> f64 {
    [&f.u, &f.v, &f.w]
        .iter()
        .map(|x| orthogonality_defect(x).frobenius_norm().powi(2))
        .sum::<f64>()
        / 4.0
}

/// The update directions `U (U^T U / n1 - I)`, `V (...)`, `W (...)`.
///
/// The gradient of `J` with respect to `U` is this term divided by `n1`.
pub fn reg_grads(f: &TuckerFactors) -> (Matrix, Matrix, Matrix) {
    let term = |x: &Matrix| x.mul(&orthogonality_defect(x));
    (term(&f.u), term(&f.v), term(&f.w))
}

/// Norms within this relative margin of a radius count as feasible, so that
/// rounding in a rescaled row cannot trigger a second rescale.
const PROJECTION_SLACK: f64 = 1e-12;

fn project_rows(m: &Matrix, radius: f64) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > radius * (1.0 + PROJECTION_SLACK) {
            let s = radius / norm;
            row.iter_mut().for_each(|x| *x *= s);
        }
    }
    out
}

/// Euclidean projection onto the constraint sets: the core is scaled into a
/// Frobenius ball and each factor row into a Euclidean ball.
pub fn project(f: &TuckerFactors, radii: &Radii) -> TuckerFactors {
    let norm = f.core.frobenius_norm();
    let core = if norm > radii.core * (1.0 + PROJECTION_SLACK) {
        let s = radii.core / norm;
        f.core.map(|x| x * s)
    } else {
        f.core.clone()
    };
    TuckerFactors {
        core,
        u: project_rows(&f.u, radii.u),
        v: project_rows(&f.v, radii.v),
        w: project_rows(&f.w, radii.w),
    }
}

struct Problem<'a> {
    counts: &'a Tensor3,
    widths: Vec<f64>,
    lambda0: f64,
    gamma: f64,
    mask: Option<&'a PairMask>,
}

impl Problem<'_> {
    fn evaluate(&self, f: &TuckerFactors, m: &Tensor3) -> (f64, Tensor3) {
        let (l, g) = likelihood_and_gradient(m, self.counts, &self.widths, self.lambda0, self.mask);
        (-l + self.gamma * regularizer(f), g)
    }
}

/// Projected gradient descent with per-block step sizes `n1 z`, `n2 z`,
/// `n3 z` (factors) and `z` (core), `z = c / (n1 n2 n3 H)`. All four blocks
/// are updated from the same iterate.
///
/// `init` should lie in the constraint sets with `U^T U = n1 I` etc. A step
/// that raises the penalized objective is rejected and `c` halved, at most
/// `cfg.max_halvings` times over the whole run.
pub fn pgd_fit(
    counts: &Tensor3,
    partition: &Partition,
    init: &TuckerFactors,
    cfg: &PgdConfig,
) -> Result<FitResult> {
    pgd_fit_masked(counts, partition, None, init, cfg)
}

/// [`pgd_fit`] with held-out node pairs excluded from the likelihood.
pub fn pgd_fit_masked(
    counts: &Tensor3,
    partition: &Partition,
    mask: Option<&PairMask>,
    init: &TuckerFactors,
    cfg: &PgdConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    init.validate()?;
    let dims = counts.dims();
    if init.dims() != dims {
        return Err(Error::Shape(format!(
            "initializer dims {:?} vs counts {:?}",
            init.dims(),
            dims
        )));
    }
    check_problem(counts, counts, partition, mask)?;
    let radii = cfg.radii.unwrap_or_else(|| Radii::around(init, cfg.radius_slack));
    let problem = Problem {
        counts,
        widths: partition.widths(),
        lambda0: cfg.lambda0,
        gamma: cfg.gamma_for(dims, partition),
        mask,
    };
    let scale = (dims.0 * dims.1 * dims.2) as f64 * partition.mean_width();

    let fit = run_pgd(&problem, init, &radii, scale, cfg)?;
    let peak = fit.assembled.max_abs();
    if peak > EXP_CLAMP {
        return Err(Error::ClampBinding {
            value: peak,
            limit: EXP_CLAMP,
        });
    }
    Ok(fit)
}

/// Relative slack allowed on the objective before a step counts as an
/// increase; absorbs rounding near convergence.
const ASCENT_SLACK: f64 = 1e-10;

fn run_pgd(
    problem: &Problem<'_>,
    init: &TuckerFactors,
    radii: &Radii,
    scale: f64,
    cfg: &PgdConfig,
) -> Result<FitResult> {
    let (n1, n2, n3) = init.dims();
    let mut f = init.clone();
    let mut m = f.assemble();
    let (mut objective, mut g) = problem.evaluate(&f, &m);
    if !objective.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut step_c = cfg.step_c;
    let mut halvings = 0;
    let mut trace = vec![objective];
    let mut iters = 0;
    for iteration in 1..=cfg.max_iters {
        let grads = backpropagate(&f, &g)?;
        let (ru, rv, rw) = reg_grads(&f);
        let gamma = problem.gamma;
        // A step that increases the objective or leaves the clamp range is
        // rejected and retried from the same iterate with half the step.
        let (next, next_m, next_objective, next_g) = loop {
            let zeta = step_c / scale;
            let step = |x: &Matrix, gl: &Matrix, reg: &Matrix, n: usize| {
                x.add(&gl.scale(zeta * n as f64).sub(&reg.scale(zeta * gamma)))
            };
            let candidate = TuckerFactors {
                u: step(&f.u, &grads.u, &ru, n1),
                v: step(&f.v, &grads.v, &rv, n2),
                w: step(&f.w, &grads.w, &rw, n3),
                core: Tensor3::new(
                    f.core.dims(),
                    f.core
                        .as_slice()
                        .iter()
                        .zip(grads.core.as_slice())
                        .map(|(s, gs)| s + zeta * gs)
                        .collect(),
                )?,
            };
            let candidate = project(&candidate, radii);
            let candidate_m = candidate.assemble();
            if candidate_m.max_abs() <= EXP_CLAMP {
                let (value, grad) = problem.evaluate(&candidate, &candidate_m);
                if value.is_finite() && value <= objective + ASCENT_SLACK * objective.abs().max(1.0) {
                    break (candidate, candidate_m, value, grad);
                }
            }
            if halvings >= cfg.max_halvings {
                return Err(Error::Divergence { iteration });
            }
            halvings += 1;
            step_c /= 2.0;
        };
        let change = next_m.sub(&m)?.frobenius_norm();
        let base = m.frobenius_norm();
        f = next;
        m = next_m;
        objective = next_objective;
        g = next_g;
        trace.push(objective);
        iters = iteration;
        let relative = if base > 0.0 {
            change / base
        } else if change == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if relative < cfg.tol {
            break;
        }
    }
    Ok(FitResult {
        factors: f,
        assembled: m,
        objective_trace: trace,
        iters_run: iters,
        step_c,
    })
}

/// HOSVD directions of `z` minus its grand mean, with the core taken from
/// the uncentered `z`. In sparse data the zero-count cells all map to the
/// same floor value, which pulls a leading plain-HOSVD direction onto the
/// constant vector. Falls back to the plain HOSVD when `z` is constant.
fn centered_hosvd(z: &Tensor3, ranks: (usize, usize, usize)) -> Result<TuckerFactors> {
    let mean = z.sum() / z.len() as f64;
    let centered = z.map(|x| x - mean);
    if centered.frobenius_norm() <= 1e-12 * z.frobenius_norm().max(1.0) {
        return hosvd(z, ranks);
    }
    let h = hosvd(&centered, ranks)?;
    let core = z
        .mode_product(1, &h.u.transpose())?
        .mode_product(2, &h.v.transpose())?
        .mode_product(3, &h.w.transpose())?;
    TuckerFactors::new(core, h.u, h.v, h.w)
}

/// Spectral initializer from the smoothed log-rate
/// `Z = log((Y + 0.5) / (lambda0 d_l))`. Two starts are built, the plain
/// HOSVD of `Z` and [`centered_hosvd`], each rescaled so that
/// `U^T U = n1 I`, `V^T V = n2 I`, `W^T W = n3 I` with the scale absorbed
/// into the core and projected onto `cfg.radii` when given. The one with the
/// higher log-likelihood is returned.
pub fn initialize(
    counts: &Tensor3,
    partition: &Partition,
    ranks: (usize, usize, usize),
    cfg: &PgdConfig,
) -> Result<TuckerFactors> {
    initialize_masked(counts, partition, None, ranks, cfg)
}

/// [`initialize`] where held-out pairs take the mean of the observed
/// transformed values in the same slice.
pub fn initialize_masked(
    counts: &Tensor3,
    partition: &Partition,
    mask: Option<&PairMask>,
    ranks: (usize, usize, usize),
    cfg: &PgdConfig,
) -> Result<TuckerFactors> {
    cfg.validate()?;
    check_problem(counts, counts, partition, mask)?;
    let (n1, n2, n3) = counts.dims();
    if ranks.0 > n1 || ranks.1 > n2 || ranks.2 > n3 || ranks.0 == 0 || ranks.1 == 0 || ranks.2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "ranks {ranks:?} must be positive and at most dims {:?}",
            counts.dims()
        )));
    }
    let widths = partition.widths();
    let mut z = Tensor3::zeros(counts.dims());
    for (l, &width) in widths.iter().enumerate() {
        let exposure = cfg.lambda0 * width;
        let ys = counts.slice(l);
        let zs = z.slice_mut(l);
        for (zv, y) in zs.iter_mut().zip(ys) {
            *zv = ((y + INIT_SMOOTHING) / exposure).ln();
        }
        if let Some(mask) = mask {
            let (mut sum, mut cnt) = (0.0, 0usize);
            for (p, zv) in zs.iter().enumerate() {
                if mask.get(p % n1, p / n1) != 0.0 {
                    sum += zv;
                    cnt += 1;
                }
            }
            let fill = if cnt > 0 { sum / cnt as f64 } else { (INIT_SMOOTHING / exposure).ln() };
            for (p, zv) in zs.iter_mut().enumerate() {
                if mask.get(p % n1, p / n1) == 0.0 {
                    *zv = fill;
                }
            }
        }
    }
    let s = ((n1 * n2 * n3) as f64).sqrt();
    let rescale = |h: TuckerFactors| -> Result<TuckerFactors> {
        let f = TuckerFactors::new(
            h.core.map(|x| x / s),
            h.u.scale((n1 as f64).sqrt()),
            h.v.scale((n2 as f64).sqrt()),
            h.w.scale((n3 as f64).sqrt()),
        )?;
        Ok(match &cfg.radii {
            Some(r) => project(&f, r),
            None => f,
        })
    };
    let plain = rescale(hosvd(&z, ranks)?)?;
    let centered = rescale(centered_hosvd(&z, ranks)?)?;
    // keep the start with the higher likelihood; ties go to the plain HOSVD
    let widths = partition.widths();
    let score = |f: &TuckerFactors| {
        let m = f.assemble();
        if m.max_abs() > EXP_CLAMP {
            f64::NEG_INFINITY
        } else {
            likelihood_and_gradient(&m, counts, &widths, cfg.lambda0, mask).0
        }
    };
    Ok(if score(&centered) > score(&plain) { centered } else { plain })
}

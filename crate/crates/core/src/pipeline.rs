//! End-to-end estimation: bin on an equal partition, fit, merge intervals
//! by change-point search, refit on the merged partition.

use crate::error::{Error, Result};
use crate::estimator::{initialize_masked, pgd_fit_masked, FitResult, PairMask, PgdConfig};
use crate::events::{bin_edges, equal_partition, EdgeSet, Partition};
use crate::merging::{
    default_k_max, default_nu, merged_partition, normalize_w, select_and_partition, strong_regime,
    MergeConfig, OrderedPartitionResult,
};
use crate::synthetic::{adaptive_target, estimation_error, expand_truth, GroundTruth};
use crate::tensor::Matrix;

/// Whether the merge-and-refit stage runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeMode {
    /// Skip merging in the regime where it cannot help (see [`merge_gate`]).
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub ranks: (usize, usize, usize),
    /// Initial interval count; `None` uses [`auto_l`] capped at the edge count.
    pub intervals: Option<usize>,
    pub epsilon: f64,
    pub pgd: PgdConfig,
    /// Merge penalty; `None` uses [`default_nu`].
    pub nu: Option<f64>,
    /// Largest candidate segment count; `None` uses [`default_k_max`].
    pub k_max: Option<usize>,
    pub merge: MergeMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ranks: (3, 3, 3),
            intervals: None,
            epsilon: 0.1,
            pgd: PgdConfig::default(),
            nu: None,
            k_max: None,
            merge: MergeMode::Auto,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let (r1, r2, r3) = self.ranks;
        if r1 == 0 || r2 == 0 || r3 == 0 {
            return Err(Error::InvalidArgument(format!("ranks {:?} must be positive", self.ranks)));
        }
        if self.intervals == Some(0) {
            return Err(Error::InvalidArgument("interval count must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        self.pgd.validate()
    }
}

/// Default interval count `n sqrt(T) / log^b(nT)` with `b = 3/2 + eps` when
/// `T >= n^2 / log(nT)` and `b = 1/2 + eps` otherwise, rounded, at least 2.
pub fn auto_l(n: usize, horizon: f64, epsilon: f64) -> usize {
    let nf = n as f64;
    let log_nt = (nf * horizon).ln();
    let b = if strong_regime(nf, horizon) {
        1.5 + epsilon
    } else {
        0.5 + epsilon
    };
    let l = nf * horizon.sqrt() / log_nt.powf(b);
    (l.round() as usize).max(2)
}

/// Interval count `max(1, round(T / log^{1+eps}(nT)))` used by the fixed
/// equal-spacing comparison.
pub fn structural_l(n: usize, horizon: f64, epsilon: f64) -> usize {
    let log_nt = (n as f64 * horizon).ln();
    ((horizon / log_nt.powf(1.0 + epsilon)).round() as usize).max(1)
}

/// True when `T <= n^{2/3} log^{1 + 2 eps / 3}(nT)`: the initial estimate is
/// returned without merging.
pub fn merge_gate(n: usize, horizon: f64, epsilon: f64) -> bool {
    let nf = n as f64;
    horizon <= nf.powf(2.0 / 3.0) * (nf * horizon).ln().powf(1.0 + 2.0 * epsilon / 3.0)
}

fn clamp_ranks(ranks: (usize, usize, usize), dims: (usize, usize, usize)) -> (usize, usize, usize) {
    (ranks.0.min(dims.0), ranks.1.min(dims.1), ranks.2.min(dims.2))
}

/// Fit on a given partition from the spectral initializer, with held-out
/// pairs (mask 0) excluded when a mask is given. Ranks are clamped to the
/// tensor dimensions.
pub fn fit_on_partition(
    edges: &EdgeSet,
    partition: &Partition,
    mask: Option<&PairMask>,
    ranks: (usize, usize, usize),
    pgd: &PgdConfig,
) -> Result<FitResult> {
    let counts = bin_edges(edges, partition)?;
    let ranks = clamp_ranks(ranks, counts.dims());
    let init = initialize_masked(&counts, partition, mask, ranks, pgd)?;
    pgd_fit_masked(&counts, partition, mask, &init, pgd)
}

#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub segmentation: OrderedPartitionResult,
    pub eta_hat: Partition,
    pub fit: FitResult,
}

impl MergeOutcome {
    pub fn k_hat(&self) -> usize {
        self.eta_hat.interval_count()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub delta: Partition,
    pub initial: FitResult,
    /// Whether the regime gate suppressed merging.
    pub gated: bool,
    pub merged: Option<MergeOutcome>,
    pub merge_config: Option<MergeConfig>,
}

impl PipelineReport {
    /// Partition of the returned estimate.
    pub fn final_partition(&self) -> &Partition {
        self.merged.as_ref().map_or(&self.delta, |m| &m.eta_hat)
    }

    pub fn final_fit(&self) -> &FitResult {
        self.merged.as_ref().map_or(&self.initial, |m| &m.fit)
    }

    /// Error of the returned estimate: against [`adaptive_target`] after
    /// merging, otherwise against the truth expanded onto the equal partition.
    pub fn final_error(&self, truth: &GroundTruth) -> Result<f64> {
        match &self.merged {
            Some(m) => estimation_error(&m.fit.assembled, &adaptive_target(truth, &m.eta_hat)?),
            None => self.initial_error(truth),
        }
    }

    pub fn initial_error(&self, truth: &GroundTruth) -> Result<f64> {
        let star = expand_truth(truth, &self.delta)?;
        estimation_error(&self.initial.assembled, &star)
    }
}

/// Interval count the pipeline uses for these edges.
pub fn resolve_l(edges: &EdgeSet, cfg: &PipelineConfig) -> usize {
    cfg.intervals.unwrap_or_else(|| {
        let n = edges.n1().max(edges.n2());
        auto_l(n, edges.horizon(), cfg.epsilon).min(edges.len().max(2))
    })
}

/// Merge settings for `l` equal intervals, filling unset fields with defaults.
pub fn merge_config_for(n: usize, horizon: f64, l: usize, cfg: &PipelineConfig) -> MergeConfig {
    MergeConfig {
        nu: cfg.nu.unwrap_or_else(|| default_nu(n, horizon, cfg.epsilon)),
        k_max: cfg.k_max.unwrap_or_else(|| default_k_max(l)).min(l),
        epsilon: cfg.epsilon,
        condition_tol: 1e-12,
    }
}

/// Segments the rows of the temporal factor `w_hat` fitted on `delta` and
/// returns the segmentation with its merged partition.
pub fn merge_intervals(
    w_hat: &Matrix,
    delta: &Partition,
    cfg: &MergeConfig,
) -> Result<(OrderedPartitionResult, Partition)> {
    if w_hat.rows() != delta.interval_count() {
        return Err(Error::Shape(format!(
            "temporal factor has {} rows, partition has {} intervals",
            w_hat.rows(),
            delta.interval_count()
        ))
        .at("normalization"));
    }
    let rows = normalize_w(w_hat, cfg.condition_tol).map_err(|e| e.at("normalization"))?;
    let segmentation = select_and_partition(&rows, cfg)
        .map_err(|e| e.at("segmentation"))?
        .with_endpoints(delta.mean_width(), delta.horizon());
    let eta_hat = merged_partition(&segmentation.segments, delta).map_err(|e| e.at("segmentation"))?;
    Ok((segmentation, eta_hat))
}

pub fn run_pipeline(edges: &EdgeSet, cfg: &PipelineConfig) -> Result<PipelineReport> {
    run_pipeline_masked(edges, cfg, None)
}

/// [`run_pipeline`] with held-out pairs excluded from every fit.
pub fn run_pipeline_masked(
    edges: &EdgeSet,
    cfg: &PipelineConfig,
    mask: Option<&PairMask>,
) -> Result<PipelineReport> {
    cfg.validate().map_err(|e| e.at("config"))?;
    if let Some(m) = mask {
        if m.as_slice().iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidArgument("mask holds out every pair".into()).at("config"));
        }
    }
    let horizon = edges.horizon();
    let n = edges.n1().max(edges.n2());
    let l = resolve_l(edges, cfg);
    let delta = equal_partition(horizon, l).map_err(|e| e.at("partition"))?;
    let initial = fit_on_partition(edges, &delta, mask, cfg.ranks, &cfg.pgd).map_err(|e| e.at("initial estimate"))?;

    let gated = match cfg.merge {
        MergeMode::Auto => merge_gate(n, horizon, cfg.epsilon),
        MergeMode::Always => false,
        MergeMode::Never => true,
    };
    if gated || l == 1 {
        return Ok(PipelineReport {
            delta,
            initial,
            gated,
            merged: None,
            merge_config: None,
        });
    }

    let merge_cfg = merge_config_for(n, horizon, l, cfg);
    let (segmentation, eta_hat) = merge_intervals(&initial.factors.w, &delta, &merge_cfg)?;
    let fit = fit_on_partition(edges, &eta_hat, mask, cfg.ranks, &cfg.pgd).map_err(|e| e.at("refit"))?;
    Ok(PipelineReport {
        delta,
        initial,
        gated,
        merged: Some(MergeOutcome {
            segmentation,
            eta_hat,
            fit,
        }),
        merge_config: Some(merge_cfg),
    })
}

//! Replicated synthetic experiments: interval-count sweeps, method
//! comparisons, and pair-level cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{hooi, hosvd, HOOI_DEFAULT_ITERS, HOOI_DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::estimator::{INIT_SMOOTHING, PairMask};
use crate::events::{bin_edges, equal_partition, EdgeSet, Partition};
use crate::pipeline::{fit_on_partition, run_pipeline, run_pipeline_masked, structural_l, PipelineConfig};
use crate::synthetic::{
    adaptive_target, estimation_error, expand_truth, generate_truth, masked_prediction_error, predicted_pair_counts,
    sample_edges, GroundTruth, SyntheticConfig,
};
use crate::tensor::{Matrix, Tensor3};

/// Runs `f` for every replication index, concurrently when the `parallel`
/// feature is on. Results keep replication order.
pub fn map_replications<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Truth seed and sampling seed of replication `rep`.
pub fn replication_seeds(base: u64, rep: usize) -> (u64, u64) {
    let truth = base.wrapping_add(rep as u64);
    let sample = truth.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    (truth, sample)
}

/// One synthetic data set.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub truth: GroundTruth,
    pub edges: EdgeSet,
}

pub fn replicate(cfg: &SyntheticConfig, rep: usize) -> Result<Replicate> {
    let (truth_seed, sample_seed) = replication_seeds(cfg.seed, rep);
    let truth = generate_truth(&SyntheticConfig { seed: truth_seed, ..cfg.clone() })?;
    let edges = sample_edges(&truth, cfg.lambda0, sample_seed)?;
    Ok(Replicate { truth, edges })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Errors of one estimate on the log-intensity and rate scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodError {
    /// Mean squared error of the log-intensity.
    pub log: f64,
    /// Mean squared error of the rate `lambda0 exp(m)`.
    pub rate: f64,
}

/// Mean squared error on the rate scale `lambda0 * exp(m)`.
pub fn rate_error(m_hat: &Tensor3, m_star: &Tensor3, lambda0: f64) -> Result<f64> {
    estimation_error(&m_hat.map(|x| lambda0 * x.exp()), &m_star.map(|x| lambda0 * x.exp()))
}

/// Errors of a log-intensity estimate on `partition`.
pub fn log_estimate_error(
    truth: &GroundTruth,
    m_hat: &Tensor3,
    partition: &Partition,
    lambda0: f64,
) -> Result<MethodError> {
    let star = expand_truth(truth, partition)?;
    Ok(MethodError {
        log: estimation_error(m_hat, &star)?,
        rate: rate_error(m_hat, &star, lambda0)?,
    })
}

/// Errors of an estimate of the mean counts on `partition`. Counts are
/// divided by `lambda0 * width` to get the rate; the log scale floors the
/// rate at the initializer smoothing `0.5 / (lambda0 * width)`.
pub fn count_estimate_error(
    truth: &GroundTruth,
    y_hat: &Tensor3,
    partition: &Partition,
    lambda0: f64,
) -> Result<MethodError> {
    let star = expand_truth(truth, partition)?;
    let mut log_hat = y_hat.clone();
    let mut rate_hat = y_hat.clone();
    for l in 0..partition.interval_count() {
        let exposure = lambda0 * partition.width(l);
        for (lg, rt) in log_hat.slice_mut(l).iter_mut().zip(rate_hat.slice_mut(l)) {
            *lg = (lg.max(INIT_SMOOTHING) / exposure).ln();
            *rt *= lambda0 / exposure;
        }
    }
    Ok(MethodError {
        log: estimation_error(&log_hat, &star)?,
        rate: estimation_error(&rate_hat, &star.map(|x| lambda0 * x.exp()))?,
    })
}

fn clamp_ranks(ranks: (usize, usize, usize), dims: (usize, usize, usize)) -> (usize, usize, usize) {
    (ranks.0.min(dims.0), ranks.1.min(dims.1), ranks.2.min(dims.2))
}

/// Error of the fixed equal-spacing estimator with `l` intervals.
pub fn equal_spacing_error(rep: &Replicate, cfg: &PipelineConfig, l: usize) -> Result<MethodError> {
    let p = equal_partition(rep.edges.horizon(), l)?;
    let fit = fit_on_partition(&rep.edges, &p, None, cfg.ranks, &cfg.pgd)?;
    log_estimate_error(&rep.truth, &fit.assembled, &p, cfg.pgd.lambda0)
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub error: MethodError,
    /// Error of the initial estimate on the equal partition.
    pub initial_error: MethodError,
    pub initial_l: usize,
    pub k_hat: Option<usize>,
    /// `max_k |eta_hat_k - eta_k| / T` when the segment counts agree.
    pub endpoint_error: Option<f64>,
}

/// Runs the full pipeline on a replicate and scores both estimates.
pub fn adaptive_run(rep: &Replicate, cfg: &PipelineConfig) -> Result<AdaptiveRun> {
    let report = run_pipeline(&rep.edges, cfg)?;
    let lambda0 = cfg.pgd.lambda0;
    let initial_error = log_estimate_error(&rep.truth, &report.initial.assembled, &report.delta, lambda0)?;
    let error = match &report.merged {
        Some(m) => {
            let star = adaptive_target(&rep.truth, &m.eta_hat)?;
            MethodError {
                log: estimation_error(&m.fit.assembled, &star)?,
                rate: rate_error(&m.fit.assembled, &star, lambda0)?,
            }
        }
        None => initial_error,
    };
    let k_hat = report.merged.as_ref().map(|m| m.k_hat());
    let endpoint_error = report.merged.as_ref().and_then(|m| {
        let est = m.eta_hat.breakpoints();
        let tru = rep.truth.eta.breakpoints();
        (est.len() == tru.len()).then(|| {
            est.iter()
                .zip(tru)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / rep.truth.horizon()
        })
    });
    Ok(AdaptiveRun {
        error,
        initial_error,
        initial_l: report.delta.interval_count(),
        k_hat,
        endpoint_error,
    })
}

/// Per-L replicated errors of the equal-spacing estimator plus the adaptive
/// estimator as a reference.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub l_values: Vec<usize>,
    /// `errors[rep][i]` is the log-scale error at `l_values[i]`.
    pub errors: Vec<Vec<f64>>,
    pub adaptive: Vec<f64>,
}

impl SweepResult {
    pub fn summary(&self, i: usize) -> Summary {
        Summary::of(&self.errors.iter().map(|e| e[i]).collect::<Vec<_>>())
    }

    /// Index of the grid minimum of the mean curve.
    pub fn argmin_of_mean(&self) -> usize {
        argmin(&(0..self.l_values.len()).map(|i| self.summary(i).mean).collect::<Vec<_>>())
    }

    /// `method,L,mean_error,std_error`; the adaptive reference row has an
    /// empty `L`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,L,mean_error,std_error\n");
        for (i, l) in self.l_values.iter().enumerate() {
            let s = self.summary(i);
            out.push_str(&format!("ES,{l},{},{}\n", s.mean, s.std));
        }
        let s = Summary::of(&self.adaptive);
        out.push_str(&format!("AM,,{},{}\n", s.mean, s.std));
        out
    }
}

/// First index of the smallest value.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

pub fn sweep_l(
    syn: &SyntheticConfig,
    cfg: &PipelineConfig,
    l_values: &[usize],
    replications: usize,
) -> Result<SweepResult> {
    if l_values.is_empty() || l_values.contains(&0) {
        return Err(Error::InvalidArgument("sweep needs positive interval counts".into()));
    }
    let rows = map_replications(replications, |r| {
        let rep = replicate(syn, r)?;
        let es = l_values
            .iter()
            .map(|&l| equal_spacing_error(&rep, cfg, l).map(|e| e.log))
            .collect::<Result<Vec<_>>>()?;
        let am = adaptive_run(&rep, cfg)?.error.log;
        Ok((es, am))
    })?;
    let (errors, adaptive) = rows.into_iter().unzip();
    Ok(SweepResult {
        l_values: l_values.to_vec(),
        errors,
        adaptive,
    })
}

pub const METHODS: [&str; 5] = ["AM", "ES(L_opt)", "ES(L_str)", "HOOI", "HOSVD"];

/// Errors of every method on one replicate, in [`METHODS`] order.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub errors: [MethodError; 5],
    pub k_hat: Option<usize>,
    pub l_opt: usize,
    pub l_str: usize,
}

#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn log_errors(&self, method: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors[method].log).collect()
    }

    pub fn rate_errors(&self, method: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors[method].rate).collect()
    }

    /// One line per method with `mean (std)` on both scales, and the
    /// selected segment counts.
    pub fn render(&self) -> String {
        let mut out = format!("{:<10} {:>24} {:>24}\n", "method", "log-scale", "rate-scale");
        for (m, name) in METHODS.iter().enumerate() {
            let lg = Summary::of(&self.log_errors(m));
            let rt = Summary::of(&self.rate_errors(m));
            out.push_str(&format!(
                "{name:<10} {:>24} {:>24}\n",
                format!("{:.4e} ({:.1e})", lg.mean, lg.std),
                format!("{:.4e} ({:.1e})", rt.mean, rt.std)
            ));
        }
        let ks: Vec<f64> = self.rows.iter().filter_map(|r| r.k_hat.map(|k| k as f64)).collect();
        if !ks.is_empty() {
            let s = Summary::of(&ks);
            out.push_str(&format!("K_hat      {:.2} ({:.2})\n", s.mean, s.std));
        }
        out
    }

    /// `method,mean_log,std_log,mean_rate,std_rate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,mean_log,std_log,mean_rate,std_rate\n");
        for (m, name) in METHODS.iter().enumerate() {
            let lg = Summary::of(&self.log_errors(m));
            let rt = Summary::of(&self.rate_errors(m));
            out.push_str(&format!("{name},{},{},{},{}\n", lg.mean, lg.std, rt.mean, rt.std));
        }
        out
    }
}

/// Compares all methods on shared replicates. `ES(L_opt)` is the initial
/// estimate of the pipeline (interval count from [`crate::pipeline::auto_l`]
/// unless overridden); `ES(L_str)` and the spectral baselines use
/// [`structural_l`] intervals, the baselines on the raw counts.
pub fn compare_methods(syn: &SyntheticConfig, cfg: &PipelineConfig, replications: usize) -> Result<ComparisonTable> {
    let rows = map_replications(replications, |r| {
        let rep = replicate(syn, r)?;
        let lambda0 = cfg.pgd.lambda0;
        let am = adaptive_run(&rep, cfg)?;
        let n = rep.edges.n1().max(rep.edges.n2());
        let l_str = structural_l(n, rep.edges.horizon(), cfg.epsilon);
        let es_str = equal_spacing_error(&rep, cfg, l_str)?;

        let p = equal_partition(rep.edges.horizon(), l_str)?;
        let y = bin_edges(&rep.edges, &p)?;
        let ranks = clamp_ranks(cfg.ranks, y.dims());
        let hooi_fit = hooi(&y, ranks, HOOI_DEFAULT_ITERS, HOOI_DEFAULT_TOL)?;
        let hooi_err = count_estimate_error(&rep.truth, &hooi_fit.factors.assemble(), &p, lambda0)?;
        let hosvd_err = count_estimate_error(&rep.truth, &hosvd(&y, ranks)?.assemble(), &p, lambda0)?;
        Ok(ComparisonRow {
            errors: [am.error, am.initial_error, es_str, hooi_err, hosvd_err],
            k_hat: am.k_hat,
            l_opt: am.initial_l,
            l_str,
        })
    })?;
    Ok(ComparisonTable { rows })
}

/// Assigns every ordered node pair to one of `folds` folds, balanced and
/// deterministic in `seed`. Returned as an `n1 x n2` matrix of fold ids.
pub fn assign_folds(n1: usize, n2: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > n1 * n2 {
        return Err(Error::InvalidArgument(format!(
            "fold count {folds} must lie in 2..={}",
            n1 * n2
        )));
    }
    let mut order: Vec<usize> = (0..n1 * n2).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n1 * n2];
    for (pos, &cell) in order.iter().enumerate() {
        fold_of[cell] = pos % folds;
    }
    Ok(fold_of)
}

/// Per-fold held-out prediction errors of the adaptive and the initial
/// equal-spacing estimates.
#[derive(Debug, Clone)]
pub struct CrossvalResult {
    pub adaptive: Vec<f64>,
    pub equal_spacing: Vec<f64>,
}

impl CrossvalResult {
    /// `fold,AM,ES` rows followed by a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,AM,ES\n");
        for (f, (a, e)) in self.adaptive.iter().zip(&self.equal_spacing).enumerate() {
            out.push_str(&format!("{},{a},{e}\n", f + 1));
        }
        out.push_str(&format!(
            "mean,{},{}\n",
            Summary::of(&self.adaptive).mean,
            Summary::of(&self.equal_spacing).mean
        ));
        out
    }
}

/// `folds`-fold cross-validation over node pairs: each fold is held out of
/// the likelihood in turn and its pair totals are predicted from the fit.
pub fn crossval(edges: &EdgeSet, cfg: &PipelineConfig, folds: usize, seed: u64) -> Result<CrossvalResult> {
    let (n1, n2) = (edges.n1(), edges.n2());
    let fold_of = assign_folds(n1, n2, folds, seed)?;
    let totals = edges.pair_totals();
    let lambda0 = cfg.pgd.lambda0;
    let per_fold = map_replications(folds, |f| {
        let train: PairMask = Matrix::from_fn(n1, n2, |i, j| if fold_of[i + n1 * j] == f { 0.0 } else { 1.0 });
        let test = train.map(|x| 1.0 - x);
        let report = run_pipeline_masked(edges, cfg, Some(&train)).map_err(|e| e.at("crossval fold"))?;
        let am_pred = predicted_pair_counts(&report.final_fit().assembled, report.final_partition(), lambda0)?;
        let es_pred = predicted_pair_counts(&report.initial.assembled, &report.delta, lambda0)?;
        Ok((
            masked_prediction_error(&totals, &am_pred, &test)?,
            masked_prediction_error(&totals, &es_pred, &test)?,
        ))
    })?;
    let (adaptive, equal_spacing) = per_fold.into_iter().unzip();
    Ok(CrossvalResult {
        adaptive,
        equal_spacing,
    })
}

//! Acceptance suite: one line per criterion, tolerances pinned below.
//!
//! Runs without the libtest harness so the report prints in order. The
//! process fails when any check fails, except checks listed in [`WAIVED`],
//! which still print `FAIL` and are analysed in the project's decision log.

mod common;

use std::time::Instant;

use common::*;
use longnet::baselines::{hooi, hosvd, HOOI_DEFAULT_ITERS, HOOI_DEFAULT_TOL};
use longnet::estimator::{initialize, pgd_fit, PgdConfig};
use longnet::events::{bin_edges, equal_partition};
use longnet::experiment::{
    adaptive_run, compare_methods, equal_spacing_error, map_replications, replicate, ComparisonTable, Summary,
};
use longnet::merging::{best_ordered_partition, normalize_w};
use longnet::pipeline::{MergeMode, PipelineConfig};
use longnet::synthetic::{generate_truth, sample_edges, SyntheticConfig};
use longnet::{Matrix, Tensor3, TuckerFactors};
use rand::Rng;

const GRADIENT_REL_TOL: f64 = 1e-6;
const GRADIENT_SECONDS: f64 = 10.0;
const DP_REL_TOL: f64 = 1e-12;
const DP_SECONDS: f64 = 30.0;
const NORMALIZE_TOL: f64 = 1e-10;
const MLE_TOL: f64 = 1e-4;
const K3_RATE: f64 = 0.9;
const K5_RATE: f64 = 0.8;
const AM_ERROR_MAX: f64 = 0.01;
const SWEEP_INTERIOR_RATE: f64 = 0.8;
const ENDPOINT_TOL: f64 = 0.1;
const ENDPOINT_RATE: f64 = 0.9;
const MOMENT_SE: f64 = 4.0;
const EXACT_TOL: f64 = 1e-10;

const SEEDS: usize = 20;
const N: usize = 50;
/// Interval grid for the bias-variance sweep.
const SWEEP_GRID: [usize; 7] = [5, 10, 20, 40, 80, 160, 320];
const SWEEP_REPLICATIONS: usize = 10;
/// Data sets averaged into each sweep replication's mean curve.
const SWEEP_DATASETS: usize = 3;

/// Checks allowed to fail without failing the process.
const WAIVED: &[&str] = &["7b"];

struct Report {
    failed: Vec<String>,
    waived: Vec<String>,
}

impl Report {
    /// Prints the criterion line; `checks` are `(id, passed)` sub-checks.
    fn line(&mut self, id: &str, title: &str, checks: &[(&str, bool)], detail: String, start: Instant) {
        let pass = checks.iter().all(|c| c.1);
        let parts = if checks.len() > 1 {
            let status: Vec<String> = checks
                .iter()
                .map(|(check, ok)| match (ok, WAIVED.contains(check)) {
                    (true, _) => format!("{check} pass"),
                    (false, true) => format!("{check} FAIL, waived"),
                    (false, false) => format!("{check} FAIL"),
                })
                .collect();
            format!(" [{}]", status.join("; "))
        } else {
            String::new()
        };
        println!(
            "[{}] {id}. {title}{parts}: {detail} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for (check, ok) in checks {
            if !ok {
                if WAIVED.contains(check) {
                    self.waived.push(check.to_string());
                } else {
                    self.failed.push(check.to_string());
                }
            }
        }
    }
}

fn pipeline(merge: MergeMode) -> PipelineConfig {
    PipelineConfig {
        merge,
        ..PipelineConfig::default()
    }
}

fn synthetic(horizon: f64, k0: usize, seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n: N,
        horizon,
        k0,
        seed,
        ..SyntheticConfig::default()
    }
}

fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

fn gradients(r: &mut Report) {
    let start = Instant::now();
    let worst = (0..20u64)
        .map(|s| gradient_check(1000 + s, (5, 5, 4), (2, 2, 2)))
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    r.line(
        "1",
        "gradient correctness",
        &[("1", worst < GRADIENT_REL_TOL && secs < GRADIENT_SECONDS)],
        format!("max rel err {worst:.2e} < {GRADIENT_REL_TOL:e} on 20 instances, {secs:.2} s < {GRADIENT_SECONDS} s"),
        start,
    );
}

fn dp_optimality(r: &mut Report) {
    let start = Instant::now();
    let mut rng = rng(2000);
    let (mut worst, mut split_mismatch) = (0.0f64, 0usize);
    for _ in 0..100 {
        let l = rng.random_range(1..=12);
        let k = rng.random_range(1..=4usize.min(l));
        let rows = uniform_matrix(&mut rng, l, 3, 1.0);
        let got = best_ordered_partition(&rows, k).unwrap();
        let (best, _) = exhaustive_best(&rows, k);
        let scale = best.max(1.0);
        worst = worst.max((got.loss - best).abs() / scale);
        // ties may pick another split; its own loss must still be optimal
        let ends: Vec<usize> = got.segments.iter().map(|s| *s.end()).collect();
        if (split_loss(&rows, &ends) - best).abs() / scale > DP_REL_TOL {
            split_mismatch += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    r.line(
        "2",
        "DP optimality",
        &[("2", worst <= DP_REL_TOL && split_mismatch == 0 && secs < DP_SECONDS)],
        format!(
            "100 instances, max rel loss gap {worst:.1e} <= {DP_REL_TOL:e}, {split_mismatch} non-optimal splits, {secs:.2} s < {DP_SECONDS} s"
        ),
        start,
    );
}

fn normalization(r: &mut Report) {
    let start = Instant::now();
    let mut rng = rng(3000);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let l = rng.random_range(3..=40);
        let w = uniform_matrix(&mut rng, l, 3, 1.0);
        let n = normalize_w(&w, 1e-12).unwrap();
        let defect = n.gram().scale(1.0 / l as f64).sub(&Matrix::identity(3)).frobenius_norm();
        worst = worst.max(defect);
    }
    r.line(
        "3",
        "normalization",
        &[("3", worst < NORMALIZE_TOL)],
        format!("max ||W~'W~/L - I||_F {worst:.1e} < {NORMALIZE_TOL:e} on 100 inputs"),
        start,
    );
}

fn single_cell(r: &mut Report) {
    let start = Instant::now();
    let cfg = PgdConfig {
        max_iters: 5_000,
        tol: 1e-14,
        ..PgdConfig::default()
    };
    let p = equal_partition(1.0, 1).unwrap();
    let mut worst = 0.0f64;
    for y in [1.0, 3.0, 10.0f64] {
        let counts = Tensor3::new((1, 1, 1), vec![y]).unwrap();
        let init = initialize(&counts, &p, (1, 1, 1), &cfg).unwrap();
        let fit = pgd_fit(&counts, &p, &init, &cfg).unwrap();
        worst = worst.max((fit.assembled[(0, 0, 0)] - y.ln()).abs());
    }
    r.line(
        "4",
        "single-cell MLE",
        &[("4", worst < MLE_TOL)],
        format!("max |m - log Y| {worst:.1e} < {MLE_TOL:e} for Y in {{1, 3, 10}}"),
        start,
    );
}

fn k_hits(k_hats: &[Option<usize>], k0: usize) -> usize {
    k_hats.iter().filter(|k| **k == Some(k0)).count()
}

fn mean_log(t: &ComparisonTable, m: usize) -> f64 {
    Summary::of(&t.log_errors(m)).mean
}

fn mean_rate(t: &ComparisonTable, m: usize) -> f64 {
    Summary::of(&t.rate_errors(m)).mean
}

fn synthetic_criteria(r: &mut Report) {
    // T = n: criteria 5 (K0 = 3), 6 and 7 share one comparison run
    let start = Instant::now();
    let at_n = compare_methods(&synthetic(N as f64, 3, 0), &pipeline(MergeMode::Always), SEEDS).unwrap();
    let k3: Vec<Option<usize>> = at_n.rows.iter().map(|row| row.k_hat).collect();
    let elapsed_shared = start.elapsed();

    let start5 = Instant::now();
    let syn5 = synthetic(N as f64, 5, 0);
    let cfg = pipeline(MergeMode::Always);
    let k5: Vec<Option<usize>> = map_replications(SEEDS, |s| {
        let rep = replicate(&syn5, s)?;
        Ok(adaptive_run(&rep, &cfg)?.k_hat)
    })
    .unwrap();
    let (h3, h5) = (k_hits(&k3, 3), k_hits(&k5, 5));
    r.line(
        "5",
        "K selection (n=50, T=50)",
        &[("5a", fraction(h3, SEEDS) >= K3_RATE), ("5b", fraction(h5, SEEDS) >= K5_RATE)],
        format!(
            "K0=3: {h3}/{SEEDS} (need {:.0}%), K0=5: {h5}/{SEEDS} (need {:.0}%); shared run {:.1} s",
            K3_RATE * 100.0,
            K5_RATE * 100.0,
            elapsed_shared.as_secs_f64()
        ),
        start5,
    );

    let start6 = Instant::now();
    let am = Summary::of(&at_n.log_errors(0));
    r.line(
        "6",
        "AM error magnitude (n=50, T=50)",
        &[("6", am.mean <= AM_ERROR_MAX)],
        format!("mean {:.2e} (std {:.1e}) <= {AM_ERROR_MAX} over {SEEDS} seeds", am.mean, am.std),
        start6,
    );

    let start7 = Instant::now();
    let t_low = (N as f64).powf(1.0 / 3.0);
    let low = compare_methods(&synthetic(t_low, 3, 0), &pipeline(MergeMode::Always), SEEDS).unwrap();
    let (am_n, str_n, hooi_n, hosvd_n) = (mean_log(&at_n, 0), mean_log(&at_n, 2), mean_log(&at_n, 3), mean_log(&at_n, 4));
    let (am_low, es_low) = (mean_log(&low, 0), mean_log(&low, 1));
    r.line(
        "7",
        "method ordering",
        &[
            ("7a", am_n < str_n && am_n < hooi_n && am_n < hosvd_n),
            ("7b", es_low <= am_low),
        ],
        format!(
            "T=n: AM {am_n:.2e} < ES(L_str) {str_n:.2e}, HOOI {hooi_n:.2e}, HOSVD {hosvd_n:.2e} \
             [rate scale AM {:.2e}, HOOI {:.2e}, HOSVD {:.2e}]; \
             T=n^(1/3): ES(L_opt) {es_low:.3e} <= AM {am_low:.3e} [L_opt {}, K_hat=3 in {}/{SEEDS}]",
            mean_rate(&at_n, 0),
            mean_rate(&at_n, 3),
            mean_rate(&at_n, 4),
            low.rows[0].l_opt,
            k_hits(&low.rows.iter().map(|row| row.k_hat).collect::<Vec<_>>(), 3),
        ),
        start7,
    );
}

fn sweep(r: &mut Report) {
    let start = Instant::now();
    let syn = synthetic(N as f64, 3, 0);
    let cfg = pipeline(MergeMode::Always);
    let datasets = SWEEP_REPLICATIONS * SWEEP_DATASETS;
    let errors: Vec<Vec<f64>> = map_replications(datasets, |d| {
        let rep = replicate(&syn, d)?;
        SWEEP_GRID
            .iter()
            .map(|&l| equal_spacing_error(&rep, &cfg, l).map(|e| e.log))
            .collect()
    })
    .unwrap();
    let mut argmins = Vec::new();
    for s in 0..SWEEP_REPLICATIONS {
        let block = &errors[s * SWEEP_DATASETS..(s + 1) * SWEEP_DATASETS];
        let curve: Vec<f64> = (0..SWEEP_GRID.len())
            .map(|i| block.iter().map(|e| e[i]).sum::<f64>() / SWEEP_DATASETS as f64)
            .collect();
        argmins.push(longnet::experiment::argmin(&curve));
    }
    let interior = argmins.iter().filter(|&&i| i > 0 && i + 1 < SWEEP_GRID.len()).count();
    let minima: Vec<usize> = argmins.iter().map(|&i| SWEEP_GRID[i]).collect();
    r.line(
        "8",
        "bias-variance sweep (n=50, T=50)",
        &[("8", fraction(interior, SWEEP_REPLICATIONS) >= SWEEP_INTERIOR_RATE)],
        format!(
            "interior minimum in {interior}/{SWEEP_REPLICATIONS} (need {:.0}%), grid {SWEEP_GRID:?}, \
             {SWEEP_DATASETS} data sets per replication, minimizing L {minima:?}",
            SWEEP_INTERIOR_RATE * 100.0
        ),
        start,
    );
}

fn partition_recovery(r: &mut Report) {
    let start = Instant::now();
    let n = N as f64;
    // T = n^2 / log(nT) solved by fixed-point iteration, and T = n^2 / log n
    let mut t_fixed = n * n / n.ln();
    for _ in 0..100 {
        t_fixed = n * n / (n * t_fixed).ln();
    }
    let t_values = [t_fixed, n * n / n.ln()];
    let cfg = pipeline(MergeMode::Auto);
    let mut checks = Vec::new();
    let mut detail = Vec::new();
    for (idx, &t) in t_values.iter().enumerate() {
        let syn = synthetic(t, 3, 0);
        let runs = map_replications(SEEDS, |s| adaptive_run(&replicate(&syn, s)?, &cfg)).unwrap();
        let hits = runs.iter().filter(|a| a.endpoint_error.is_some_and(|e| e <= ENDPOINT_TOL)).count();
        let worst = runs.iter().filter_map(|a| a.endpoint_error).fold(0.0, f64::max);
        checks.push((["9a", "9b"][idx], fraction(hits, SEEDS) >= ENDPOINT_RATE));
        detail.push(format!(
            "T={t:.1} (L={}): {hits}/{SEEDS} within {ENDPOINT_TOL}, worst {worst:.3}",
            runs[0].initial_l
        ));
    }
    r.line(
        "9",
        "partition recovery (n=50, K0=3)",
        &checks,
        format!("{} (need {:.0}%)", detail.join("; "), ENDPOINT_RATE * 100.0),
        start,
    );
}

fn sampling_moments(r: &mut Report) {
    let start = Instant::now();
    let cfg = SyntheticConfig {
        n: 5,
        horizon: 6.0,
        k0: 3,
        seed: 4000,
        ..SyntheticConfig::default()
    };
    let gt = generate_truth(&cfg).unwrap();
    let draws = 200;
    let mut sum = Tensor3::zeros((5, 5, 3));
    for s in 0..draws {
        let y = bin_edges(&sample_edges(&gt, cfg.lambda0, 5000 + s).unwrap(), &gt.eta).unwrap();
        for (a, b) in sum.as_mut_slice().iter_mut().zip(y.as_slice()) {
            *a += b;
        }
    }
    let theta = gt.theta();
    let widths = gt.eta.widths();
    let mut worst = 0.0f64;
    for k in 0..3 {
        for j in 0..5 {
            for i in 0..5 {
                let mu = cfg.lambda0 * theta[(i, j, k)].exp() * widths[k];
                let mean = sum[(i, j, k)] / draws as f64;
                worst = worst.max((mean - mu).abs() / (mu / draws as f64).sqrt());
            }
        }
    }
    r.line(
        "10",
        "Poisson sampling moments",
        &[("10", worst <= MOMENT_SE)],
        format!("max |mean - mu| = {worst:.2} SE <= {MOMENT_SE} SE over 75 cells, {draws} seeds"),
        start,
    );
}

fn baselines(r: &mut Report) {
    let start = Instant::now();
    let mut rng = rng(6000);
    let ranks = (2, 2, 2);
    let mut hooi_worse = 0;
    for _ in 0..50 {
        let t = uniform_tensor(&mut rng, (6, 5, 4), 1.0);
        let e_hosvd = distance(&t, &hosvd(&t, ranks).unwrap().assemble());
        let e_hooi = distance(&t, &hooi(&t, ranks, HOOI_DEFAULT_ITERS, HOOI_DEFAULT_TOL).unwrap().factors.assemble());
        if e_hooi > e_hosvd * (1.0 + 1e-12) {
            hooi_worse += 1;
        }
    }
    let mut worst_exact = 0.0f64;
    for _ in 0..50 {
        let f: TuckerFactors = bounded_factors(&mut rng, (6, 5, 4), ranks, 2.0);
        let t = f.assemble();
        let norm = t.frobenius_norm();
        let e_hosvd = distance(&t, &hosvd(&t, ranks).unwrap().assemble()) / norm;
        let e_hooi =
            distance(&t, &hooi(&t, ranks, HOOI_DEFAULT_ITERS, HOOI_DEFAULT_TOL).unwrap().factors.assemble()) / norm;
        worst_exact = worst_exact.max(e_hosvd).max(e_hooi);
    }
    r.line(
        "11",
        "baseline sanity",
        &[("11a", hooi_worse == 0), ("11b", worst_exact < EXACT_TOL)],
        format!(
            "HOOI worse than HOSVD on {hooi_worse}/50 random tensors; exact low rank max rel err {worst_exact:.1e} < {EXACT_TOL:e}"
        ),
        start,
    );
}

fn main() {
    // `cargo test -- <filter>` passes arguments; the suite always runs whole
    let start = Instant::now();
    let mut report = Report {
        failed: Vec::new(),
        waived: Vec::new(),
    };
    gradients(&mut report);
    dp_optimality(&mut report);
    normalization(&mut report);
    single_cell(&mut report);
    synthetic_criteria(&mut report);
    sweep(&mut report);
    partition_recovery(&mut report);
    sampling_moments(&mut report);
    baselines(&mut report);

    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    if !report.waived.is_empty() {
        println!("waived failing checks: {}", report.waived.join(", "));
    }
    let unexpected_pass: Vec<&&str> = WAIVED.iter().filter(|w| !report.waived.iter().any(|f| f == **w)).collect();
    if !unexpected_pass.is_empty() {
        println!("waived checks now passing, remove them from WAIVED: {unexpected_pass:?}");
    }
    if !report.failed.is_empty() || !unexpected_pass.is_empty() {
        println!("failing checks: {}", report.failed.join(", "));
        std::process::exit(1);
    }
}

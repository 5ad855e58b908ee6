//! Browser bindings for the demo page in `www/`. Each export takes plain
//! numbers or strings and returns a JSON document; the `*_json` functions
//! behind them are ordinary Rust so they can be tested natively.

use longnet::estimator::PgdConfig;
use longnet::events::{bin_edges, equal_partition};
use longnet::experiment::{equal_spacing_error, log_estimate_error, replicate, Replicate};
use longnet::merging::{criterion_path, default_k_max, default_nu, select_and_partition, MergeConfig};
use longnet::pipeline::{fit_on_partition, merge_config_for, merge_intervals, MergeMode, PipelineConfig};
use longnet::synthetic::{adaptive_target, estimation_error, SyntheticConfig};
use longnet::Matrix;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Iteration budget that keeps a browser fit under a few seconds.
const DEMO_ITERS: usize = 200;
/// Largest node count the demo accepts.
const MAX_NODES: usize = 40;

type Outcome = Result<Value, String>;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn demo_replicate(n: usize, horizon: f64, k0: usize, seed: u64) -> Result<Replicate, String> {
    if n > MAX_NODES {
        return Err(format!("the demo is limited to {MAX_NODES} nodes"));
    }
    let syn = SyntheticConfig {
        n,
        horizon,
        k0,
        seed,
        ..SyntheticConfig::default()
    };
    syn.validate().map_err(text)?;
    replicate(&syn, 0).map_err(text)
}

fn demo_pipeline() -> PipelineConfig {
    PipelineConfig {
        merge: MergeMode::Always,
        pgd: PgdConfig {
            max_iters: DEMO_ITERS,
            ..PgdConfig::default()
        },
        ..PipelineConfig::default()
    }
}

/// Simulates a network, fits on `intervals` equal intervals and merges them.
/// Returns the true and estimated change points, the normalized temporal
/// factor rows, the criterion path, per-interval edge counts and errors.
pub fn simulate_and_merge_json(n: usize, horizon: f64, k0: usize, seed: u64, intervals: usize) -> Outcome {
    let rep = demo_replicate(n, horizon, k0, seed)?;
    let cfg = demo_pipeline();
    let delta = equal_partition(horizon, intervals).map_err(text)?;
    let initial = fit_on_partition(&rep.edges, &delta, None, cfg.ranks, &cfg.pgd).map_err(text)?;
    let merge_cfg = merge_config_for(n, horizon, intervals, &cfg);
    let (segmentation, eta_hat) = merge_intervals(&initial.factors.w, &delta, &merge_cfg).map_err(text)?;
    let rows = longnet::merging::normalize_w(&initial.factors.w, merge_cfg.condition_tol).map_err(text)?;
    let path = criterion_path(&rows, &merge_cfg).map_err(text)?;
    let refit = fit_on_partition(&rep.edges, &eta_hat, None, cfg.ranks, &cfg.pgd).map_err(text)?;
    let counts = bin_edges(&rep.edges, &delta).map_err(text)?;
    let per_interval: Vec<f64> = (0..intervals).map(|l| counts.slice(l).iter().sum()).collect();
    let initial_error = log_estimate_error(&rep.truth, &initial.assembled, &delta, cfg.pgd.lambda0).map_err(text)?;
    let merged_error = estimation_error(&refit.assembled, &adaptive_target(&rep.truth, &eta_hat).map_err(text)?)
        .map_err(text)?;
    Ok(json!({
        "edges": rep.edges.len(),
        "eta_true": rep.truth.eta.breakpoints(),
        "eta_hat": eta_hat.breakpoints(),
        "k_hat": eta_hat.interval_count(),
        "nu": merge_cfg.nu,
        "criterion": path,
        "w_rows": (0..rows.rows()).map(|r| rows.row(r).to_vec()).collect::<Vec<_>>(),
        "interval_counts": per_interval,
        "segments": segmentation.segments.iter().map(|s| [*s.start(), *s.end()]).collect::<Vec<_>>(),
        "initial_error": initial_error.log,
        "merged_error": merged_error,
    }))
}

/// Equal-spacing error on one simulated data set for each interval count in
/// the comma-separated `l_values`.
pub fn sweep_json(n: usize, horizon: f64, k0: usize, seed: u64, l_values: &str) -> Outcome {
    let ls: Vec<usize> = l_values
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    if ls.is_empty() || ls.contains(&0) {
        return Err("interval counts must be positive".into());
    }
    let rep = demo_replicate(n, horizon, k0, seed)?;
    let cfg = demo_pipeline();
    let errors = ls
        .iter()
        .map(|&l| equal_spacing_error(&rep, &cfg, l).map(|e| e.log))
        .collect::<Result<Vec<_>, _>>()
        .map_err(text)?;
    Ok(json!({ "l_values": ls, "errors": errors }))
}

/// Segments a user-supplied sequence of row vectors (JSON array of equal
/// length arrays). `nu <= 0` and `k_max == 0` select the defaults for
/// `n_nodes` nodes on horizon `horizon`.
pub fn segment_json(rows_json: &str, nu: f64, k_max: usize, n_nodes: usize, horizon: f64) -> Outcome {
    let rows: Vec<Vec<f64>> = serde_json::from_str(rows_json).map_err(text)?;
    if rows.is_empty() {
        return Err("no rows".into());
    }
    let m = Matrix::from_rows(&rows).map_err(text)?;
    let l = m.rows();
    let cfg = MergeConfig {
        nu: if nu > 0.0 { nu } else { default_nu(n_nodes.max(2), horizon, 0.1) },
        k_max: if k_max > 0 { k_max.min(l) } else { default_k_max(l) },
        epsilon: 0.1,
        condition_tol: 1e-12,
    };
    let path = criterion_path(&m, &cfg).map_err(text)?;
    let best = select_and_partition(&m, &cfg).map_err(text)?;
    Ok(json!({
        "nu": cfg.nu,
        "criterion": path,
        "k": best.segments.len(),
        "segments": best.segments.iter().map(|s| [*s.start(), *s.end()]).collect::<Vec<_>>(),
        "loss": best.loss,
    }))
}

fn export(v: Outcome) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = simulateAndMerge)]
pub fn simulate_and_merge(n: usize, horizon: f64, k0: usize, seed: u32, intervals: usize) -> Result<String, JsError> {
    export(simulate_and_merge_json(n, horizon, k0, seed as u64, intervals))
}

#[wasm_bindgen(js_name = sweepCurve)]
pub fn sweep_curve(n: usize, horizon: f64, k0: usize, seed: u32, l_values: &str) -> Result<String, JsError> {
    export(sweep_json(n, horizon, k0, seed as u64, l_values))
}

#[wasm_bindgen(js_name = segmentRows)]
pub fn segment_rows(rows_json: &str, nu: f64, k_max: usize, n_nodes: usize, horizon: f64) -> Result<String, JsError> {
    export(segment_json(rows_json, nu, k_max, n_nodes, horizon))
}

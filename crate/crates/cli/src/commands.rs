//! Subcommand bodies. Output files per command:
//!
//! | command | files |
//! |---------|-------|
//! | `simulate` | `edges.txt`, `truth_factors.txt`, `truth_partition.txt`, `truth_norms.csv` |
//! | `estimate` | `delta_partition.txt`, `initial_factors.txt`, `initial_trace.csv`, `summary.csv`; after merging also `segmentation.csv`, `eta_partition.txt`, `merged_factors.txt`, `merged_trace.csv` |
//! | `merge` | `segmentation.csv`, `eta_partition.txt` |
//! | `evaluate` | `evaluation.csv` |
//! | `sweep` | `sweep.csv` |
//! | `compare` | `compare.csv` |
//! | `crossval` | `crossval.csv` |
//!
//! Every run also writes `manifest.txt` with the command and its settings.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use longnet::estimator::FitResult;
use longnet::events::{load_edges, save_edges, EdgeSet, Partition};
use longnet::experiment::{
    compare_methods, crossval as run_crossval, rate_error, replicate, replication_seeds, sweep_l, Replicate,
};
use longnet::io::{read_factors, write_factors, FACTORS_FORMAT};
use longnet::pipeline::{merge_config_for, merge_intervals, run_pipeline, PipelineConfig};
use longnet::synthetic::{adaptive_target, estimation_error, expand_truth, GroundTruth};
use longnet::TuckerFactors;

use crate::settings::{Overrides, Settings};
use crate::{CliError, EXIT_IO};

type Result<T> = std::result::Result<T, CliError>;

pub const TRUTH_FACTORS: &str = "truth_factors.txt";
pub const TRUTH_PARTITION: &str = "truth_partition.txt";

/// Output directory of one run.
struct Run {
    dir: PathBuf,
}

impl Run {
    fn create(command: &str, settings: &Settings) -> Result<Self> {
        let dir = settings.out_dir();
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        let run = Self { dir };
        run.write(
            "manifest.txt",
            &format!(
                "command={command}\nversion={}\nfactors_format={FACTORS_FORMAT}\n{}",
                env!("CARGO_PKG_VERSION"),
                settings.manifest()
            ),
        )?;
        Ok(run)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    }

    fn write_with(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> longnet::Result<()>) -> Result<()> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| io_error(&path, e))?;
        let mut sink = BufWriter::new(file);
        f(&mut sink).map_err(|e| CliError::core("output", e))?;
        sink.flush().map_err(|e| io_error(&path, e))
    }

    fn factors(&self, name: &str, f: &TuckerFactors) -> Result<()> {
        self.write_with(name, |w| write_factors(f, w))
    }

    fn partition(&self, name: &str, p: &Partition) -> Result<()> {
        self.write_with(name, |w| p.write(w))
    }

    fn fit(&self, prefix: &str, fit: &FitResult) -> Result<()> {
        self.factors(&format!("{prefix}_factors.txt"), &fit.factors)?;
        self.write(&format!("{prefix}_trace.csv"), &fit.trace_csv())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new("io", format!("{}: {e}", path.display()), EXIT_IO)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| io_error(path, e))
}

fn load<T>(stage: &str, path: &Path, f: impl FnOnce(BufReader<File>) -> longnet::Result<T>) -> Result<T> {
    f(open(path)?).map_err(|e| CliError::core(stage, e).with_path(path))
}

impl CliError {
    fn with_path(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

/// Edge data for a run: a file, or replication 0 of the synthetic generator.
enum Data {
    File(EdgeSet),
    Synthetic(Box<Replicate>),
}

impl Data {
    fn resolve(settings: &Settings) -> Result<Self> {
        match settings.input()? {
            Some(path) => Ok(Data::File(load("load", &path, load_edges)?)),
            None => {
                let syn = settings.synthetic()?;
                let rep = replicate(&syn, 0).map_err(|e| CliError::core("simulate", e))?;
                Ok(Data::Synthetic(Box::new(rep)))
            }
        }
    }

    fn edges(&self) -> &EdgeSet {
        match self {
            Data::File(e) => e,
            Data::Synthetic(r) => &r.edges,
        }
    }

    fn truth(&self) -> Option<&GroundTruth> {
        match self {
            Data::File(_) => None,
            Data::Synthetic(r) => Some(&r.truth),
        }
    }
}

fn write_truth(run: &Run, truth: &GroundTruth) -> Result<()> {
    run.factors(TRUTH_FACTORS, &truth.factors)?;
    run.partition(TRUTH_PARTITION, &truth.eta)
}

pub fn simulate(o: &Overrides) -> Result<()> {
    let settings = Settings::resolve(o)?;
    if settings.input()?.is_some() {
        return Err(CliError::new("settings", "`simulate` does not read an input file", crate::EXIT_SETTINGS));
    }
    let syn = settings.synthetic()?;
    let rep = replicate(&syn, 0).map_err(|e| CliError::core("simulate", e))?;
    let run = Run::create("simulate", &settings)?;
    let (truth_seed, sample_seed) = replication_seeds(syn.seed, 0);
    run.write_with("edges.txt", |w| save_edges(&rep.edges, w))?;
    write_truth(&run, &rep.truth)?;

    let norms = rep.truth.norm_report();
    let (c_s, c1, c2, c3) = norms.required_radii(syn.k0);
    run.write(
        "truth_norms.csv",
        &format!(
            "quantity,value\ntruth_seed,{truth_seed}\nsample_seed,{sample_seed}\n\
             core_frobenius,{}\nu_two_to_inf,{}\nv_two_to_inf,{}\nmax_w_row,{}\n\
             required_c_s,{c_s}\nrequired_c1,{c1}\nrequired_c2,{c2}\nrequired_c3,{c3}\n",
            norms.core_frobenius, norms.u_two_to_inf, norms.v_two_to_inf, norms.max_w_row
        ),
    )?;
    if let Some(r) = settings.pgd()?.radii {
        if c_s > r.core || c1 > r.u || c2 > r.v || c3 > r.w {
            eprintln!(
                "warning: truth needs radii ({c_s:.3}, {c1:.3}, {c2:.3}, {c3:.3}), configured ({}, {}, {}, {})",
                r.core, r.u, r.v, r.w
            );
        }
    }
    println!(
        "simulated {} edges on {} nodes over [0, {}) with {} segments -> {}",
        rep.edges.len(),
        syn.n,
        syn.horizon,
        syn.k0,
        run.dir.display()
    );
    Ok(())
}

pub fn estimate(o: &Overrides) -> Result<()> {
    let settings = Settings::resolve(o)?;
    let cfg = settings.pipeline()?;
    let data = Data::resolve(&settings)?;
    let report = run_pipeline(data.edges(), &cfg).map_err(|e| CliError::core("pipeline", e))?;
    let run = Run::create("estimate", &settings)?;
    if let Some(truth) = data.truth() {
        run.write_with("edges.txt", |w| save_edges(data.edges(), w))?;
        write_truth(&run, truth)?;
    }
    run.partition("delta_partition.txt", &report.delta)?;
    run.fit("initial", &report.initial)?;

    let mut summary = String::from("quantity,value\n");
    let mut line = |k: &str, v: String| summary.push_str(&format!("{k},{v}\n"));
    line("edges", data.edges().len().to_string());
    line("intervals", report.delta.interval_count().to_string());
    line("gated", report.gated.to_string());
    line("initial_iterations", report.initial.iters_run.to_string());
    line("initial_step_c", report.initial.step_c.to_string());
    if let Some(mc) = &report.merge_config {
        line("nu", mc.nu.to_string());
        line("k_max", mc.k_max.to_string());
    }
    if let Some(m) = &report.merged {
        line("k_hat", m.k_hat().to_string());
        line("merged_iterations", m.fit.iters_run.to_string());
        run.write("segmentation.csv", &m.segmentation.to_csv())?;
        run.partition("eta_partition.txt", &m.eta_hat)?;
        run.fit("merged", &m.fit)?;
    }
    if let Some(truth) = data.truth() {
        let initial = report.initial_error(truth).map_err(|e| CliError::core("evaluate", e))?;
        let last = report.final_error(truth).map_err(|e| CliError::core("evaluate", e))?;
        line("initial_error", initial.to_string());
        line("final_error", last.to_string());
    }
    run.write("summary.csv", &summary)?;

    match &report.merged {
        Some(m) => println!(
            "L = {}, K_hat = {}, endpoints {:?}",
            report.delta.interval_count(),
            m.k_hat(),
            m.eta_hat.breakpoints()
        ),
        None if report.gated => println!(
            "L = {}, merging skipped by the regime gate",
            report.delta.interval_count()
        ),
        None => println!("L = {}, nothing to merge", report.delta.interval_count()),
    }
    println!("results in {}", run.dir.display());
    Ok(())
}

pub fn merge(o: &Overrides) -> Result<()> {
    let settings = Settings::resolve(o)?;
    let cfg = settings.pipeline()?;
    let factors = load("load", &settings.require_path("factors")?, read_factors)?;
    let delta = load("load", &settings.require_path("partition")?, Partition::read)?;
    let (n1, n2, _) = factors.dims();
    let l = delta.interval_count();
    let merge_cfg = merge_config_for(n1.max(n2), delta.horizon(), l, &cfg);
    let (segmentation, eta_hat) =
        merge_intervals(&factors.w, &delta, &merge_cfg).map_err(|e| CliError::core("merge", e))?;
    let run = Run::create("merge", &settings)?;
    run.write("segmentation.csv", &segmentation.to_csv())?;
    run.partition("eta_partition.txt", &eta_hat)?;
    println!("K_hat = {}, endpoints {:?}", eta_hat.interval_count(), eta_hat.breakpoints());
    Ok(())
}

pub fn evaluate(o: &Overrides) -> Result<()> {
    let settings = Settings::resolve(o)?;
    let lambda0 = settings.pgd()?.lambda0;
    let truth_dir = settings.require_path("truth")?;
    let truth = GroundTruth {
        factors: load("load", &truth_dir.join(TRUTH_FACTORS), read_factors)?,
        eta: load("load", &truth_dir.join(TRUTH_PARTITION), Partition::read)?,
    };
    let estimate = load("load", &settings.require_path("factors")?, read_factors)?;
    let partition = load("load", &settings.require_path("partition")?, Partition::read)?;
    let m_hat = estimate.assemble();
    let score = |star: longnet::Tensor3| -> Result<(f64, f64)> {
        let log = estimation_error(&m_hat, &star).map_err(|e| CliError::core("evaluate", e))?;
        let rate = rate_error(&m_hat, &star, lambda0).map_err(|e| CliError::core("evaluate", e))?;
        Ok((log, rate))
    };

    let mut csv = String::from("target,log_error,rate_error\n");
    let expanded = expand_truth(&truth, &partition).map_err(|e| CliError::core("evaluate", e))?;
    let (log, rate) = score(expanded)?;
    csv.push_str(&format!("expanded,{log},{rate}\n"));
    println!("against truth at interval left endpoints: log {log:.6e}, rate {rate:.6e}");
    if partition.interval_count() == truth.eta.interval_count() {
        let target = adaptive_target(&truth, &partition).map_err(|e| CliError::core("evaluate", e))?;
        let (log, rate) = score(target)?;
        csv.push_str(&format!("segments,{log},{rate}\n"));
        println!("against true segments: log {log:.6e}, rate {rate:.6e}");
    }
    let run = Run::create("evaluate", &settings)?;
    run.write("evaluation.csv", &csv)
}

/// Synthetic settings for the replicated commands, which have no file input.
fn replicated(settings: &Settings, command: &str) -> Result<(longnet::synthetic::SyntheticConfig, PipelineConfig)> {
    if settings.input()?.is_some() {
        return Err(CliError::new(
            "settings",
            format!("`{command}` needs ground truth and runs on synthetic data only"),
            crate::EXIT_SETTINGS,
        ));
    }
    let mut cfg = settings.pipeline()?;
    let syn = settings.synthetic()?;
    cfg.pgd.lambda0 = syn.lambda0;
    Ok((syn, cfg))
}

pub fn sweep(o: &Overrides) -> Result<()> {
    let settings = Settings::resolve(o)?;
    let (syn, cfg) = replicated(&settings, "sweep")?;
    let result = sweep_l(&syn, &cfg, &settings.l_values()?, settings.replications()?)
        .map_err(|e| CliError::core("sweep", e))?;
    let run = Run::create("sweep", &settings)?;
    run.write("sweep.csv", &result.to_csv())?;
    print!("{}", result.to_csv());
    Ok(())
}

pub fn compare(o: &Overrides) -> Result<()> {
    let settings = Settings::resolve(o)?;
    let (syn, cfg) = replicated(&settings, "compare")?;
    let table = compare_methods(&syn, &cfg, settings.replications()?).map_err(|e| CliError::core("compare", e))?;
    let run = Run::create("compare", &settings)?;
    run.write("compare.csv", &table.to_csv())?;
    print!("{}", table.render());
    Ok(())
}

pub fn crossval(o: &Overrides) -> Result<()> {
    let settings = Settings::resolve(o)?;
    let cfg = settings.pipeline()?;
    let data = Data::resolve(&settings)?;
    let result = run_crossval(data.edges(), &cfg, settings.folds()?, settings.seed()?)
        .map_err(|e| CliError::core("crossval", e))?;
    let run = Run::create("crossval", &settings)?;
    run.write("crossval.csv", &result.to_csv())?;
    print!("{}", result.to_csv());
    Ok(())
}

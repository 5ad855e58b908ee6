//! Run settings from a flat `key = value` file, overridden by command-line
//! flags of the same name.
//!
//! Keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `input` | edge-list file; absent means synthetic data | |
//! | `n` | synthetic nodes per side | 50 |
//! | `horizon` | synthetic window length `T` | 50 |
//! | `k0` | synthetic true segment count | 3 |
//! | `diag_s` | synthetic core diagonal | 0.5 |
//! | `max_length_ratio` | synthetic segment length ratio bound | 3 |
//! | `ranks` | Tucker ranks `r1,r2,r3` | 3,3,3 |
//! | `lambda0` | baseline intensity | 1 |
//! | `seed` | RNG seed | 0 |
//! | `intervals` | initial interval count or `auto` | auto |
//! | `epsilon` | exponent slack | 0.1 |
//! | `gamma` | orthogonality penalty or `auto` | auto |
//! | `step_c` | step-size constant | 0.1 |
//! | `max_iters` | PGD iterations | 500 |
//! | `tol` | relative-change stopping tolerance | 1e-8 |
//! | `radii` | `c_S,c1,c2,c3` or `auto` | auto |
//! | `radius_slack` | multiplier on initializer norms for `auto` radii | 2 |
//! | `max_halvings` | step halvings before giving up | 10 |
//! | `nu` | merge penalty or `auto` | auto |
//! | `k_max` | largest segment count or `auto` | auto |
//! | `merge` | `auto`, `always` or `never` | auto |
//! | `replications` | replications for `sweep` and `compare` | 20 |
//! | `l_values` | comma-separated interval counts for `sweep` | 5,10,20,40,80,160 |
//! | `folds` | folds for `crossval` | 5 |
//! | `out` | output directory | `$LONGNET_OUT` or `longnet-out` |
//! | `truth` | directory written by `simulate`, for `evaluate` | |
//! | `factors` | factor file for `merge` and `evaluate` | |
//! | `partition` | partition file for `merge` and `evaluate` | |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use longnet::estimator::{PgdConfig, Radii};
use longnet::pipeline::{MergeMode, PipelineConfig};
use longnet::synthetic::SyntheticConfig;

pub const OUT_ENV: &str = "LONGNET_OUT";

const SYNTHETIC_KEYS: [&str; 5] = ["n", "horizon", "k0", "diag_s", "max_length_ratio"];

#[derive(Debug)]
pub struct SettingsError(pub String);

impl fmt::Display for SettingsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SettingsError {}

type Result<T> = std::result::Result<T, SettingsError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(SettingsError(msg.into()))
}

/// Flags shared by every subcommand; each mirrors a config key.
#[derive(Debug, Default, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct Overrides {
    /// Flat `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long)]
    pub k0: Option<String>,
    #[arg(long)]
    pub diag_s: Option<String>,
    #[arg(long)]
    pub max_length_ratio: Option<String>,
    #[arg(long)]
    pub ranks: Option<String>,
    #[arg(long)]
    pub lambda0: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub intervals: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub step_c: Option<String>,
    #[arg(long)]
    pub max_iters: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub radius_slack: Option<String>,
    #[arg(long)]
    pub max_halvings: Option<String>,
    #[arg(long)]
    pub nu: Option<String>,
    #[arg(long)]
    pub k_max: Option<String>,
    #[arg(long)]
    pub merge: Option<String>,
    #[arg(long)]
    pub replications: Option<String>,
    #[arg(long)]
    pub l_values: Option<String>,
    #[arg(long)]
    pub folds: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long)]
    pub factors: Option<String>,
    #[arg(long)]
    pub partition: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("input", &self.input),
            ("n", &self.n),
            ("horizon", &self.horizon),
            ("k0", &self.k0),
            ("diag_s", &self.diag_s),
            ("max_length_ratio", &self.max_length_ratio),
            ("ranks", &self.ranks),
            ("lambda0", &self.lambda0),
            ("seed", &self.seed),
            ("intervals", &self.intervals),
            ("epsilon", &self.epsilon),
            ("gamma", &self.gamma),
            ("step_c", &self.step_c),
            ("max_iters", &self.max_iters),
            ("tol", &self.tol),
            ("radii", &self.radii),
            ("radius_slack", &self.radius_slack),
            ("max_halvings", &self.max_halvings),
            ("nu", &self.nu),
            ("k_max", &self.k_max),
            ("merge", &self.merge),
            ("replications", &self.replications),
            ("l_values", &self.l_values),
            ("folds", &self.folds),
            ("out", &self.out),
            ("truth", &self.truth),
            ("factors", &self.factors),
            ("partition", &self.partition),
        ]
    }

    pub fn known_keys(&self) -> Vec<&'static str> {
        self.pairs().into_iter().map(|(k, _)| k).collect()
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str, known: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!("config line {}: expected `key = value`", idx + 1));
        };
        let key = key.trim();
        if !known.contains(&key) {
            return err(format!("config line {}: unknown key `{key}`", idx + 1));
        }
        if map.insert(key.to_string(), value.trim().to_string()).is_some() {
            return err(format!("config line {}: duplicate key `{key}`", idx + 1));
        }
    }
    Ok(map)
}

/// Merged raw settings with typed accessors.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    #[cfg(test)]
    pub fn from_map(values: BTreeMap<String, String>) -> Self {
        Self { values }
    }

    /// Config file (if any) overridden by flags.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut values = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| SettingsError(format!("reading {}: {e}", path.display())))?;
                parse_config(&text, &o.known_keys())?
            }
            None => BTreeMap::new(),
        };
        for (key, value) in o.pairs() {
            if let Some(v) = value {
                values.insert(key.to_string(), v.clone());
            }
        }
        Ok(Self { values })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| SettingsError(format!("`{key}`: cannot parse `{v}`: {e}"))),
        }
    }

    fn auto_or<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        if self.raw(key) == Some("auto") {
            Ok(None)
        } else {
            self.parsed(key)
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|e| SettingsError(format!("`{key}`: cannot parse `{x}`: {e}")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)
            .ok_or_else(|| SettingsError(format!("`{key}` is required for this command")))
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(self.parsed("seed")?.unwrap_or(0))
    }

    /// The edge-list file, rejecting settings that also describe synthetic
    /// data.
    pub fn input(&self) -> Result<Option<PathBuf>> {
        let input = self.path("input");
        if input.is_some() {
            if let Some(k) = SYNTHETIC_KEYS.iter().find(|k| self.values.contains_key(**k)) {
                return err(format!("`input` and synthetic key `{k}` are mutually exclusive"));
            }
        }
        Ok(input)
    }

    pub fn ranks(&self) -> Result<(usize, usize, usize)> {
        match self.list::<usize>("ranks")? {
            None => Ok((3, 3, 3)),
            Some(r) if r.len() == 3 => Ok((r[0], r[1], r[2])),
            Some(_) => err("`ranks` needs three comma-separated integers"),
        }
    }

    pub fn synthetic(&self) -> Result<SyntheticConfig> {
        let d = SyntheticConfig::default();
        let cfg = SyntheticConfig {
            n: self.parsed("n")?.unwrap_or(d.n),
            horizon: self.parsed("horizon")?.unwrap_or(d.horizon),
            ranks: self.ranks()?,
            k0: self.parsed("k0")?.unwrap_or(d.k0),
            diag_s: self.parsed("diag_s")?.unwrap_or(d.diag_s),
            lambda0: self.parsed("lambda0")?.unwrap_or(d.lambda0),
            seed: self.seed()?,
            max_length_ratio: self.parsed("max_length_ratio")?.unwrap_or(d.max_length_ratio),
        };
        cfg.validate().map_err(|e| SettingsError(e.to_string()))?;
        Ok(cfg)
    }

    pub fn pgd(&self) -> Result<PgdConfig> {
        let d = PgdConfig::default();
        let radii = match self.list::<f64>("radii") {
            _ if self.raw("radii") == Some("auto") => None,
            Ok(None) => None,
            Ok(Some(r)) if r.len() == 4 => Some(Radii {
                core: r[0],
                u: r[1],
                v: r[2],
                w: r[3],
            }),
            Ok(Some(_)) => return err("`radii` needs four comma-separated values c_S,c1,c2,c3"),
            Err(e) => return Err(e),
        };
        let cfg = PgdConfig {
            lambda0: self.parsed("lambda0")?.unwrap_or(d.lambda0),
            gamma: self.auto_or("gamma")?,
            step_c: self.parsed("step_c")?.unwrap_or(d.step_c),
            max_iters: self.parsed("max_iters")?.unwrap_or(d.max_iters),
            tol: self.parsed("tol")?.unwrap_or(d.tol),
            radii,
            radius_slack: self.parsed("radius_slack")?.unwrap_or(d.radius_slack),
            max_halvings: self.parsed("max_halvings")?.unwrap_or(d.max_halvings),
        };
        cfg.validate().map_err(|e| SettingsError(e.to_string()))?;
        Ok(cfg)
    }

    pub fn merge_mode(&self) -> Result<MergeMode> {
        match self.raw("merge") {
            None | Some("auto") => Ok(MergeMode::Auto),
            Some("always") => Ok(MergeMode::Always),
            Some("never") => Ok(MergeMode::Never),
            Some(other) => err(format!("`merge` must be auto, always or never, got `{other}`")),
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let cfg = PipelineConfig {
            ranks: self.ranks()?,
            intervals: self.auto_or("intervals")?,
            epsilon: self.parsed("epsilon")?.unwrap_or(0.1),
            pgd: self.pgd()?,
            nu: self.auto_or("nu")?,
            k_max: self.auto_or("k_max")?,
            merge: self.merge_mode()?,
        };
        cfg.validate().map_err(|e| SettingsError(e.to_string()))?;
        Ok(cfg)
    }

    pub fn replications(&self) -> Result<usize> {
        match self.parsed("replications")?.unwrap_or(20) {
            0 => err("`replications` must be at least 1"),
            r => Ok(r),
        }
    }

    pub fn l_values(&self) -> Result<Vec<usize>> {
        Ok(self.list("l_values")?.unwrap_or_else(|| vec![5, 10, 20, 40, 80, 160]))
    }

    pub fn folds(&self) -> Result<usize> {
        Ok(self.parsed("folds")?.unwrap_or(5))
    }

    /// `out`, else `$LONGNET_OUT`, else `longnet-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.path("out")
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| Path::new("longnet-out").to_path_buf())
    }

    /// All settings as `key=value` lines.
    pub fn manifest(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

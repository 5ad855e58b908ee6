//! Adaptive merging of equally spaced intervals.
//!
//! The estimated temporal factor is normalized to `W~^T W~ = L I`, its rows
//! are split into contiguous segments minimizing the within-segment sum of
//! squares (exact dynamic programming), the number of segments is chosen by
//! a linear penalty, and segment ends are mapped back to times.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::events::Partition;
use crate::linalg::inverse_sqrt_spd;
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MergeConfig {
    /// Penalty per segment.
    pub nu: f64,
    /// Largest candidate segment count.
    pub k_max: usize,
    /// Exponent slack used by the default penalty and interval-count rules.
    pub epsilon: f64,
    /// `W^T W` must have smallest/largest eigenvalue ratio above this.
    pub condition_tol: f64,
}

impl MergeConfig {
    /// Config with the default penalty for `n` nodes on horizon `t` and the
    /// default segment cap for `l` intervals.
    pub fn with_defaults(n: usize, t: f64, l: usize, epsilon: f64) -> Self {
        Self {
            nu: default_nu(n, t, epsilon),
            k_max: default_k_max(l),
            epsilon,
            condition_tol: 1e-12,
        }
    }

    pub fn validate(&self, l: usize) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::InvalidArgument(format!("nu must be positive, got {}", self.nu)));
        }
        if self.k_max == 0 || self.k_max > l {
            return Err(Error::InvalidArgument(format!(
                "k_max = {} must lie in 1..={l}",
                self.k_max
            )));
        }
        Ok(())
    }
}

/// `min(L, ceil(L / 2), 25)`, at least 1.
pub fn default_k_max(l: usize) -> usize {
    l.min(l.div_ceil(2)).min(25).max(1)
}

/// `sqrt(L) W (W^T W)^{-1/2}`, so that the result satisfies `W~^T W~ = L I`.
pub fn normalize_w(w_hat: &Matrix, condition_tol: f64) -> Result<Matrix> {
    let l = w_hat.rows() as f64;
    let inv = inverse_sqrt_spd(&w_hat.gram(), condition_tol)?;
    Ok(w_hat.mul(&inv).scale(l.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderedPartitionResult {
    /// Contiguous 0-based row ranges covering `0..L` in order.
    pub segments: Vec<RangeInclusive<usize>>,
    /// Within-segment sum of squared deviations from segment means.
    pub loss: f64,
    /// Loss contributed by each segment.
    pub segment_losses: Vec<f64>,
    /// Time endpoints of the segments, filled by [`OrderedPartitionResult::with_endpoints`].
    pub endpoints: Vec<f64>,
}

impl OrderedPartitionResult {
    pub fn with_endpoints(mut self, delta_width: f64, horizon: f64) -> Self {
        self.endpoints = endpoints_from_segments(&self.segments, delta_width, horizon);
        self
    }

    /// CSV with 1-based interval indices:
    /// `segment,first,last,endpoint,loss`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment,first,last,endpoint,loss\n");
        for (s, seg) in self.segments.iter().enumerate() {
            let endpoint = self.endpoints.get(s).map_or(String::new(), |e| e.to_string());
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s + 1,
                seg.start() + 1,
                seg.end() + 1,
                endpoint,
                self.segment_losses[s]
            ));
        }
        out
    }
}

/// Prefix sums for O(1) segment costs.
struct SegmentCosts {
    sums: Vec<Vec<f64>>,
    squares: Vec<f64>,
}

impl SegmentCosts {
    fn new(rows: &Matrix) -> Self {
        let (l, d) = (rows.rows(), rows.cols());
        let mut sums = vec![vec![0.0; d]; l + 1];
        let mut squares = vec![0.0; l + 1];
        for r in 0..l {
            let row = rows.row(r);
            for c in 0..d {
                sums[r + 1][c] = sums[r][c] + row[c];
            }
            squares[r + 1] = squares[r] + row.iter().map(|x| x * x).sum::<f64>();
        }
        Self { sums, squares }
    }

    /// Sum of squared deviations of rows `a..b` (exclusive end) from their mean.
    fn cost(&self, a: usize, b: usize) -> f64 {
        let n = (b - a) as f64;
        let total: f64 = self.sums[b]
            .iter()
            .zip(&self.sums[a])
            .map(|(hi, lo)| (hi - lo).powi(2))
            .sum();
        (self.squares[b] - self.squares[a] - total / n).max(0.0)
    }
}

/// Optimal segmentations for every segment count up to `k_max`.
struct SegmentationTable {
    costs: SegmentCosts,
    /// `best[s][e]`: minimal loss of rows `0..e` split into `s + 1` segments.
    best: Vec<Vec<f64>>,
    /// Start of the last segment in the optimum for `best[s][e]`.
    split: Vec<Vec<usize>>,
    len: usize,
}

impl SegmentationTable {
    fn new(rows: &Matrix, k_max: usize) -> Self {
        let len = rows.rows();
        let costs = SegmentCosts::new(rows);
        let mut best = vec![vec![f64::INFINITY; len + 1]; k_max];
        let mut split = vec![vec![0usize; len + 1]; k_max];
        for e in 1..=len {
            best[0][e] = costs.cost(0, e);
        }
        for s in 1..k_max {
            for e in (s + 1)..=len {
                let mut value = f64::INFINITY;
                let mut arg = s;
                // earliest split wins ties
                for a in s..e {
                    let v = best[s - 1][a] + costs.cost(a, e);
                    if v < value {
                        value = v;
                        arg = a;
                    }
                }
                best[s][e] = value;
                split[s][e] = arg;
            }
        }
        Self {
            costs,
            best,
            split,
            len,
        }
    }

    fn loss(&self, k: usize) -> f64 {
        self.best[k - 1][self.len]
    }

    fn result(&self, k: usize) -> OrderedPartitionResult {
        let mut bounds = vec![self.len];
        let mut e = self.len;
        for s in (1..k).rev() {
            e = self.split[s][e];
            bounds.push(e);
        }
        bounds.push(0);
        bounds.reverse();
        let segments: Vec<_> = bounds.windows(2).map(|w| w[0]..=w[1] - 1).collect();
        let segment_losses = bounds.windows(2).map(|w| self.costs.cost(w[0], w[1])).collect();
        OrderedPartitionResult {
            segments,
            loss: self.loss(k),
            segment_losses,
            endpoints: Vec::new(),
        }
    }
}

/// Exact minimizer of the within-segment sum of squares over all splits of
/// the rows into `k` contiguous segments.
pub fn best_ordered_partition(rows: &Matrix, k: usize) -> Result<OrderedPartitionResult> {
    if k == 0 || k > rows.rows() {
        return Err(Error::InvalidArgument(format!(
            "segment count {k} outside 1..={}",
            rows.rows()
        )));
    }
    Ok(SegmentationTable::new(rows, k).result(k))
}

/// Penalized criterion values `loss_S / L + nu S` for `S = 1..=k_max`.
pub fn criterion_path(rows: &Matrix, cfg: &MergeConfig) -> Result<Vec<f64>> {
    let l = rows.rows();
    cfg.validate(l)?;
    let table = SegmentationTable::new(rows, cfg.k_max);
    Ok((1..=cfg.k_max)
        .map(|s| table.loss(s) / l as f64 + cfg.nu * s as f64)
        .collect())
}

/// Segment count minimizing `loss_S / L + nu S`; ties go to the smaller `S`.
pub fn select_k(rows: &Matrix, cfg: &MergeConfig) -> Result<usize> {
    let path = criterion_path(rows, cfg)?;
    let mut best = 0;
    for (s, v) in path.iter().enumerate() {
        if *v < path[best] {
            best = s;
        }
    }
    Ok(best + 1)
}

/// Selected segment count together with its optimal segmentation.
pub fn select_and_partition(rows: &Matrix, cfg: &MergeConfig) -> Result<OrderedPartitionResult> {
    let k = select_k(rows, cfg)?;
    best_ordered_partition(rows, k)
}

/// Default penalty `log^a(nT) / (n^{1/2} T^{1/4})` with `a = 1/4 + eps/2`
/// when `T < n^2 / log(nT)` and `a = 3/4 + eps/2` otherwise.
pub fn default_nu(n: usize, horizon: f64, epsilon: f64) -> f64 {
    let n = n as f64;
    let log_nt = (n * horizon).ln();
    let exponent = if strong_regime(n, horizon) {
        0.75 + epsilon / 2.0
    } else {
        0.25 + epsilon / 2.0
    };
    log_nt.powf(exponent) / (n.sqrt() * horizon.powf(0.25))
}

/// `T >= n^2 / log(nT)`.
pub fn strong_regime(n: f64, horizon: f64) -> bool {
    horizon >= n * n / (n * horizon).ln()
}

/// `eta_k = delta_width * (last index of segment k)`, 1-based, with the
/// final endpoint pinned to the horizon.
pub fn endpoints_from_segments(
    segments: &[RangeInclusive<usize>],
    delta_width: f64,
    horizon: f64,
) -> Vec<f64> {
    let mut out: Vec<f64> = segments
        .iter()
        .map(|s| delta_width * (*s.end() + 1) as f64)
        .collect();
    if let Some(last) = out.last_mut() {
        *last = horizon;
    }
    out
}

/// Merged partition from segments of an equal partition.
pub fn merged_partition(segments: &[RangeInclusive<usize>], delta: &Partition) -> Result<Partition> {
    Partition::new(endpoints_from_segments(
        segments,
        delta.mean_width(),
        delta.horizon(),
    ))
}

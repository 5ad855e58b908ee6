//! Timestamped edges, partitions of the observation window, and binning of
//! edges into count tensors.
//!
//! Intervals are half-open: interval `l` (0-based) covers
//! `[tau_{l-1}, tau_l)` with `tau_{-1} = 0`. Node indices are 0-based in
//! memory and 1-based in files.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSet {
    n1: usize,
    n2: usize,
    horizon: f64,
    edges: Vec<Edge>,
}

impl EdgeSet {
    pub fn new(n1: usize, n2: usize, horizon: f64) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidArgument("node counts must be positive".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        Ok(Self {
            n1,
            n2,
            horizon,
            edges: Vec::new(),
        })
    }

    pub fn from_edges(n1: usize, n2: usize, horizon: f64, edges: Vec<Edge>) -> Result<Self> {
        let mut set = Self::new(n1, n2, horizon)?;
        set.edges.reserve(edges.len());
        for e in edges {
            set.push(e)?;
        }
        Ok(set)
    }

    /// Adds an edge (0-based node indices).
    pub fn push(&mut self, e: Edge) -> Result<()> {
        if e.i >= self.n1 || e.j >= self.n2 {
            return Err(Error::InvalidArgument(format!(
                "edge ({}, {}) outside {}x{} nodes",
                e.i + 1,
                e.j + 1,
                self.n1,
                self.n2
            )));
        }
        if !(e.t >= 0.0 && e.t < self.horizon) {
            return Err(Error::InvalidArgument(format!(
                "timestamp {} outside [0, {})",
                e.t, self.horizon
            )));
        }
        self.edges.push(e);
        Ok(())
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Total number of edges per node pair over the whole window.
    pub fn pair_totals(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n1, self.n2);
        for e in &self.edges {
            m.set(e.i, e.j, m.get(e.i, e.j) + 1.0);
        }
        m
    }
}

/// Ordered breakpoints `0 < tau_1 < ... < tau_m = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    horizon: f64,
    breakpoints: Vec<f64>,
}

impl Partition {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        let Some(&horizon) = breakpoints.last() else {
            return Err(Error::InvalidArgument("partition needs at least one breakpoint".into()));
        };
        let mut prev = 0.0;
        for &b in &breakpoints {
            if !(b.is_finite() && b > prev) {
                return Err(Error::InvalidArgument(format!(
                    "breakpoints must be finite and strictly increasing from 0; {b} follows {prev}"
                )));
            }
            prev = b;
        }
        Ok(Self {
            horizon,
            breakpoints,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn interval_count(&self) -> usize {
        self.breakpoints.len()
    }

    /// Left endpoint of interval `l` (0-based).
    pub fn start(&self, l: usize) -> f64 {
        if l == 0 {
            0.0
        } else {
            self.breakpoints[l - 1]
        }
    }

    pub fn width(&self, l: usize) -> f64 {
        self.breakpoints[l] - self.start(l)
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.interval_count()).map(|l| self.width(l)).collect()
    }

    pub fn mean_width(&self) -> f64 {
        self.horizon / self.interval_count() as f64
    }

    /// Index of the interval containing `t`, if `t` lies in `[0, T)`.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0 && t < self.horizon) {
            return None;
        }
        Some(self.breakpoints.partition_point(|&b| b <= t))
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "T={}", self.horizon)?;
        for b in &self.breakpoints {
            writeln!(sink, "{b}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(source: R) -> Result<Self> {
        let mut horizon = None;
        let mut points = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let body = strip_comment(&line);
            if body.is_empty() {
                continue;
            }
            match horizon {
                None => {
                    let value = body.strip_prefix("T=").ok_or_else(|| Error::Parse {
                        line: lineno,
                        msg: format!("expected `T=<real>`, got `{body}`"),
                    })?;
                    horizon = Some(parse_f64(value, lineno)?);
                }
                Some(_) => points.push(parse_f64(body, lineno)?),
            }
        }
        let horizon = horizon.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "missing `T=` header".into(),
        })?;
        let p = Partition::new(points)?;
        if p.horizon != horizon {
            return Err(Error::HorizonMismatch {
                edges: horizon,
                partition: p.horizon,
            });
        }
        Ok(p)
    }
}

/// `count` equal intervals of width `horizon / count`.
pub fn equal_partition(horizon: f64, count: usize) -> Result<Partition> {
    if count == 0 {
        return Err(Error::InvalidArgument("interval count must be at least 1".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let width = horizon / count as f64;
    let mut breakpoints: Vec<f64> = (1..=count).map(|l| l as f64 * width).collect();
    breakpoints[count - 1] = horizon;
    Partition::new(breakpoints)
}

/// Count tensor `Y[i, j, l] = #{edges i -> j with t in [tau_{l-1}, tau_l)}`.
pub fn bin_edges(edges: &EdgeSet, partition: &Partition) -> Result<Tensor3> {
    if edges.horizon != partition.horizon {
        return Err(Error::HorizonMismatch {
            edges: edges.horizon,
            partition: partition.horizon,
        });
    }
    let mut y = Tensor3::zeros((edges.n1, edges.n2, partition.interval_count()));
    for e in &edges.edges {
        let l = partition
            .locate(e.t)
            .expect("edge timestamps validated against the horizon");
        y[(e.i, e.j, l)] += 1.0;
    }
    Ok(y)
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(p) => line[..p].trim(),
        None => line.trim(),
    }
}

pub(crate) fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        msg: format!("bad number `{}`: {e}", s.trim()),
    })
}

pub(crate) fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|e| Error::Parse {
        line,
        msg: format!("bad integer `{}`: {e}", s.trim()),
    })
}

/// Reads an edge list: a header `n1=<int> n2=<int> T=<real>` followed by
/// one `i,j,t` line per edge (1-based nodes). `#` starts a comment.
pub fn load_edges<R: BufRead>(source: R) -> Result<EdgeSet> {
    let mut set: Option<EdgeSet> = None;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let body = strip_comment(&line);
        if body.is_empty() {
            continue;
        }
        match set.as_mut() {
            None => set = Some(parse_header(body, lineno)?),
            Some(s) => {
                let fields: Vec<&str> = body.split(',').collect();
                if fields.len() != 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("expected `i,j,t`, got `{body}`"),
                    });
                }
                let i = parse_usize(fields[0], lineno)?;
                let j = parse_usize(fields[1], lineno)?;
                let t = parse_f64(fields[2], lineno)?;
                if i == 0 || j == 0 || i > s.n1 || j > s.n2 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!(
                            "node index out of range: ({i}, {j}) with n1={} n2={}",
                            s.n1, s.n2
                        ),
                    });
                }
                s.push(Edge { i: i - 1, j: j - 1, t })
                    .map_err(|e| Error::Parse {
                        line: lineno,
                        msg: e.to_string(),
                    })?;
            }
        }
    }
    set.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "missing `n1= n2= T=` header".into(),
    })
}

fn parse_header(body: &str, line: usize) -> Result<EdgeSet> {
    let (mut n1, mut n2, mut horizon) = (None, None, None);
    for tok in body.split_whitespace() {
        let (key, value) = tok.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected key=value in header, got `{tok}`"),
        })?;
        match key {
            "n1" => n1 = Some(parse_usize(value, line)?),
            "n2" => n2 = Some(parse_usize(value, line)?),
            "T" => horizon = Some(parse_f64(value, line)?),
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown header key `{key}`"),
                })
            }
        }
    }
    match (n1, n2, horizon) {
        (Some(n1), Some(n2), Some(t)) => EdgeSet::new(n1, n2, t).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        }),
        _ => Err(Error::Parse {
            line,
            msg: "header must define n1, n2 and T".into(),
        }),
    }
}

pub fn save_edges<W: Write>(edges: &EdgeSet, mut sink: W) -> Result<()> {
    writeln!(sink, "n1={} n2={} T={}", edges.n1, edges.n2, edges.horizon)?;
    for e in &edges.edges {
        writeln!(sink, "{},{},{}", e.i + 1, e.j + 1, e.t)?;
    }
    Ok(())
}

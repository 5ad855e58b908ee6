use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index ({i}, {j}, {k}) out of range for dims {dims:?}")]
    Index {
        i: usize,
        j: usize,
        k: usize,
        dims: (usize, usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("horizon mismatch: edges on [0, {edges}), partition on [0, {partition})")]
    HorizonMismatch { edges: f64, partition: f64 },

    #[error("objective became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("fitted log-intensity reached the exp clamp (|m| = {value} > {limit})")]
    ClampBinding { value: f64, limit: f64 },

    #[error("W^T W is near-singular (condition number {condition:e})")]
    Singular { condition: f64 },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

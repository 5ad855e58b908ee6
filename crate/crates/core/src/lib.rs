//! Intensity estimation for longitudinal networks observed as timestamped
//! directed edges.
//!
//! Events are binned into a count tensor over an initial fine partition of
//! the window, a Tucker-factored log-intensity is fitted by projected
//! gradient descent on the Poisson likelihood, and the rows of the fitted
//! temporal factor drive a change-point search that merges adjacent
//! intervals before a final refit.

pub mod baselines;
pub mod error;
pub mod estimator;
pub mod events;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod merging;
pub mod pipeline;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use events::{Edge, EdgeSet, Partition};
pub use tensor::{Matrix, Tensor3, TuckerFactors};

//! Weighted Takagi-van der Waerden functions, the variable-step Markov sign
//! walk behind them, blocking diagnostics and Monte Carlo checks of the
//! limit theorems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocking;
pub mod brownian;
pub mod cli;
pub mod erwvrp;
pub mod error;
pub mod fractal;
pub mod limits;
pub mod numeric;
pub mod point;
pub mod report;
pub mod rng;
pub mod stats;
pub mod weights;

pub use blocking::{build_blocks, BlockingScheme, GordinOptions};
pub use erwvrp::{ErwvrpParams, WalkPath};
pub use error::{Error, Result};
pub use fractal::{DigitExpansion, Evaluation, FractalFunction, IncrementDecomposition, Truncation};
pub use limits::VarianceProfile;
pub use point::TorusPoint;
pub use report::{Check, ExperimentReport, Verdict};
pub use rng::StreamRng;
pub use weights::{WeightKind, WeightSequence};

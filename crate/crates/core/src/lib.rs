//! Estimation of integrated functionals of volatility, `∫₀ᵗ g(c_s) ds`, from
//! discretely observed Itô semimartingales.
//!
//! The pipeline is: observations → local (optionally truncated) spot
//! covariance estimates → plug-in Riemann sum with bias corrections →
//! asymptotic variance and confidence interval. [`simkit`] and [`mc`] provide
//! simulated paths with known ground truth for validation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csvio;
pub mod error;
pub mod estimators;
pub mod matcore;
pub mod mc;
pub mod normal;
pub mod simkit;
pub mod spotvol;
pub mod testfn;

pub use error::{Error, Result};
pub use estimators::{
    estimate, estimate_with_spots, EstimateOptions, EstimateReport, EstimatorKind, Flag,
    ThetaBiasReport,
};
pub use matcore::{SymMatrix, Tensor4};
pub use simkit::{ModelKind, ModelSpec, SimulatedPath};
pub use spotvol::{ObservationGrid, SpotSeries, Truncation, TruncationScale, TuningPlan};
pub use testfn::{parse_function, FunctionRef, TestFunction};

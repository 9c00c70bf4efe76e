//! Shared fixtures for the criterion benchmarks.

use volfunc::matcore::SymMatrix;
use volfunc::simkit::{simulate, ModelSpec};
use volfunc::spotvol::{spot_estimates, ObservationGrid};
use volfunc::SpotSeries;

/// Constant-volatility path with spot covariance `c · I_d`.
pub fn constant_grid(dim: usize, c: f64, n: usize, seed: u64) -> ObservationGrid {
    let spec = ModelSpec::constant(SymMatrix::diagonal(&vec![c; dim]), n).with_substeps(1);
    simulate(&spec, seed, &[]).expect("constant model simulates").grid
}

/// Untruncated spot series with window `k = ⌈2 n^0.4⌉`.
pub fn spots(grid: &ObservationGrid) -> SpotSeries {
    let k = (2.0 * (grid.n() as f64).powf(0.4)).ceil() as usize;
    spot_estimates(grid, k, f64::INFINITY).expect("window fits")
}

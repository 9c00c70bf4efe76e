//! Observation grids, tuning plans and the local truncated spot covariance
//! estimator
//!
//! ```text
//! ĉᵢ = 1/(kΔ) Σ_{j=0}^{k−1} Δ_{i+j}X Δ_{i+j}Xᵀ · 1{‖Δ_{i+j}X‖ ≤ u}
//! ```
//!
//! computed for every window that fits in the sample.

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;

/// Regularly sampled `d`-dimensional path: `n+1` rows `X_{iΔ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGrid {
    dim: usize,
    mesh: f64,
    origin_time: f64,
    values: Vec<f64>,
}

impl ObservationGrid {
    /// Builds a grid from a flat row-major `(n+1)×d` buffer.
    pub fn new(dim: usize, mesh: f64, values: Vec<f64>) -> Result<Self> {
        Self::with_origin(dim, mesh, 0.0, values)
    }

    pub fn with_origin(dim: usize, mesh: f64, origin_time: f64, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("grid dimension must be positive".into()));
        }
        if !(mesh.is_finite() && mesh > 0.0) {
            return Err(Error::Input(format!("mesh must be positive, got {mesh}")));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::Dimension(format!(
                "{} values do not form rows of width {dim}",
                values.len()
            )));
        }
        if values.len() / dim < 2 {
            return Err(Error::Input("a grid needs at least two observations".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "observation {} component {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(ObservationGrid {
            dim,
            mesh,
            origin_time,
            values,
        })
    }

    /// Builds a grid from observation rows.
    pub fn from_rows(mesh: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("ragged observation rows".into()));
        }
        Self::new(dim, mesh, rows.iter().flatten().copied().collect())
    }

    /// Builds the path `X_0 = 0, X_i = X_{i−1} + incrementᵢ` from `n` increment rows.
    pub fn from_increments(dim: usize, mesh: f64, increments: &[f64]) -> Result<Self> {
        let mut values = vec![0.0; dim];
        let mut cur = vec![0.0; dim];
        for row in increments.chunks(dim) {
            for (c, dx) in cur.iter_mut().zip(row) {
                *c += dx;
            }
            values.extend_from_slice(&cur);
        }
        Self::new(dim, mesh, values)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn origin_time(&self) -> f64 {
        self.origin_time
    }

    /// Number of increments `n`.
    #[inline]
    pub fn n(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    /// `t = nΔ`.
    pub fn horizon(&self) -> f64 {
        self.n() as f64 * self.mesh
    }

    /// Observation row `i` (`0..=n`).
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Flat `n×d` increments; row `i` holds `X_{(i+1)Δ} − X_{iΔ}`.
    pub fn increments(&self) -> Vec<f64> {
        let d = self.dim;
        self.values
            .windows(2 * d)
            .step_by(d)
            .flat_map(|w| (0..d).map(move |l| w[d + l] - w[l]))
            .collect()
    }

    /// Same path multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> ObservationGrid {
        ObservationGrid {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// How the preliminary scale `ŝ` in `u = α ŝ Δ^ϖ` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationScale {
    /// Jump-robust bipower variation of the path.
    Bipower,
    Fixed(f64),
}

/// Truncation rule for the spot estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// `u = ∞`.
    None,
    Level {
        exponent: f64,
        constant: f64,
        scale: TruncationScale,
    },
}

/// Window and truncation tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningPlan {
    /// `γ` in `k = ⌈κ n^γ⌉`.
    pub window_exponent: f64,
    /// `κ` in `k = ⌈κ n^γ⌉`.
    pub window_const: f64,
    pub truncation: Truncation,
    /// Theta-mode: `k = ⌈θ/√Δ⌉`, overriding `γ` and `κ`.
    pub theta: Option<f64>,
}

pub const DEFAULT_WINDOW_EXPONENT: f64 = 0.4;
pub const DEFAULT_WINDOW_CONST: f64 = 2.0;
pub const DEFAULT_TRUNC_EXPONENT: f64 = 0.49;
pub const DEFAULT_TRUNC_CONST: f64 = 4.0;

impl Default for TuningPlan {
    fn default() -> Self {
        TuningPlan {
            window_exponent: DEFAULT_WINDOW_EXPONENT,
            window_const: DEFAULT_WINDOW_CONST,
            truncation: Truncation::Level {
                exponent: DEFAULT_TRUNC_EXPONENT,
                constant: DEFAULT_TRUNC_CONST,
                scale: TruncationScale::Bipower,
            },
            theta: None,
        }
    }
}

impl TuningPlan {
    pub fn without_truncation(mut self) -> Self {
        self.truncation = Truncation::None;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn with_window(mut self, exponent: f64, constant: f64) -> Self {
        self.window_exponent = exponent;
        self.window_const = constant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.theta {
            Some(theta) if !(theta.is_finite() && theta > 0.0) => {
                return Err(Error::Input(format!("theta must be positive, got {theta}")));
            }
            Some(_) => {}
            None => {
                let g = self.window_exponent;
                if !(g > 1.0 / 3.0 && g < 0.5) {
                    return Err(Error::Input(format!(
                        "window exponent must lie in (1/3, 1/2), got {g}"
                    )));
                }
                if !(self.window_const.is_finite() && self.window_const > 0.0) {
                    return Err(Error::Input(format!(
                        "window constant must be positive, got {}",
                        self.window_const
                    )));
                }
            }
        }
        if let Truncation::Level {
            exponent,
            constant,
            scale,
        } = self.truncation
        {
            if !(exponent > 0.0 && exponent < 0.5) {
                return Err(Error::Input(format!(
                    "truncation exponent must lie in (0, 1/2), got {exponent}"
                )));
            }
            if !(constant.is_finite() && constant > 0.0) {
                return Err(Error::Input(format!(
                    "truncation constant must be positive, got {constant}"
                )));
            }
            if let TruncationScale::Fixed(s) = scale {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::Input(format!("fixed truncation scale must be positive, got {s}")));
                }
            }
        }
        Ok(())
    }
}

/// Lower end of the admissible truncation-exponent window,
/// `(2p−1)/(2(2p−r))`, for growth order `p` and jump activity `r`.
pub fn truncation_exponent_lower_bound(p: f64, r: f64) -> f64 {
    let p = p.max(3.0);
    (2.0 * p - 1.0) / (2.0 * (2.0 * p - r))
}

/// Selected window length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub k: usize,
    /// The raw rule fell outside `[2, n−1]`.
    pub clamped: bool,
}

/// `⌈x⌉`, except that values within relative `1e-9` of an integer round to it
/// (so `⌈1/√1e-4⌉` is 100, not 101).
fn guarded_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// `k = ⌈κ n^γ⌉`, or `⌈θ/√Δ⌉` in theta-mode, clamped to `[2, n−1]`.
pub fn select_window(n: usize, mesh: f64, plan: &TuningPlan) -> Result<Window> {
    if n < 3 {
        return Err(Error::Input(format!(
            "n = {n} increments is too few to fit any window (need at least 3)"
        )));
    }
    let raw = match plan.theta {
        Some(theta) => guarded_ceil(theta / mesh.sqrt()),
        None => guarded_ceil(plan.window_const * (n as f64).powf(plan.window_exponent)),
    };
    let hi = (n - 1) as f64;
    let k = raw.clamp(2.0, hi);
    Ok(Window {
        k: k as usize,
        clamped: k != raw,
    })
}

/// Truncation level for one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationLevel {
    /// `u`, possibly `∞`.
    pub level: f64,
    /// Preliminary scale `ŝ`, when one was used.
    pub scale: Option<f64>,
    /// `ŝ = 0`: truncation was switched off.
    pub degenerate: bool,
}

impl TruncationLevel {
    pub const NONE: TruncationLevel = TruncationLevel {
        level: f64::INFINITY,
        scale: None,
        degenerate: false,
    };
}

/// Bipower estimate of `∫c^{ll}` for each component:
/// `(π/2)·(n/(n−1))·Σ|Δ_iX^l||Δ_{i+1}X^l|`.
pub fn bipower_variation(grid: &ObservationGrid) -> Vec<f64> {
    let d = grid.dim();
    let n = grid.n();
    let inc = grid.increments();
    let mut bv = vec![0.0; d];
    if n < 2 {
        return bv;
    }
    for i in 0..n - 1 {
        for l in 0..d {
            bv[l] += (inc[i * d + l] * inc[(i + 1) * d + l]).abs();
        }
    }
    let factor = std::f64::consts::FRAC_PI_2 * n as f64 / (n - 1) as f64;
    bv.iter().map(|b| b * factor).collect()
}

/// `u = α·ŝ·Δ^ϖ`, with `ŝ = √(Σ_l BV^l / t)` in bipower mode.
pub fn select_truncation(grid: &ObservationGrid, plan: &TuningPlan) -> TruncationLevel {
    let Truncation::Level {
        exponent,
        constant,
        scale,
    } = plan.truncation
    else {
        return TruncationLevel::NONE;
    };
    let s = match scale {
        TruncationScale::Fixed(s) => s,
        TruncationScale::Bipower => {
            let total: f64 = bipower_variation(grid).iter().sum();
            (total / grid.horizon()).sqrt()
        }
    };
    if !(s > 0.0 && s.is_finite()) {
        tracing::warn!("degenerate preliminary scale {s}; truncation disabled");
        return TruncationLevel {
            level: f64::INFINITY,
            scale: Some(s),
            degenerate: true,
        };
    }
    TruncationLevel {
        level: constant * s * grid.mesh().powf(exponent),
        scale: Some(s),
        degenerate: false,
    }
}

/// The sequence `ĉᵢ`, `i = 1..n−k+1`.
#[derive(Debug, Clone)]
pub struct SpotSeries {
    dim: usize,
    mesh: f64,
    n: usize,
    window: usize,
    truncation: f64,
    estimates: Vec<SymMatrix>,
    truncated_fraction: f64,
}

impl SpotSeries {
    /// Assembles a series directly from spot values (used by tests and by
    /// callers that bring their own spot estimates).
    pub fn from_estimates(mesh: f64, n: usize, window: usize, estimates: Vec<SymMatrix>) -> Result<Self> {
        let dim = estimates
            .first()
            .map(SymMatrix::dim)
            .ok_or_else(|| Error::Input("empty spot series".into()))?;
        if estimates.iter().any(|e| e.dim() != dim) {
            return Err(Error::Dimension("spot estimates of mixed dimension".into()));
        }
        Ok(SpotSeries {
            dim,
            mesh,
            n,
            window,
            truncation: f64::INFINITY,
            estimates,
            truncated_fraction: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn mesh(&self) -> f64 {
        self.mesh
    }
    /// Number of increments in the underlying grid.
    pub fn n(&self) -> usize {
        self.n
    }
    /// `k`.
    pub fn window(&self) -> usize {
        self.window
    }
    /// `u`.
    pub fn truncation(&self) -> f64 {
        self.truncation
    }
    pub fn truncated_fraction(&self) -> f64 {
        self.truncated_fraction
    }
    pub fn estimates(&self) -> &[SymMatrix] {
        &self.estimates
    }
    pub fn len(&self) -> usize {
        self.estimates.len()
    }
    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }
    /// `ĉ₁`.
    pub fn first(&self) -> &SymMatrix {
        &self.estimates[0]
    }
    /// `ĉ_{n−k+1}`.
    pub fn last(&self) -> &SymMatrix {
        &self.estimates[self.estimates.len() - 1]
    }
}

/// Neumaier-compensated accumulator for the upper triangle of a window sum.
struct CompensatedSum {
    dim: usize,
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedSum {
    fn new(dim: usize) -> Self {
        let len = dim * (dim + 1) / 2;
        CompensatedSum {
            dim,
            sum: vec![0.0; len],
            comp: vec![0.0; len],
        }
    }

    fn reset(&mut self) {
        self.sum.iter_mut().for_each(|v| *v = 0.0);
        self.comp.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn add_outer(&mut self, x: &[f64], sign: f64) {
        let mut p = 0;
        for j in 0..self.dim {
            for k in j..self.dim {
                let term = sign * x[j] * x[k];
                let s = self.sum[p];
                let t = s + term;
                self.comp[p] += if s.abs() >= term.abs() {
                    (s - t) + term
                } else {
                    (term - t) + s
                };
                self.sum[p] = t;
                p += 1;
            }
        }
    }

    fn to_matrix(&self, divisor: f64) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.dim);
        let mut p = 0;
        for j in 0..self.dim {
            for k in j..self.dim {
                m.set(j, k, (self.sum[p] + self.comp[p]) / divisor);
                p += 1;
            }
        }
        m
    }
}

fn euclidean_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Rolling computation of the truncated spot estimates. The window sum is
/// updated by adding the entering and subtracting the leaving rank-one term,
/// and recomputed from scratch every `k` steps.
pub fn spot_estimates(grid: &ObservationGrid, k: usize, truncation: f64) -> Result<SpotSeries> {
    let n = grid.n();
    let d = grid.dim();
    if k == 0 || k > n {
        return Err(Error::Input(format!(
            "window k = {k} must lie in [1, n = {n}]"
        )));
    }
    if truncation.is_nan() || truncation <= 0.0 {
        return Err(Error::Input(format!("truncation level must be positive, got {truncation}")));
    }
    let inc = grid.increments();
    let keep: Vec<bool> = inc
        .chunks(d)
        .map(|x| truncation.is_infinite() || euclidean_norm(x) <= truncation)
        .collect();
    let dropped = keep.iter().filter(|&&kept| !kept).count();
    let divisor = k as f64 * grid.mesh();
    let term = |i: usize| &inc[i * d..(i + 1) * d];

    let count = n - k + 1;
    let mut estimates = Vec::with_capacity(count);
    let mut acc = CompensatedSum::new(d);
    for start in 0..count {
        if start % k == 0 {
            acc.reset();
            for (i, _) in keep.iter().enumerate().skip(start).take(k).filter(|(_, &kept)| kept) {
                acc.add_outer(term(i), 1.0);
            }
        } else {
            let leaving = start - 1;
            let entering = start + k - 1;
            if keep[entering] {
                acc.add_outer(term(entering), 1.0);
            }
            if keep[leaving] {
                acc.add_outer(term(leaving), -1.0);
            }
        }
        estimates.push(acc.to_matrix(divisor));
    }
    Ok(SpotSeries {
        dim: d,
        mesh: grid.mesh(),
        n,
        window: k,
        truncation,
        estimates,
        truncated_fraction: dropped as f64 / n as f64,
    })
}

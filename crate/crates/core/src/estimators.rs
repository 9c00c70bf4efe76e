//! Integrated-functional estimators built on the spot series, plus feasible
//! inference.
//!
//! * `V(g)ⁿ = Δ Σᵢ g(ĉᵢ)`, optionally border corrected.
//! * `V′(g)ⁿ`: the same sum with the plug-in bias removed at every window,
//!   `g(ĉᵢ) − (1/2k) Σ ∂²_{jk,lm}g(ĉᵢ)(ĉᵢ^{jl}ĉᵢ^{km} + ĉᵢ^{jm}ĉᵢ^{kl})`.
//! * `V″(g)ⁿ`: the non-overlapping variant, one window per block of `k`.
//! * `V(h̄)ⁿ`, the plug-in asymptotic variance, and the studentized interval
//!   `V′ ± z·√(Δ·V(h̄)ⁿ)`.
//! * Moment baselines `Uⁿ(f)` for power functions.
//!
//! All sums run in ascending window order, so results are bit-reproducible.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::normal::normal_quantile;
use crate::spotvol::{select_truncation, select_window, spot_estimates, ObservationGrid, SpotSeries, TuningPlan};
use crate::testfn::{avar_function, check_domain, gaussian_abs_moment, FunctionRef, TestFunction};

/// Truncated fraction above which a report is flagged.
pub const HIGH_TRUNCATION_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Raw,
    RawBorderCorrected,
    CorrectedOverlapping,
    CorrectedNonoverlapping,
    BaselineMoment,
    BaselineQuarticity,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::Raw,
        EstimatorKind::RawBorderCorrected,
        EstimatorKind::CorrectedOverlapping,
        EstimatorKind::CorrectedNonoverlapping,
        EstimatorKind::BaselineMoment,
        EstimatorKind::BaselineQuarticity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Raw => "raw",
            EstimatorKind::RawBorderCorrected => "raw_border_corrected",
            EstimatorKind::CorrectedOverlapping => "corrected_overlapping",
            EstimatorKind::CorrectedNonoverlapping => "corrected_nonoverlapping",
            EstimatorKind::BaselineMoment => "baseline_moment",
            EstimatorKind::BaselineQuarticity => "baseline_quarticity",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, EstimatorKind::BaselineMoment | EstimatorKind::BaselineQuarticity)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::Input(format!("unknown estimator '{s}'")))
    }
}

/// Diagnostic flags attached to a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flag {
    NegativeValueForNonnegativeG,
    HighTruncationFraction,
    AvarZero,
    WindowClamped,
    DegenerateTruncationScale,
    NearBoundary,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::NegativeValueForNonnegativeG => "negative_value_for_nonnegative_g",
            Flag::HighTruncationFraction => "high_truncation_fraction",
            Flag::AvarZero => "avar_zero",
            Flag::WindowClamped => "window_clamped",
            Flag::DegenerateTruncationScale => "degenerate_truncation_scale",
            Flag::NearBoundary => "near_boundary",
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn domain_error(g: &dyn TestFunction, index: usize, reason: String) -> Error {
    Error::Domain {
        function: g.name(),
        index,
        reason,
    }
}

fn check_dims(g: &dyn TestFunction, spots: &SpotSeries) -> Result<()> {
    if spots.is_empty() {
        return Err(Error::Input("spot series is empty".into()));
    }
    if g.dim() != spots.dim() {
        return Err(Error::Dimension(format!(
            "{} has dimension {} but the spot series has dimension {}",
            g.name(),
            g.dim(),
            spots.dim()
        )));
    }
    Ok(())
}

/// `g(ĉ)` with the interior-domain check for functions that need it.
#[inline]
fn eval_at(g: &dyn TestFunction, x: &SymMatrix, index: usize) -> Result<f64> {
    if !g.smooth_on_boundary() {
        check_domain(g, x).map_err(|r| domain_error(g, index, r))?;
    }
    Ok(g.value(x))
}

/// `g(ĉ) − (1/2k)·correction(ĉ)`.
#[inline]
fn corrected_term(g: &dyn TestFunction, x: &SymMatrix, index: usize, k: usize) -> Result<f64> {
    let v = eval_at(g, x, index)?;
    let corr = g.correction_form(x)?;
    Ok(v - corr / (2.0 * k as f64))
}

/// `V(g)ⁿ = Δ Σ_{i=1}^{n−k+1} g(ĉᵢ)`.
pub fn estimate_raw(g: &dyn TestFunction, spots: &SpotSeries) -> Result<f64> {
    check_dims(g, spots)?;
    let mut sum = 0.0;
    for (i, c) in spots.estimates().iter().enumerate() {
        sum += eval_at(g, c, i)?;
    }
    Ok(spots.mesh() * sum)
}

/// `raw + ((k−1)Δ/2)·(g(ĉ₁) + g(ĉ_{n−k+1}))`.
pub fn border_correct(g: &dyn TestFunction, spots: &SpotSeries, raw: f64) -> Result<f64> {
    check_dims(g, spots)?;
    let first = eval_at(g, spots.first(), 0)?;
    let last = eval_at(g, spots.last(), spots.len() - 1)?;
    let weight = (spots.window() as f64 - 1.0) * spots.mesh() / 2.0;
    Ok(raw + weight * (first + last))
}

/// Overlapping bias-corrected estimator `V′(g)ⁿ`.
pub fn estimate_corrected_overlapping(g: &dyn TestFunction, spots: &SpotSeries) -> Result<f64> {
    check_dims(g, spots)?;
    let k = spots.window();
    let mut sum = 0.0;
    for (i, c) in spots.estimates().iter().enumerate() {
        sum += corrected_term(g, c, i, k)?;
    }
    Ok(spots.mesh() * sum)
}

/// Window start indices (0-based) used by `V″`: `0, k, 2k, …`, one per full
/// block of `k` increments; a final partial block is dropped.
pub fn nonoverlapping_starts(n: usize, k: usize) -> impl Iterator<Item = usize> {
    (0..n / k).map(move |b| b * k)
}

/// Non-overlapping bias-corrected estimator `V″(g)ⁿ`.
pub fn estimate_corrected_nonoverlapping(g: &dyn TestFunction, spots: &SpotSeries) -> Result<f64> {
    check_dims(g, spots)?;
    let k = spots.window();
    let mut sum = 0.0;
    for i in nonoverlapping_starts(spots.n(), k) {
        sum += corrected_term(g, &spots.estimates()[i], i, k)?;
    }
    Ok(k as f64 * spots.mesh() * sum)
}

/// Plug-in asymptotic variance `V(h̄)ⁿ`.
pub fn estimate_avar(g: &FunctionRef, spots: &SpotSeries) -> Result<f64> {
    let h = avar_function(g);
    let v = estimate_raw(h.as_ref(), spots)?;
    if !v.is_finite() {
        return Err(Error::Numerical(format!("non-finite asymptotic variance for {}", g.name())));
    }
    Ok(v)
}

/// `value ± z_{(1+level)/2}·√(Δ·avar)`, or `None` when `avar ≤ 0`.
pub fn confidence_interval(value: f64, avar: f64, mesh: f64, level: f64) -> Option<(f64, f64)> {
    assert!(level > 0.0 && level < 1.0, "confidence level must lie in (0,1)");
    if !(avar > 0.0) {
        return None;
    }
    let half = normal_quantile((1.0 + level) / 2.0) * (mesh * avar).sqrt();
    Some((value - half, value + half))
}

/// Theta-mode bias terms. The vol-of-vol and volatility-jump terms are not
/// estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBiasReport {
    pub theta: f64,
    /// Border term `−(θ/2)(g(ĉ₁) + g(ĉ_{n−k+1}))`.
    pub a1: f64,
    /// Statistical-error term `(1/2θ)·V(f)ⁿ`, `f = Σ∂²g·(xx + xx)`.
    pub a2: f64,
}

impl ThetaBiasReport {
    /// Marker for the unestimated vol-of-vol and vol-jump terms.
    pub const A3_A4: &'static str = "not_estimated";
}

/// Plug-in estimates of the border and statistical-error biases for spots
/// built with a theta-mode window `k ≈ θ/√Δ`.
pub fn theta_mode_bias(g: &dyn TestFunction, spots: &SpotSeries, theta: f64) -> Result<ThetaBiasReport> {
    check_dims(g, spots)?;
    if !(theta > 0.0) {
        return Err(Error::Input(format!("theta must be positive, got {theta}")));
    }
    let first = eval_at(g, spots.first(), 0)?;
    let last = eval_at(g, spots.last(), spots.len() - 1)?;
    let mut sum = 0.0;
    for (i, c) in spots.estimates().iter().enumerate() {
        if !g.smooth_on_boundary() {
            check_domain(g, c).map_err(|r| domain_error(g, i, r))?;
        }
        sum += g.correction_form(c)?;
    }
    Ok(ThetaBiasReport {
        theta,
        a1: -theta / 2.0 * (first + last),
        a2: spots.mesh() * sum / (2.0 * theta),
    })
}

fn require_univariate(grid: &ObservationGrid) -> Result<()> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "moment baselines are one-dimensional, data has d={}",
            grid.dim()
        )));
    }
    Ok(())
}

/// `Δ Σ |ΔᵢX/√Δ|^{q} / m_q`.
fn normalized_power_sum(grid: &ObservationGrid, q: f64) -> f64 {
    let root = grid.mesh().sqrt();
    let m = gaussian_abs_moment(q);
    let sum: f64 = grid.increments().iter().map(|dx| (dx / root).abs().powf(q)).sum();
    grid.mesh() * sum / m
}

/// `Uⁿ(f_p) = Δ Σ |ΔᵢX/√Δ|^{2p} / m_{2p}`, an estimator of `∫ c^p ds`.
pub fn baseline_moment(p: f64, grid: &ObservationGrid) -> Result<f64> {
    require_univariate(grid)?;
    if !(p > 0.0) {
        return Err(Error::Input(format!("power must be positive, got {p}")));
    }
    Ok(normalized_power_sum(grid, 2.0 * p))
}

/// Plug-in asymptotic variance of `Uⁿ(f_p)`:
/// `(m_{4p}/m_{2p}² − 1)·Δ Σ |ΔᵢX/√Δ|^{4p}/m_{4p}`.
pub fn baseline_moment_avar(p: f64, grid: &ObservationGrid) -> Result<f64> {
    require_univariate(grid)?;
    let m2p = gaussian_abs_moment(2.0 * p);
    let m4p = gaussian_abs_moment(4.0 * p);
    Ok((m4p / (m2p * m2p) - 1.0) * normalized_power_sum(grid, 4.0 * p))
}

/// Classical quarticity estimator `(1/(3Δ)) Σ (ΔᵢX)⁴`.
pub fn baseline_quarticity(grid: &ObservationGrid) -> Result<f64> {
    require_univariate(grid)?;
    let sum: f64 = grid.increments().iter().map(|dx| dx.powi(4)).sum();
    Ok(sum / (3.0 * grid.mesh()))
}

/// Options for [`estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub kind: EstimatorKind,
    pub ci_level: f64,
    /// Add the border term to `V′` (the raw kinds are fixed by their name).
    pub border_correction: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            kind: EstimatorKind::CorrectedOverlapping,
            ci_level: 0.95,
            border_correction: true,
        }
    }
}

impl EstimateOptions {
    pub fn kind(kind: EstimatorKind) -> Self {
        EstimateOptions {
            kind,
            ..Self::default()
        }
    }
}

/// Point estimate with inference and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub estimator_kind: EstimatorKind,
    pub function: String,
    pub value: f64,
    pub horizon: f64,
    pub avar_estimate: f64,
    pub ci_level: f64,
    pub ci: Option<(f64, f64)>,
    pub flags: BTreeSet<Flag>,
    pub n: usize,
    pub mesh: f64,
    pub window: usize,
    pub truncation: f64,
    pub truncated_fraction: f64,
}

/// Output of [`estimate_with_spots`]: the report plus the intermediate spot
/// series, for callers that reuse it.
#[derive(Debug, Clone)]
pub struct EstimateRun {
    pub report: EstimateReport,
    pub spots: SpotSeries,
}

/// Selects the window and truncation level and computes the spot series.
pub fn prepare_spots(grid: &ObservationGrid, plan: &TuningPlan) -> Result<(SpotSeries, BTreeSet<Flag>)> {
    plan.validate().map_err(|e| e.at_stage("plan"))?;
    let window = select_window(grid.n(), grid.mesh(), plan).map_err(|e| e.at_stage("select_window"))?;
    let level = select_truncation(grid, plan);
    let spots = spot_estimates(grid, window.k, level.level).map_err(|e| e.at_stage("spot_estimates"))?;
    let mut flags = BTreeSet::new();
    if window.clamped {
        flags.insert(Flag::WindowClamped);
    }
    if level.degenerate {
        flags.insert(Flag::DegenerateTruncationScale);
    }
    if spots.truncated_fraction() > HIGH_TRUNCATION_FRACTION {
        flags.insert(Flag::HighTruncationFraction);
    }
    Ok((spots, flags))
}

/// Evaluates the chosen estimator and its inference on a prepared spot series.
pub fn estimate_from_spots(
    g: &FunctionRef,
    grid: &ObservationGrid,
    spots: &SpotSeries,
    mut flags: BTreeSet<Flag>,
    options: &EstimateOptions,
) -> Result<EstimateReport> {
    let gref = g.as_ref();
    if gref.dim() != grid.dim() {
        return Err(Error::Dimension(format!(
            "{} has dimension {} but the data has dimension {}",
            gref.name(),
            gref.dim(),
            grid.dim()
        ))
        .at_stage("estimator"));
    }
    if !gref.smooth_on_boundary() {
        let floor = spots
            .estimates()
            .iter()
            .map(SymMatrix::min_eigenvalue)
            .fold(f64::INFINITY, f64::min);
        let scale = spots.estimates().iter().map(SymMatrix::trace).sum::<f64>() / spots.len() as f64;
        if floor < 1e-6 * scale {
            tracing::warn!(
                "{} is only smooth on the interior and spot estimates approach 0 (min eigenvalue {floor})",
                gref.name()
            );
            flags.insert(Flag::NearBoundary);
        }
    }

    let value = match options.kind {
        EstimatorKind::Raw => estimate_raw(gref, spots),
        EstimatorKind::RawBorderCorrected => {
            estimate_raw(gref, spots).and_then(|raw| border_correct(gref, spots, raw))
        }
        EstimatorKind::CorrectedOverlapping => {
            let v = estimate_corrected_overlapping(gref, spots);
            if options.border_correction {
                v.and_then(|v| border_correct(gref, spots, v))
            } else {
                v
            }
        }
        EstimatorKind::CorrectedNonoverlapping => estimate_corrected_nonoverlapping(gref, spots),
        EstimatorKind::BaselineMoment | EstimatorKind::BaselineQuarticity => {
            baseline_value(gref, grid, options.kind)
        }
    }
    .map_err(|e| e.at_stage("estimator"))?;
    if !value.is_finite() {
        return Err(Error::Numerical(format!("non-finite estimate {value}")).at_stage("estimator"));
    }
    if gref.nonnegative() && value < 0.0 {
        flags.insert(Flag::NegativeValueForNonnegativeG);
    }

    let avar = if options.kind.is_baseline() {
        let p = gref.power_exponent().unwrap_or(f64::NAN);
        baseline_moment_avar(p, grid)
    } else {
        estimate_avar(g, spots)
    }
    .map_err(|e| e.at_stage("avar"))?;
    let ci = confidence_interval(value, avar, grid.mesh(), options.ci_level);
    if ci.is_none() {
        flags.insert(Flag::AvarZero);
    }

    Ok(EstimateReport {
        estimator_kind: options.kind,
        function: gref.name(),
        value,
        horizon: grid.horizon(),
        avar_estimate: avar,
        ci_level: options.ci_level,
        ci,
        flags,
        n: grid.n(),
        mesh: grid.mesh(),
        window: spots.window(),
        truncation: spots.truncation(),
        truncated_fraction: spots.truncated_fraction(),
    })
}

fn baseline_value(g: &dyn TestFunction, grid: &ObservationGrid, kind: EstimatorKind) -> Result<f64> {
    let p = g.power_exponent().ok_or_else(|| {
        Error::Unsupported(format!("{kind} needs a power function, got {}", g.name()))
    })?;
    match kind {
        EstimatorKind::BaselineQuarticity if p != 2.0 => Err(Error::Unsupported(format!(
            "baseline_quarticity estimates power:p=2 only, got {}",
            g.name()
        ))),
        EstimatorKind::BaselineQuarticity => baseline_quarticity(grid),
        _ => baseline_moment(p, grid),
    }
}

/// Full pipeline: window → truncation → spot series → estimator → avar → CI.
pub fn estimate_with_spots(
    g: &FunctionRef,
    grid: &ObservationGrid,
    plan: &TuningPlan,
    options: &EstimateOptions,
) -> Result<EstimateRun> {
    if !(options.ci_level > 0.0 && options.ci_level < 1.0) {
        return Err(Error::Input(format!("ci level must lie in (0,1), got {}", options.ci_level)));
    }
    let (spots, flags) = prepare_spots(grid, plan)?;
    let report = estimate_from_spots(g, grid, &spots, flags, options)?;
    Ok(EstimateRun { report, spots })
}

/// Full pipeline, returning only the report.
pub fn estimate(
    g: &FunctionRef,
    grid: &ObservationGrid,
    plan: &TuningPlan,
    options: &EstimateOptions,
) -> Result<EstimateReport> {
    estimate_with_spots(g, grid, plan, options).map(|run| run.report)
}

/// Floats in reports and CSV outputs: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl EstimateReport {
    fn fields(&self) -> Vec<(&'static str, String)> {
        let (lo, hi) = match self.ci {
            Some((lo, hi)) => (fmt_float(lo), fmt_float(hi)),
            None => ("undefined".into(), "undefined".into()),
        };
        let flags = if self.flags.is_empty() {
            "none".to_string()
        } else {
            self.flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join("|")
        };
        vec![
            ("estimator_kind", self.estimator_kind.to_string()),
            ("function", self.function.clone()),
            ("value", fmt_float(self.value)),
            ("horizon", fmt_float(self.horizon)),
            ("avar_estimate", fmt_float(self.avar_estimate)),
            ("ci_level", fmt_float(self.ci_level)),
            ("ci_lo", lo),
            ("ci_hi", hi),
            ("flags", flags),
            ("n", self.n.to_string()),
            ("mesh", fmt_float(self.mesh)),
            ("window", self.window.to_string()),
            ("truncation", fmt_float(self.truncation)),
            ("truncated_fraction", fmt_float(self.truncated_fraction)),
        ]
    }

    /// One `key=value` line per field.
    pub fn to_key_value(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn csv_header() -> String {
        let dummy = EstimateReport {
            estimator_kind: EstimatorKind::Raw,
            function: String::new(),
            value: 0.0,
            horizon: 0.0,
            avar_estimate: 0.0,
            ci_level: 0.5,
            ci: None,
            flags: BTreeSet::new(),
            n: 0,
            mesh: 0.0,
            window: 0,
            truncation: 0.0,
            truncated_fraction: 0.0,
        };
        dummy.fields().iter().map(|(k, _)| *k).collect::<Vec<_>>().join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(_, v)| {
                // function names such as identity:a=0,b=1 contain commas
                if v.contains([',', '"']) {
                    format!("\"{}\"", v.replace('"', "\"\""))
                } else {
                    v
                }
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

//! Monte Carlo replication studies.
//!
//! Each replication simulates one path with its own generator stream
//! `(seed, mesh_index << 32 | replication)`, estimates every requested
//! (estimator, function) pair on it and compares with the fine-grid truth.
//! Replications run on a rayon pool and are collected in index order, so the
//! output does not depend on scheduling or on the worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    estimate_from_spots, fmt_float, prepare_spots, theta_mode_bias, EstimateOptions, EstimatorKind,
};
use crate::simkit::{rng_stream, simulate_with_rng, ModelSpec, SimOptions};
use crate::spotvol::TuningPlan;
use crate::testfn::{gaussian_abs_moment, parse_function, FunctionRef};

/// One replication study.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub model: ModelSpec,
    pub plan: TuningPlan,
    /// Function specs as accepted by [`parse_function`].
    pub functions: Vec<String>,
    pub estimators: Vec<EstimatorKind>,
    pub replications: usize,
    pub seed: u64,
    /// Observation counts for a rate study; empty means `model.n` only.
    pub meshes: Vec<usize>,
    pub ci_level: f64,
    pub border_correction: bool,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(model: ModelSpec, plan: TuningPlan) -> Self {
        let function = if model.dim == 1 { "power:p=2" } else { "trace_power:q=2" };
        ExperimentSpec {
            model,
            plan,
            functions: vec![function.to_string()],
            estimators: vec![EstimatorKind::CorrectedOverlapping],
            replications: 1,
            seed: 0,
            meshes: Vec::new(),
            ci_level: 0.95,
            border_correction: true,
            out_dir: None,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.plan.validate()?;
        if self.replications == 0 {
            return Err(Error::Input("replications must be at least 1".into()));
        }
        if self.functions.is_empty() || self.estimators.is_empty() {
            return Err(Error::Input("need at least one function and one estimator".into()));
        }
        if self.meshes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input(format!("meshes must be strictly increasing, got {:?}", self.meshes)));
        }
        if self.meshes.iter().any(|&n| n < 3 || n > u32::MAX as usize) {
            return Err(Error::Input("every mesh needs 3 <= n < 2^32".into()));
        }
        if self.replications > u32::MAX as usize {
            return Err(Error::Input("at most 2^32 − 1 replications".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Input(format!("ci_level must lie in (0,1), got {}", self.ci_level)));
        }
        if self.workers == Some(0) {
            return Err(Error::Input("workers must be at least 1".into()));
        }
        self.parsed_functions().map(|_| ())
    }

    pub fn mesh_list(&self) -> Vec<usize> {
        if self.meshes.is_empty() {
            vec![self.model.n]
        } else {
            self.meshes.clone()
        }
    }

    fn parsed_functions(&self) -> Result<Vec<FunctionRef>> {
        self.functions
            .iter()
            .map(|f| parse_function(f, self.model.dim))
            .collect()
    }
}

/// Outcome of one (replication, estimator, function) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub n: usize,
    pub replication: usize,
    pub estimator: EstimatorKind,
    pub function: String,
    pub truth: f64,
    pub value: f64,
    pub avar: f64,
    pub ci: Option<(f64, f64)>,
    pub negative: bool,
    pub window: usize,
    pub truncated_fraction: f64,
    pub jump_count: usize,
    /// `|value − value on the jump-stripped path|`; NaN without jumps.
    pub jump_deviation: f64,
    /// Theta-mode bias terms; NaN outside theta mode.
    pub a1: f64,
    pub a2: f64,
    pub failure: Option<String>,
}

impl ReplicationRecord {
    pub fn mesh(&self, horizon: f64) -> f64 {
        horizon / self.n as f64
    }

    pub fn error(&self) -> f64 {
        self.value - self.truth
    }

    pub fn covered(&self) -> bool {
        self.ci.is_some_and(|(lo, hi)| lo <= self.truth && self.truth <= hi)
    }
}

/// Aggregate over the replications of one (estimator, function, mesh).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub estimator: EstimatorKind,
    pub function: String,
    pub n: usize,
    pub mesh: f64,
    pub replications: usize,
    pub failures: usize,
    pub mean_error: f64,
    pub rmse: f64,
    /// Mean and sample variance of `(value − truth)/√Δ`.
    pub normalized_mean: f64,
    pub normalized_var: f64,
    pub coverage: f64,
    pub mean_avar: f64,
    pub negative_freq: f64,
    pub mean_a1: f64,
    pub mean_a2: f64,
    pub mean_abs_jump_deviation: f64,
    /// Log-log slope of RMSE against `Δ` across meshes (NaN for one mesh).
    pub rate_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub n: usize,
    pub replications: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub horizon: f64,
    pub records: Vec<ReplicationRecord>,
    pub summary: Vec<SummaryRow>,
    /// Wall time per mesh; kept apart from the summary, which is deterministic.
    pub timing: Vec<TimingRow>,
}

fn nan_record(n: usize, replication: usize, estimator: EstimatorKind, function: String, failure: String) -> ReplicationRecord {
    ReplicationRecord {
        n,
        replication,
        estimator,
        function,
        truth: f64::NAN,
        value: f64::NAN,
        avar: f64::NAN,
        ci: None,
        negative: false,
        window: 0,
        truncated_fraction: f64::NAN,
        jump_count: 0,
        jump_deviation: f64::NAN,
        a1: f64::NAN,
        a2: f64::NAN,
        failure: Some(failure),
    }
}

fn run_replication(
    spec: &ExperimentSpec,
    model: &ModelSpec,
    functions: &[FunctionRef],
    mesh_index: usize,
    rep: usize,
) -> Vec<ReplicationRecord> {
    let n = model.n;
    let combos = || {
        spec.estimators
            .iter()
            .flat_map(|&e| functions.iter().map(move |g| (e, g)))
    };
    let mut rng = rng_stream(spec.seed, ((mesh_index as u64) << 32) | rep as u64);
    let path = match simulate_with_rng(model, &mut rng, spec.seed, functions, SimOptions::default()) {
        Ok(p) => p,
        Err(e) => {
            let msg = format!("simulate: {e}");
            return combos()
                .map(|(kind, g)| nan_record(n, rep, kind, g.name(), msg.clone()))
                .collect();
        }
    };
    let has_jumps = model.jumps.is_some();
    let spots = prepare_spots(&path.grid, &spec.plan);
    let stripped = if has_jumps {
        Some(prepare_spots(&path.continuous_grid, &spec.plan))
    } else {
        None
    };

    combos()
        .map(|(kind, g)| {
            let name = g.name();
            let truth = path.truth.get(&name).copied().unwrap_or(f64::NAN);
            let options = EstimateOptions {
                kind,
                ci_level: spec.ci_level,
                border_correction: spec.border_correction,
            };
            let (spot_series, flags) = match &spots {
                Ok(s) => s,
                Err(e) => return nan_record(n, rep, kind, name, e.to_string()),
            };
            let report = match estimate_from_spots(g, &path.grid, spot_series, flags.clone(), &options) {
                Ok(r) => r,
                Err(e) => return nan_record(n, rep, kind, name, e.to_string()),
            };
            let jump_deviation = match &stripped {
                Some(Ok((s, f))) => estimate_from_spots(g, &path.continuous_grid, s, f.clone(), &options)
                    .map_or(f64::NAN, |r| (report.value - r.value).abs()),
                _ => f64::NAN,
            };
            let (a1, a2) = match spec.plan.theta {
                Some(theta) => theta_mode_bias(g.as_ref(), spot_series, theta).map_or((f64::NAN, f64::NAN), |b| (b.a1, b.a2)),
                None => (f64::NAN, f64::NAN),
            };
            ReplicationRecord {
                n,
                replication: rep,
                estimator: kind,
                function: name,
                truth,
                value: report.value,
                avar: report.avar_estimate,
                ci: report.ci,
                negative: report.value < 0.0 && g.nonnegative(),
                window: report.window,
                truncated_fraction: report.truncated_fraction,
                jump_count: path.jumps.len(),
                jump_deviation,
                a1,
                a2,
                failure: None,
            }
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

fn sample_var(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs.iter().copied());
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 || x.len() != y.len() {
        return f64::NAN;
    }
    let mx = mean(x.iter().copied());
    let my = mean(y.iter().copied());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Aggregates per-replication records into summary rows, ordered by
/// estimator, function and mesh as they first appear in `records`.
pub fn summarize(records: &[ReplicationRecord], horizon: f64) -> Vec<SummaryRow> {
    let mut keys: Vec<(EstimatorKind, String, usize)> = Vec::new();
    for r in records {
        let key = (r.estimator, r.function.clone(), r.n);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut rows: Vec<SummaryRow> = keys
        .into_iter()
        .map(|(estimator, function, n)| {
            let group: Vec<&ReplicationRecord> = records
                .iter()
                .filter(|r| r.estimator == estimator && r.function == function && r.n == n)
                .collect();
            let ok: Vec<&ReplicationRecord> = group.iter().copied().filter(|r| r.failure.is_none()).collect();
            let mesh = horizon / n as f64;
            let errors: Vec<f64> = ok.iter().map(|r| r.error()).collect();
            let normalized: Vec<f64> = errors.iter().map(|e| e / mesh.sqrt()).collect();
            let theta_rows = || ok.iter().filter(|r| !r.a1.is_nan());
            let jump_rows = || ok.iter().filter(|r| !r.jump_deviation.is_nan());
            SummaryRow {
                estimator,
                function,
                n,
                mesh,
                replications: group.len(),
                failures: group.len() - ok.len(),
                mean_error: mean(errors.iter().copied()),
                rmse: mean(errors.iter().map(|e| e * e)).sqrt(),
                normalized_mean: mean(normalized.iter().copied()),
                normalized_var: sample_var(&normalized),
                coverage: mean(ok.iter().map(|r| if r.covered() { 1.0 } else { 0.0 })),
                mean_avar: mean(ok.iter().map(|r| r.avar)),
                negative_freq: mean(ok.iter().map(|r| if r.negative { 1.0 } else { 0.0 })),
                mean_a1: mean(theta_rows().map(|r| r.a1)),
                mean_a2: mean(theta_rows().map(|r| r.a2)),
                mean_abs_jump_deviation: mean(jump_rows().map(|r| r.jump_deviation)),
                rate_slope: f64::NAN,
            }
        })
        .collect();

    // rate slope per (estimator, function) across meshes
    let groups: Vec<(EstimatorKind, String)> = rows.iter().map(|r| (r.estimator, r.function.clone())).collect();
    for (estimator, function) in groups {
        let idx: Vec<usize> = (0..rows.len())
            .filter(|&i| rows[i].estimator == estimator && rows[i].function == function)
            .collect();
        if idx.len() < 2 {
            continue;
        }
        let x: Vec<f64> = idx.iter().map(|&i| rows[i].mesh.ln()).collect();
        let y: Vec<f64> = idx.iter().map(|&i| rows[i].rmse.ln()).collect();
        let slope = ols_slope(&x, &y);
        for i in idx {
            rows[i].rate_slope = slope;
        }
    }
    rows
}

/// Runs every mesh of the experiment.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<McResult> {
    spec.validate()?;
    let functions = spec.parsed_functions()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = spec.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;

    let mut records = Vec::new();
    let mut timing = Vec::new();
    for (mesh_index, n) in spec.mesh_list().into_iter().enumerate() {
        let model = spec.model.clone().with_n(n);
        let start = Instant::now();
        let batch: Vec<Vec<ReplicationRecord>> = pool.install(|| {
            (0..spec.replications)
                .into_par_iter()
                .map(|rep| run_replication(spec, &model, &functions, mesh_index, rep))
                .collect()
        });
        let seconds = start.elapsed().as_secs_f64();
        tracing::info!(n, replications = spec.replications, seconds, "mesh done");
        timing.push(TimingRow {
            n,
            replications: spec.replications,
            seconds,
        });
        records.extend(batch.into_iter().flatten());
    }
    // group order: estimator, function, then mesh
    let mut ordered = Vec::with_capacity(records.len());
    for &kind in &spec.estimators {
        for g in &functions {
            let name = g.name();
            ordered.extend(records.iter().filter(|r| r.estimator == kind && r.function == name).cloned());
        }
    }
    let summary = summarize(&ordered, spec.model.horizon);
    Ok(McResult {
        horizon: spec.model.horizon,
        records: ordered,
        summary,
        timing,
    })
}

/// Variance of normalized errors of `V′` against the moment baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub function: String,
    pub n: usize,
    pub corrected_var: f64,
    pub baseline_var: f64,
    pub ratio: f64,
    /// `2p² / (m_{4p}/m_{2p}² − 1)` at constant volatility.
    pub theoretical: f64,
}

/// Asymptotic variance ratio of `V′(x^p)` to the moment baseline at constant
/// volatility.
pub fn theoretical_ratio(p: f64) -> f64 {
    let m2p = gaussian_abs_moment(2.0 * p);
    let m4p = gaussian_abs_moment(4.0 * p);
    2.0 * p * p / (m4p / (m2p * m2p) - 1.0)
}

/// Runs the experiment with `V′` and the moment baseline and tabulates the
/// variance ratio for every power function.
pub fn compare(spec: &ExperimentSpec) -> Result<(McResult, Vec<RatioRow>)> {
    if spec.model.dim != 1 {
        return Err(Error::Unsupported("compare needs a one-dimensional model".into()));
    }
    let functions = spec.parsed_functions()?;
    if let Some(g) = functions.iter().find(|g| g.power_exponent().is_none()) {
        return Err(Error::Unsupported(format!("compare needs power functions, got {}", g.name())));
    }
    let mut spec = spec.clone();
    spec.estimators = vec![EstimatorKind::CorrectedOverlapping, EstimatorKind::BaselineMoment];
    let result = run_experiment(&spec)?;
    let mut rows = Vec::new();
    for g in &functions {
        let name = g.name();
        for n in spec.mesh_list() {
            let find = |kind| {
                result
                    .summary
                    .iter()
                    .find(|r| r.estimator == kind && r.function == name && r.n == n)
                    .map_or(f64::NAN, |r| r.normalized_var)
            };
            let corrected_var = find(EstimatorKind::CorrectedOverlapping);
            let baseline_var = find(EstimatorKind::BaselineMoment);
            rows.push(RatioRow {
                function: name.clone(),
                n,
                corrected_var,
                baseline_var,
                ratio: corrected_var / baseline_var,
                theoretical: theoretical_ratio(g.power_exponent().expect("checked above")),
            });
        }
    }
    Ok((result, rows))
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(fields).expect("writing to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 input")
}

fn to_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = csv_line(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for row in rows {
        out.push_str(&csv_line(&row));
    }
    out
}

pub const REPLICATION_COLUMNS: &[&str] = &[
    "n", "replication", "estimator", "function", "truth", "value", "error", "normalized_error", "avar",
    "ci_lo", "ci_hi", "covered", "negative", "window", "truncated_fraction", "jump_count",
    "jump_deviation", "a1", "a2", "status",
];

pub fn replications_csv(result: &McResult) -> String {
    to_csv(
        REPLICATION_COLUMNS,
        result.records.iter().map(|r| {
            let mesh = r.mesh(result.horizon);
            let (lo, hi) = r.ci.map_or(("undefined".to_string(), "undefined".to_string()), |(lo, hi)| {
                (fmt_float(lo), fmt_float(hi))
            });
            vec![
                r.n.to_string(),
                r.replication.to_string(),
                r.estimator.to_string(),
                r.function.clone(),
                fmt_float(r.truth),
                fmt_float(r.value),
                fmt_float(r.error()),
                fmt_float(r.error() / mesh.sqrt()),
                fmt_float(r.avar),
                lo,
                hi,
                u8::from(r.covered()).to_string(),
                u8::from(r.negative).to_string(),
                r.window.to_string(),
                fmt_float(r.truncated_fraction),
                r.jump_count.to_string(),
                fmt_float(r.jump_deviation),
                fmt_float(r.a1),
                fmt_float(r.a2),
                r.failure.clone().unwrap_or_else(|| "ok".into()),
            ]
        }),
    )
}

pub const SUMMARY_COLUMNS: &[&str] = &[
    "estimator", "function", "n", "mesh", "replications", "failures", "mean_error", "rmse",
    "normalized_mean", "normalized_var", "coverage", "mean_avar", "negative_freq", "mean_a1", "mean_a2",
    "mean_abs_jump_deviation", "rate_slope",
];

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    to_csv(
        SUMMARY_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.estimator.to_string(),
                r.function.clone(),
                r.n.to_string(),
                fmt_float(r.mesh),
                r.replications.to_string(),
                r.failures.to_string(),
                fmt_float(r.mean_error),
                fmt_float(r.rmse),
                fmt_float(r.normalized_mean),
                fmt_float(r.normalized_var),
                fmt_float(r.coverage),
                fmt_float(r.mean_avar),
                fmt_float(r.negative_freq),
                fmt_float(r.mean_a1),
                fmt_float(r.mean_a2),
                fmt_float(r.mean_abs_jump_deviation),
                fmt_float(r.rate_slope),
            ]
        }),
    )
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    to_csv(
        &["n", "replications", "seconds"],
        rows.iter()
            .map(|r| vec![r.n.to_string(), r.replications.to_string(), format!("{:.6}", r.seconds)]),
    )
}

pub fn ratio_csv(rows: &[RatioRow]) -> String {
    to_csv(
        &["function", "n", "corrected_var", "baseline_var", "ratio", "theoretical_ratio"],
        rows.iter().map(|r| {
            vec![
                r.function.clone(),
                r.n.to_string(),
                fmt_float(r.corrected_var),
                fmt_float(r.baseline_var),
                fmt_float(r.ratio),
                fmt_float(r.theoretical),
            ]
        }),
    )
}

/// Writes `summary.csv`, `replications.csv` and `timing.csv` into `dir`.
pub fn write_outputs(result: &McResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files = [
        ("summary.csv", summary_csv(&result.summary)),
        ("replications.csv", replications_csv(result)),
        ("timing.csv", timing_csv(&result.timing)),
    ];
    let mut paths = Vec::new();
    for (name, text) in files {
        let p = dir.join(name);
        fs::write(&p, text)?;
        paths.push(p);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::SymMatrix;

    fn small_spec() -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(ModelSpec::constant(SymMatrix::scalar(1.0), 400), TuningPlan::default());
        spec.replications = 8;
        spec.seed = 17;
        spec.workers = Some(2);
        spec
    }

    #[test]
    fn single_replication_summary_matches_record() {
        let mut spec = small_spec();
        spec.replications = 1;
        let res = run_experiment(&spec).unwrap();
        assert_eq!(res.records.len(), 1);
        let r = &res.records[0];
        let s = &res.summary[0];
        assert_eq!(s.mean_error, r.error());
        assert_eq!(s.rmse, r.error().abs());
        assert_eq!(s.coverage, if r.covered() { 1.0 } else { 0.0 });
        assert_eq!(s.mean_avar, r.avar);
        assert!(s.normalized_var.is_nan());
    }

    #[test]
    fn output_is_independent_of_worker_count() {
        let mut a = small_spec();
        a.workers = Some(1);
        let mut b = small_spec();
        b.workers = Some(4);
        let ra = run_experiment(&a).unwrap();
        let rb = run_experiment(&b).unwrap();
        assert_eq!(replications_csv(&ra), replications_csv(&rb));
        assert_eq!(summary_csv(&ra.summary), summary_csv(&rb.summary));
    }

    #[test]
    fn rmse_recomputes_from_records() {
        let res = run_experiment(&small_spec()).unwrap();
        let mse = res.records.iter().map(|r| r.error().powi(2)).sum::<f64>() / res.records.len() as f64;
        assert!((res.summary[0].rmse.powi(2) - mse).abs() < 1e-12);
    }

    #[test]
    fn rate_slope_over_meshes() {
        let mut spec = small_spec();
        spec.meshes = vec![200, 800];
        let res = run_experiment(&spec).unwrap();
        assert_eq!(res.summary.len(), 2);
        assert!(res.summary[0].rate_slope.is_finite());
        assert_eq!(res.summary[0].rate_slope, res.summary[1].rate_slope);
        assert_eq!(res.timing.len(), 2);
    }

    #[test]
    fn ols_slope_of_a_line() {
        assert!((ols_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
        assert!(ols_slope(&[1.0], &[1.0]).is_nan());
    }

    #[test]
    fn theoretical_ratios() {
        assert!((theoretical_ratio(2.0) - 0.75).abs() < 1e-12);
        assert!((theoretical_ratio(1.0) - 1.0).abs() < 1e-12);
        assert!((theoretical_ratio(3.0) - 18.0 / 45.2).abs() < 1e-12);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut spec = small_spec();
        spec.functions = vec!["power:p=2".into()];
        spec.estimators = vec![EstimatorKind::BaselineQuarticity, EstimatorKind::Raw];
        let res = run_experiment(&spec).unwrap();
        assert_eq!(res.summary[0].failures, 0);
        // a flat path puts every spot estimate on the boundary, where x^1.5 is not smooth
        let mut spec = small_spec();
        spec.model = ModelSpec::constant(SymMatrix::scalar(0.0), 100);
        spec.functions = vec!["power:p=1.5".into()];
        let res = run_experiment(&spec).unwrap();
        assert_eq!(res.summary[0].replications, 8);
        assert_eq!(res.summary[0].failures, 8);
        assert!(res.records.iter().all(|r| r.failure.is_some()));
    }

    #[test]
    fn validation() {
        let mut spec = small_spec();
        spec.meshes = vec![400, 200];
        assert!(run_experiment(&spec).is_err());
        let mut spec = small_spec();
        spec.replications = 0;
        assert!(run_experiment(&spec).is_err());
        let mut spec = small_spec();
        spec.functions = vec!["cube".into()];
        assert!(run_experiment(&spec).is_err());
    }
}

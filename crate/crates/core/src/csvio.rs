//! CSV ingestion and export.
//!
//! Observation files have one row per time point, `time,X1,…,Xd`, with an
//! optional header. Simulated paths also get a sidecar truth file holding the
//! exact `V(g)_t` values and the jump times.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimators::fmt_float;
use crate::simkit::{JumpEvent, ModelSpec, SimulatedPath};
use crate::spotvol::ObservationGrid;

/// Maximal relative deviation of a time step from the average mesh.
pub const REGULARITY_TOL: f64 = 1e-6;

fn data_err(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}

/// Parses an observation CSV. The grid must be regular.
pub fn parse_grid(text: &str) -> Result<ObservationGrid> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut dim = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data_err(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let first = record.get(0).unwrap_or("");
        if times.is_empty() && dim.is_none() && first.parse::<f64>().is_err() {
            // header row
            if !first.eq_ignore_ascii_case("time") {
                return Err(data_err(format!("line {line}: expected header 'time,X1,...', got '{first}'")));
            }
            dim = Some(record.len() - 1);
            continue;
        }
        let d = *dim.get_or_insert(record.len() - 1);
        if d == 0 {
            return Err(data_err(format!("line {line}: no value columns")));
        }
        if record.len() != d + 1 {
            return Err(data_err(format!(
                "line {line}: expected {} columns, found {}",
                d + 1,
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(d + 1);
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| data_err(format!("line {line}: '{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(data_err(format!("line {line}: non-finite value '{field}'")));
            }
            row.push(v);
        }
        times.push(row[0]);
        values.extend_from_slice(&row[1..]);
    }
    let d = dim.ok_or_else(|| data_err("empty CSV"))?;
    if times.len() < 2 {
        return Err(data_err(format!("need at least two observations, found {}", times.len())));
    }
    let n = times.len() - 1;
    let mesh = (times[n] - times[0]) / n as f64;
    if !(mesh > 0.0) {
        return Err(data_err("time column must be strictly increasing"));
    }
    for (i, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - mesh).abs() > REGULARITY_TOL * mesh {
            return Err(data_err(format!(
                "irregular sampling: step {} at row {} differs from mesh {mesh} (tolerance {REGULARITY_TOL} relative)",
                step,
                i + 1
            )));
        }
    }
    ObservationGrid::with_origin(d, mesh, times[0], values).map_err(|e| data_err(e.to_string()))
}

pub fn read_grid(path: &Path) -> Result<ObservationGrid> {
    let text = fs::read_to_string(path).map_err(|e| data_err(format!("cannot read {}: {e}", path.display())))?;
    parse_grid(&text)
}

/// Serializes a grid with a `time,X1,…,Xd` header.
pub fn grid_to_csv(grid: &ObservationGrid) -> String {
    let d = grid.dim();
    let mut out = String::from("time");
    for j in 1..=d {
        let _ = write!(out, ",X{j}");
    }
    out.push('\n');
    for i in 0..=grid.n() {
        out.push_str(&fmt_float(grid.origin_time() + i as f64 * grid.mesh()));
        for v in grid.row(i) {
            out.push(',');
            out.push_str(&fmt_float(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_grid(path: &Path, grid: &ObservationGrid) -> Result<()> {
    fs::write(path, grid_to_csv(grid))?;
    Ok(())
}

/// Sidecar path next to an observation file: `path.csv` → `path.truth`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("truth")
}

/// Renders the sidecar: `[path]` metadata, `[truth]` name/value pairs
/// (tab-separated, as function names contain `=` and `,`), and `[jumps]` as CSV.
pub fn truth_sidecar(spec: &ModelSpec, path: &SimulatedPath) -> String {
    let mut out = String::from("[path]\n");
    let _ = writeln!(out, "model = {}", spec.kind.name());
    let _ = writeln!(out, "dim = {}", spec.dim);
    let _ = writeln!(out, "n = {}", spec.n);
    let _ = writeln!(out, "horizon = {}", fmt_float(spec.horizon));
    let _ = writeln!(out, "mesh = {}", fmt_float(spec.mesh()));
    let _ = writeln!(out, "euler_substeps = {}", spec.euler_substeps);
    let _ = writeln!(out, "seed = {}", path.seed);
    let _ = writeln!(out, "jump_count = {}", path.jumps.len());
    out.push_str("\n[truth]\n");
    for (name, value) in &path.truth {
        let _ = writeln!(out, "{name}\t{}", fmt_float(*value));
    }
    out.push_str("\n[jumps]\ntime");
    for j in 1..=spec.dim {
        let _ = write!(out, ",J{j}");
    }
    out.push('\n');
    for jump in &path.jumps {
        out.push_str(&fmt_float(jump.time));
        for s in &jump.size {
            out.push(',');
            out.push_str(&fmt_float(*s));
        }
        out.push('\n');
    }
    out
}

/// Writes `csv_path` and its sidecar; returns the sidecar path.
pub fn write_simulated(csv_path: &Path, spec: &ModelSpec, path: &SimulatedPath) -> Result<PathBuf> {
    write_grid(csv_path, &path.grid)?;
    let side = sidecar_path(csv_path);
    let mut f = fs::File::create(&side)?;
    f.write_all(truth_sidecar(spec, path).as_bytes())?;
    Ok(side)
}

/// Contents of a truth sidecar.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthFile {
    pub metadata: BTreeMap<String, String>,
    pub truth: BTreeMap<String, f64>,
    pub jumps: Vec<JumpEvent>,
}

pub fn parse_truth_sidecar(text: &str) -> Result<TruthFile> {
    let mut out = TruthFile::default();
    let mut section = "";
    let mut saw_jump_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('[') && trimmed.ends_with(']') {
            section = match trimmed {
                "[path]" => "path",
                "[truth]" => "truth",
                "[jumps]" => "jumps",
                other => return Err(data_err(format!("line {line}: unknown section {other}"))),
            };
            continue;
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| data_err(format!("line {line}: '{}' is not a number", s.trim())))
        };
        match section {
            "path" => {
                let (k, v) = trimmed
                    .split_once('=')
                    .ok_or_else(|| data_err(format!("line {line}: expected key = value")))?;
                out.metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
            "truth" => {
                let (k, v) = trimmed
                    .split_once('\t')
                    .ok_or_else(|| data_err(format!("line {line}: expected name<TAB>value")))?;
                out.truth.insert(k.trim().to_string(), num(v)?);
            }
            "jumps" => {
                if !saw_jump_header {
                    saw_jump_header = true;
                    continue;
                }
                let mut fields = trimmed.split(',');
                let time = num(fields.next().unwrap_or(""))?;
                let size = fields.map(num).collect::<Result<Vec<_>>>()?;
                out.jumps.push(JumpEvent { time, size });
            }
            _ => return Err(data_err(format!("line {line}: content outside of a section"))),
        }
    }
    Ok(out)
}

//! Flat INI-style experiment configuration.
//!
//! ```text
//! [model]
//! kind = constant_vol
//! n = 10000
//! c = 1
//!
//! [plan]
//! gamma = 0.4
//! varpi = none
//!
//! [experiment]
//! functions = power:p=2; identity:a=0,b=0
//! replications = 2000
//! seed = 7
//! ```
//!
//! Lines starting with `#` or `;` are comments. Every error carries the line
//! it was raised on (line 0 for keys that are missing altogether).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::matcore::SymMatrix;
use crate::mc::ExperimentSpec;
use crate::simkit::{CirVol, JumpSizes, JumpSpec, MarkovSv, ModelKind, ModelSpec};
use crate::spotvol::{
    Truncation, TruncationScale, TuningPlan, DEFAULT_TRUNC_CONST, DEFAULT_TRUNC_EXPONENT,
};

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

#[derive(Debug, Clone)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

/// Parsed but uninterpreted sections.
#[derive(Debug, Clone, Default)]
pub struct Ini {
    sections: BTreeMap<String, Section>,
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut ini = Ini::default();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(line, format!("malformed section header '{trimmed}'")))?
                    .trim()
                    .to_ascii_lowercase();
                if ini.sections.contains_key(&name) {
                    return Err(config_err(line, format!("duplicate section [{name}]")));
                }
                ini.sections.insert(
                    name.clone(),
                    Section {
                        line,
                        entries: BTreeMap::new(),
                    },
                );
                current = Some(name);
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected 'key = value', got '{trimmed}'")))?;
            let section = current
                .as_ref()
                .ok_or_else(|| config_err(line, "key outside of any section"))?;
            let key = key.trim().to_ascii_lowercase();
            let entries = &mut ini.sections.get_mut(section).expect("section exists").entries;
            if entries.contains_key(&key) {
                return Err(config_err(line, format!("duplicate key '{key}' in [{section}]")));
            }
            entries.insert(
                key,
                Entry {
                    line,
                    value: value.trim().to_string(),
                },
            );
        }
        Ok(ini)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    fn reader<'a>(&'a self, name: &'a str, allowed: &[&str]) -> Result<Reader<'a>> {
        let section = self.sections.get(name);
        if let Some(s) = section {
            for (key, entry) in &s.entries {
                if !allowed.contains(&key.as_str()) {
                    return Err(config_err(entry.line, format!("unknown key '{key}' in [{name}]")));
                }
            }
        }
        Ok(Reader { name, section })
    }

    fn check_sections(&self) -> Result<()> {
        for (name, s) in &self.sections {
            if !["model", "jumps", "plan", "experiment"].contains(&name.as_str()) {
                return Err(config_err(s.line, format!("unknown section [{name}]")));
            }
        }
        Ok(())
    }
}

struct Reader<'a> {
    name: &'a str,
    section: Option<&'a Section>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&Entry> {
        self.section.and_then(|s| s.entries.get(key))
    }

    fn header_line(&self) -> usize {
        self.section.map_or(0, |s| s.line)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|err| {
                config_err(e.line, format!("[{}] {key} = '{}': {err}", self.name, e.value))
            }),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?.ok_or_else(|| {
            config_err(self.header_line(), format!("[{}] missing required key '{key}'", self.name))
        })
    }

    fn list(&self, key: &str, sep: char) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.raw(key) else {
            return Ok(None);
        };
        e.value
            .split(sep)
            .map(|s| {
                s.trim().parse::<f64>().map_err(|err| {
                    config_err(e.line, format!("[{}] {key}: '{}' is not a number: {err}", self.name, s.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Symmetric matrix written row by row, `1, 0.5; 0.5, 1`, or a scalar.
    fn matrix(&self, key: &str, dim: usize) -> Result<Option<SymMatrix>> {
        let Some(e) = self.raw(key) else {
            return Ok(None);
        };
        let rows = e
            .value
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().map_err(|err| {
                            config_err(e.line, format!("[{}] {key}: '{}' is not a number: {err}", self.name, s.trim()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let m = if rows.len() == 1 && rows[0].len() == 1 && dim > 1 {
            SymMatrix::diagonal(&vec![rows[0][0]; dim])
        } else {
            SymMatrix::from_rows(&rows).map_err(|err| config_err(e.line, format!("[{}] {key}: {err}", self.name)))?
        };
        if m.dim() != dim {
            return Err(config_err(
                e.line,
                format!("[{}] {key} is {}x{}, model dim is {dim}", self.name, m.dim(), m.dim()),
            ));
        }
        Ok(Some(m))
    }

    fn vector(&self, key: &str, dim: usize, default: f64) -> Result<Vec<f64>> {
        match self.list(key, ',')? {
            None => Ok(vec![default; dim]),
            Some(v) if v.len() == 1 => Ok(vec![v[0]; dim]),
            Some(v) if v.len() == dim => Ok(v),
            Some(v) => Err(config_err(
                self.raw(key).map_or(0, |e| e.line),
                format!("[{}] {key} has {} entries, model dim is {dim}", self.name, v.len()),
            )),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.raw(key).map_or(self.header_line(), |e| e.line)
    }
}

fn parse_model(ini: &Ini) -> Result<ModelSpec> {
    let r = ini.reader(
        "model",
        &[
            "kind", "dim", "horizon", "n", "euler_substeps", "x0", "c", "drift", "a_rev", "sigma0", "lev",
            "season", "y_rev", "y_vol", "y0", "kappa", "vbar", "xi", "v0", "rho",
        ],
    )?;
    if !ini.has_section("model") {
        return Err(config_err(0, "missing [model] section"));
    }
    let kind_name: String = r.required("kind")?;
    let dim: usize = r.or("dim", 1)?;
    let kind_line = r.line_of("kind");
    let kind = match kind_name.as_str() {
        "constant_vol" => ModelKind::ConstantVol {
            c: r.matrix("c", dim)?.unwrap_or_else(|| SymMatrix::identity(dim)),
            drift: r.vector("drift", dim, 0.0)?,
        },
        "heston_type" => {
            let d = MarkovSv::default();
            ModelKind::HestonType(MarkovSv {
                a_rev: r.or("a_rev", d.a_rev)?,
                sigma0: r.or("sigma0", d.sigma0)?,
                lev: r.or("lev", d.lev)?,
                season: r.or("season", d.season)?,
                y_rev: r.or("y_rev", d.y_rev)?,
                y_vol: r.or("y_vol", d.y_vol)?,
                y0: r.or("y0", d.y0)?,
            })
        }
        "custom_cir_vol" => ModelKind::CustomCirVol(CirVol {
            kappa: r.required("kappa")?,
            vbar: r.required("vbar")?,
            xi: r.required("xi")?,
            v0: r.vector("v0", dim, 1.0)?,
            correlation: r.matrix("rho", dim)?.unwrap_or_else(|| SymMatrix::identity(dim)),
            drift: r.vector("drift", dim, 0.0)?,
        }),
        other => {
            return Err(config_err(
                kind_line,
                format!("unknown model kind '{other}' (expected constant_vol, heston_type or custom_cir_vol)"),
            ))
        }
    };
    let spec = ModelSpec {
        dim,
        kind,
        jumps: parse_jumps(ini)?,
        horizon: r.or("horizon", 1.0)?,
        n: r.required("n")?,
        euler_substeps: r.or("euler_substeps", 10)?,
        x0: r.vector("x0", dim, 0.0)?,
    };
    spec.validate()
        .map_err(|e| config_err(r.header_line(), format!("[model] {}", e.root())))?;
    Ok(spec)
}

fn parse_jumps(ini: &Ini) -> Result<Option<JumpSpec>> {
    if !ini.has_section("jumps") {
        return Ok(None);
    }
    let r = ini.reader("jumps", &["intensity", "distribution", "scale", "size"])?;
    let intensity: f64 = r.required("intensity")?;
    let dist: String = r.or("distribution", "gaussian".to_string())?;
    let sizes = match dist.as_str() {
        "gaussian" => JumpSizes::Gaussian {
            scale: r.required("scale")?,
        },
        "two_point" => JumpSizes::TwoPoint {
            size: r.required("size")?,
        },
        other => {
            return Err(config_err(
                r.line_of("distribution"),
                format!("unknown jump distribution '{other}' (expected gaussian or two_point)"),
            ))
        }
    };
    Ok(Some(JumpSpec { intensity, sizes }))
}

/// Reads the `[plan]` section; absent keys keep their defaults.
pub fn parse_plan(ini: &Ini) -> Result<TuningPlan> {
    let r = ini.reader("plan", &["gamma", "kappa", "varpi", "alpha", "trunc_scale", "theta"])?;
    let mut plan = TuningPlan::default();
    plan.window_exponent = r.or("gamma", plan.window_exponent)?;
    plan.window_const = r.or("kappa", plan.window_const)?;
    plan.theta = r.parse("theta")?;

    let varpi: String = r.or("varpi", DEFAULT_TRUNC_EXPONENT.to_string())?;
    plan.truncation = if varpi.eq_ignore_ascii_case("none") {
        Truncation::None
    } else {
        let exponent: f64 = varpi
            .parse()
            .map_err(|e| config_err(r.line_of("varpi"), format!("[plan] varpi = '{varpi}': {e}")))?;
        let scale_spec: String = r.or("trunc_scale", "bipower".to_string())?;
        let scale = match scale_spec.split_once(':') {
            None if scale_spec == "bipower" => TruncationScale::Bipower,
            Some(("fixed", v)) => TruncationScale::Fixed(v.trim().parse().map_err(|e| {
                config_err(r.line_of("trunc_scale"), format!("[plan] trunc_scale = '{scale_spec}': {e}"))
            })?),
            _ => {
                return Err(config_err(
                    r.line_of("trunc_scale"),
                    format!("[plan] trunc_scale must be 'bipower' or 'fixed:<value>', got '{scale_spec}'"),
                ))
            }
        };
        Truncation::Level {
            exponent,
            constant: r.or("alpha", DEFAULT_TRUNC_CONST)?,
            scale,
        }
    };
    plan.validate()
        .map_err(|e| config_err(r.header_line(), format!("[plan] {}", e.root())))?;
    Ok(plan)
}

fn parse_bool(r: &Reader, key: &str, default: bool) -> Result<bool> {
    match r.raw(key) {
        None => Ok(default),
        Some(e) => match e.value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(config_err(e.line, format!("[experiment] {key}: expected true/false, got '{other}'"))),
        },
    }
}

/// Parses a complete experiment configuration.
pub fn parse_experiment(text: &str) -> Result<ExperimentSpec> {
    let ini = Ini::parse(text)?;
    ini.check_sections()?;
    let model = parse_model(&ini)?;
    let plan = parse_plan(&ini)?;
    let r = ini.reader(
        "experiment",
        &[
            "functions", "estimators", "replications", "seed", "meshes", "ci_level", "border_correction",
            "out_dir", "workers",
        ],
    )?;

    let functions: Vec<String> = match r.raw("functions") {
        None => vec![if model.dim == 1 { "power:p=2" } else { "trace_power:q=2" }.to_string()],
        Some(e) => e
            .value
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect(),
    };
    for f in &functions {
        crate::testfn::parse_function(f, model.dim)
            .map_err(|e| config_err(r.line_of("functions"), format!("[experiment] functions: {e}")))?;
    }

    let estimators = match r.raw("estimators") {
        None => vec![EstimatorKind::CorrectedOverlapping],
        Some(e) => e
            .value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<EstimatorKind>()
                    .map_err(|err| config_err(e.line, format!("[experiment] estimators: {err}")))
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let meshes = match r.raw("meshes") {
        None => Vec::new(),
        Some(e) => e
            .value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0 && *v >= 3.0 && *v < u32::MAX as f64)
                    .map(|v| v as usize)
                    .ok_or_else(|| config_err(e.line, format!("[experiment] meshes: '{}' is not an integer n >= 3", s.trim())))
            })
            .collect::<Result<Vec<_>>>()?,
    };

    let spec = ExperimentSpec {
        model,
        plan,
        functions,
        estimators,
        replications: r.or("replications", 1)?,
        seed: r.or("seed", 0)?,
        meshes,
        ci_level: r.or("ci_level", 0.95)?,
        border_correction: parse_bool(&r, "border_correction", true)?,
        out_dir: r.parse::<PathBuf>("out_dir")?,
        workers: r.parse("workers")?,
    };
    spec.validate()
        .map_err(|e| config_err(r.header_line(), format!("[experiment] {}", e.root())))?;
    Ok(spec)
}

pub fn load_experiment(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(0, format!("cannot read {}: {e}", path.display())))?;
    parse_experiment(&text)
}

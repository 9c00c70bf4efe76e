//! Path simulation for Monte Carlo validation.
//!
//! An Euler scheme runs on a fine grid of `euler_substeps` steps per
//! observation interval. The observed path is recorded at the coarse grid and
//! the ground truth `V(g)_t = ∫ g(c_s) ds` is accumulated on the fine grid as
//! a left-point Riemann sum. Jumps are compound Poisson, so the jump part has
//! finite activity.

mod model;
mod rng;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

pub use model::{CirVol, JumpSizes, JumpSpec, MarkovSv, ModelKind, ModelSpec};
pub use rng::{rng_stream, SimRng};

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::spotvol::ObservationGrid;
use crate::testfn::FunctionRef;

/// One jump of the compound Poisson component.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub size: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Keep the spot covariance at every fine step in [`SimulatedPath::true_spot`].
    pub record_spot: bool,
}

#[derive(Debug, Clone)]
pub struct SimulatedPath {
    /// Observed path.
    pub grid: ObservationGrid,
    /// Observed path with the jumps removed.
    pub continuous_grid: ObservationGrid,
    /// Spot covariance at each fine step (empty unless requested).
    pub true_spot: Vec<SymMatrix>,
    /// `V(g)_t` on the fine grid, keyed by function name.
    pub truth: BTreeMap<String, f64>,
    pub jumps: Vec<JumpEvent>,
    pub seed: u64,
}

enum VolState {
    Constant {
        c: SymMatrix,
        sigma: Vec<f64>,
    },
    Markov {
        y: f64,
    },
    Cir {
        v: Vec<f64>,
        chol: Vec<f64>,
    },
}

fn draw_jumps(spec: &ModelSpec, rng: &mut SimRng) -> Vec<JumpEvent> {
    let Some(jumps) = spec.jumps else {
        return Vec::new();
    };
    if jumps.intensity == 0.0 {
        return Vec::new();
    }
    let exp = Exp::new(jumps.intensity).expect("positive intensity");
    let mut out = Vec::new();
    let mut t = exp.sample(rng);
    while t < spec.horizon {
        let size = (0..spec.dim)
            .map(|_| match jumps.sizes {
                JumpSizes::Gaussian { scale } => scale * rng.sample::<f64, _>(StandardNormal),
                JumpSizes::TwoPoint { size } => {
                    if rng.random::<bool>() {
                        size
                    } else {
                        -size
                    }
                }
            })
            .collect();
        out.push(JumpEvent { time: t, size });
        t += exp.sample(rng);
    }
    out
}

/// Simulates one path with the replication-0 stream of `seed`.
pub fn simulate(spec: &ModelSpec, seed: u64, functions: &[FunctionRef]) -> Result<SimulatedPath> {
    let mut rng = rng_stream(seed, 0);
    simulate_with_rng(spec, &mut rng, seed, functions, SimOptions::default())
}

/// Simulates one path from an explicit generator.
pub fn simulate_with_rng(
    spec: &ModelSpec,
    rng: &mut SimRng,
    seed: u64,
    functions: &[FunctionRef],
    options: SimOptions,
) -> Result<SimulatedPath> {
    spec.validate()?;
    if let Some(g) = functions.iter().find(|g| g.dim() != spec.dim) {
        return Err(Error::Dimension(format!(
            "truth function {} has dimension {}, model has {}",
            g.name(),
            g.dim(),
            spec.dim
        )));
    }
    let d = spec.dim;
    let n = spec.n;
    let m = spec.euler_substeps;
    let h = spec.mesh() / m as f64;
    let sqrt_h = h.sqrt();

    let jumps = draw_jumps(spec, rng);
    let mut next_jump = 0;

    let mut state = match &spec.kind {
        ModelKind::ConstantVol { c, .. } => VolState::Constant {
            sigma: c.cholesky()?,
            c: c.clone(),
        },
        ModelKind::HestonType(sv) => VolState::Markov { y: sv.y0 },
        ModelKind::CustomCirVol(cir) => VolState::Cir {
            v: cir.v0.clone(),
            chol: cir.correlation.cholesky()?,
        },
    };
    let drift: Vec<f64> = match &spec.kind {
        ModelKind::ConstantVol { drift, .. } => drift.clone(),
        ModelKind::CustomCirVol(cir) => cir.drift.clone(),
        ModelKind::HestonType(_) => vec![0.0],
    };

    let mut x = spec.x0.clone();
    let mut cum_jump = vec![0.0; d];
    let mut observed = Vec::with_capacity((n + 1) * d);
    let mut continuous = Vec::with_capacity((n + 1) * d);
    observed.extend_from_slice(&x);
    continuous.extend_from_slice(&x);

    let mut truth_sums = vec![0.0; functions.len()];
    let mut true_spot = Vec::new();
    let mut c = SymMatrix::zeros(d);
    let mut sigma = vec![0.0; d * d];
    let mut z = vec![0.0; d];
    let mut sqrt_v = vec![0.0; d];

    for step in 0..n * m {
        let t = step as f64 * h;

        // spot covariance and its factor at the left point
        match &state {
            VolState::Constant { c: c0, sigma: s0 } => {
                if step == 0 {
                    c = c0.clone();
                    sigma.copy_from_slice(s0);
                }
            }
            VolState::Markov { y } => {
                let ModelKind::HestonType(sv) = &spec.kind else {
                    unreachable!()
                };
                let f = sv.vol_map(t, x[0], *y);
                c.set(0, 0, f * f);
                sigma[0] = f;
            }
            VolState::Cir { v, chol } => {
                let ModelKind::CustomCirVol(cir) = &spec.kind else {
                    unreachable!()
                };
                for (s, &vj) in sqrt_v.iter_mut().zip(v) {
                    *s = vj.max(0.0).sqrt();
                }
                for j in 0..d {
                    for k in j..d {
                        c.set(j, k, sqrt_v[j] * sqrt_v[k] * cir.correlation.get(j, k));
                    }
                    for p in 0..d {
                        sigma[j * d + p] = sqrt_v[j] * chol[j * d + p];
                    }
                }
            }
        }
        if (0..d).any(|j| !(c.get(j, j) >= 0.0)) {
            return Err(Error::Numerical(format!(
                "non-PSD volatility at fine step {step}: {c:?}"
            )));
        }

        for (sum, g) in truth_sums.iter_mut().zip(functions) {
            *sum += g.value(&c) * h;
        }
        if options.record_spot {
            true_spot.push(c.clone());
        }

        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        let a_x = match &spec.kind {
            ModelKind::HestonType(sv) => vec![-sv.a_rev * x[0]],
            _ => Vec::new(),
        };
        for j in 0..d {
            let mut dx = if a_x.is_empty() { drift[j] * h } else { a_x[j] * h };
            for p in 0..=j {
                dx += sigma[j * d + p] * z[p] * sqrt_h;
            }
            x[j] += dx;
        }
        while next_jump < jumps.len() && jumps[next_jump].time < t + h {
            for j in 0..d {
                x[j] += jumps[next_jump].size[j];
                cum_jump[j] += jumps[next_jump].size[j];
            }
            next_jump += 1;
        }

        match &mut state {
            VolState::Constant { .. } => {}
            VolState::Markov { y } => {
                let ModelKind::HestonType(sv) = &spec.kind else {
                    unreachable!()
                };
                let zbar: f64 = rng.sample(StandardNormal);
                *y += -sv.y_rev * *y * h + sv.y_vol * sqrt_h * zbar;
            }
            VolState::Cir { v, .. } => {
                let ModelKind::CustomCirVol(cir) = &spec.kind else {
                    unreachable!()
                };
                for vj in v.iter_mut() {
                    let zbar: f64 = rng.sample(StandardNormal);
                    let vp = vj.max(0.0);
                    *vj += cir.kappa * (cir.vbar - vp) * h + cir.xi * vp.sqrt() * sqrt_h * zbar;
                }
            }
        }

        if (step + 1) % m == 0 {
            observed.extend_from_slice(&x);
            continuous.extend(x.iter().zip(&cum_jump).map(|(xi, ji)| xi - ji));
        }
    }

    let mesh = spec.mesh();
    let truth = functions
        .iter()
        .zip(truth_sums)
        .map(|(g, v)| (g.name(), v))
        .collect();
    Ok(SimulatedPath {
        grid: ObservationGrid::new(d, mesh, observed)?,
        continuous_grid: ObservationGrid::new(d, mesh, continuous)?,
        true_spot,
        truth,
        jumps,
        seed,
    })
}

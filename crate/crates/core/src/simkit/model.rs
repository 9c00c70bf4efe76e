//! Model classes for simulation.

use crate::error::{Error, Result};
use crate::matcore::{is_psd, SymMatrix};

/// Stochastic-volatility model `dX = a(X)dt + f(t,X,Y)dW`, `dY = −y_rev·Y dt + y_vol dW̄`
/// with independent `W`, `W̄`, and
/// `f(t,x,y) = σ₀·exp(y)·(1 + lev·tanh x)·(1 + season·sin 2πt)`, `a(x) = −a_rev·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSv {
    pub a_rev: f64,
    pub sigma0: f64,
    pub lev: f64,
    pub season: f64,
    pub y_rev: f64,
    pub y_vol: f64,
    pub y0: f64,
}

impl Default for MarkovSv {
    fn default() -> Self {
        MarkovSv {
            a_rev: 0.0,
            sigma0: 1.0,
            lev: 0.0,
            season: 0.0,
            y_rev: 1.0,
            y_vol: 0.3,
            y0: 0.0,
        }
    }
}

impl MarkovSv {
    /// `f(t, x, y)`.
    #[inline]
    pub fn vol_map(&self, t: f64, x: f64, y: f64) -> f64 {
        self.sigma0
            * y.exp()
            * (1.0 + self.lev * x.tanh())
            * (1.0 + self.season * (2.0 * std::f64::consts::PI * t).sin())
    }
}

/// Square-root (CIR) variance per component, `dv = κ(v̄ − v)dt + ξ√v dB`,
/// combined through a fixed correlation matrix: `c = D^{1/2} R D^{1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirVol {
    pub kappa: f64,
    pub vbar: f64,
    pub xi: f64,
    pub v0: Vec<f64>,
    pub correlation: SymMatrix,
    pub drift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    ConstantVol { c: SymMatrix, drift: Vec<f64> },
    HestonType(MarkovSv),
    CustomCirVol(CirVol),
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::ConstantVol { .. } => "constant_vol",
            ModelKind::HestonType(_) => "heston_type",
            ModelKind::CustomCirVol(_) => "custom_cir_vol",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpSizes {
    /// Each component `N(0, scale²)`.
    Gaussian { scale: f64 },
    /// Each component `±size` with equal probability.
    TwoPoint { size: f64 },
}

/// Compound-Poisson jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSpec {
    pub intensity: f64,
    pub sizes: JumpSizes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub dim: usize,
    pub kind: ModelKind,
    pub jumps: Option<JumpSpec>,
    pub horizon: f64,
    /// Coarse observation count `n`; the mesh is `horizon / n`.
    pub n: usize,
    pub euler_substeps: usize,
    pub x0: Vec<f64>,
}

impl ModelSpec {
    /// Constant spot covariance `c`, no drift, no jumps, `t = 1`.
    pub fn constant(c: SymMatrix, n: usize) -> Self {
        let dim = c.dim();
        ModelSpec {
            dim,
            kind: ModelKind::ConstantVol {
                c,
                drift: vec![0.0; dim],
            },
            jumps: None,
            horizon: 1.0,
            n,
            euler_substeps: 10,
            x0: vec![0.0; dim],
        }
    }

    /// One-dimensional CIR variance, `t = 1`.
    pub fn cir(kappa: f64, vbar: f64, xi: f64, v0: f64, n: usize) -> Self {
        ModelSpec {
            dim: 1,
            kind: ModelKind::CustomCirVol(CirVol {
                kappa,
                vbar,
                xi,
                v0: vec![v0],
                correlation: SymMatrix::identity(1),
                drift: vec![0.0],
            }),
            jumps: None,
            horizon: 1.0,
            n,
            euler_substeps: 10,
            x0: vec![0.0],
        }
    }

    pub fn with_jumps(mut self, jumps: JumpSpec) -> Self {
        self.jumps = Some(jumps);
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_substeps(mut self, m: usize) -> Self {
        self.euler_substeps = m;
        self
    }

    pub fn mesh(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Input(m));
        if self.dim == 0 {
            return bad("model dimension must be positive".into());
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.n < 3 {
            return bad(format!("n must be at least 3, got {}", self.n));
        }
        if self.euler_substeps == 0 {
            return bad("euler_substeps must be at least 1".into());
        }
        if self.x0.len() != self.dim {
            return bad(format!("x0 has {} components, expected {}", self.x0.len(), self.dim));
        }
        match &self.kind {
            ModelKind::ConstantVol { c, drift } => {
                if c.dim() != self.dim || drift.len() != self.dim {
                    return Err(Error::Dimension("constant_vol c/drift do not match dim".into()));
                }
                if !is_psd(c, 0.0) {
                    return bad(format!("constant_vol c is not positive semidefinite: {c:?}"));
                }
            }
            ModelKind::HestonType(sv) => {
                if self.dim != 1 {
                    return Err(Error::Dimension("heston_type is one-dimensional".into()));
                }
                if sv.lev.abs() >= 1.0 || sv.season.abs() >= 1.0 {
                    return bad("heston_type needs |lev| < 1 and |season| < 1".into());
                }
                if !(sv.sigma0 > 0.0) || sv.y_rev < 0.0 || sv.y_vol < 0.0 || sv.a_rev < 0.0 {
                    return bad("heston_type needs sigma0 > 0 and nonnegative a_rev, y_rev, y_vol".into());
                }
            }
            ModelKind::CustomCirVol(cir) => {
                if cir.v0.len() != self.dim
                    || cir.drift.len() != self.dim
                    || cir.correlation.dim() != self.dim
                {
                    return Err(Error::Dimension("custom_cir_vol v0/drift/rho do not match dim".into()));
                }
                if !(cir.kappa > 0.0 && cir.vbar > 0.0 && cir.xi >= 0.0) {
                    return bad("custom_cir_vol needs kappa > 0, vbar > 0, xi >= 0".into());
                }
                if cir.v0.iter().any(|&v| !(v > 0.0)) {
                    return bad("custom_cir_vol needs positive v0".into());
                }
                let r = &cir.correlation;
                if (0..self.dim).any(|j| r.get(j, j) != 1.0) || !is_psd(r, 1e-12) {
                    return bad("correlation must have unit diagonal and be PSD".into());
                }
            }
        }
        if let Some(j) = &self.jumps {
            if !(j.intensity.is_finite() && j.intensity >= 0.0) {
                return bad(format!("jump intensity must be nonnegative, got {}", j.intensity));
            }
            let scale = match j.sizes {
                JumpSizes::Gaussian { scale } => scale,
                JumpSizes::TwoPoint { size } => size,
            };
            if !(scale.is_finite() && scale >= 0.0) {
                return bad(format!("jump size must be nonnegative, got {scale}"));
            }
        }
        Ok(())
    }
}

//! Test functions `g` on symmetric matrices, with first and second
//! derivatives.
//!
//! Derivative convention: `x^{jk}` and `x^{kj}` are one coordinate, and the
//! gradient is split evenly between the two ordered positions so that
//!
//! ```text
//! g(x + ε) ≈ g(x) + Σ_{j,k} ∂_{jk}g(x) ε^{jk}
//! ```
//!
//! holds with the full double sum over ordered pairs, for symmetric `ε`.
//! The Hessian follows the same rule and carries all three index symmetries.
//! Every contraction in the estimators sums over all `d⁴` ordered tuples, so
//! any half-counting convention here would silently halve the bias
//! correction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matcore::{SymMatrix, Tensor4};

/// A function `g: 𝓜⁺_d → ℝ` with analytic first and second derivatives.
pub trait TestFunction: Send + Sync + fmt::Debug {
    /// Canonical `kind:param=value,…` name, parseable by [`parse_function`].
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    /// Exponent `p` of the growth bound `‖∂ʲg(x)‖ ≤ K(1+‖x‖^{p−j})`.
    fn growth_order(&self) -> f64;

    /// False when `g` is only smooth on the interior of the PSD cone.
    fn smooth_on_boundary(&self) -> bool {
        true
    }

    /// Whether `g ≥ 0` on the PSD cone.
    fn nonnegative(&self) -> bool;

    /// `Some(p)` when `g(x) = x^p` in one dimension.
    fn power_exponent(&self) -> Option<f64> {
        None
    }

    fn value(&self, x: &SymMatrix) -> f64;

    /// `∂_{jk} g(x)`.
    fn gradient(&self, x: &SymMatrix) -> Result<SymMatrix>;

    /// `∂²_{jk,lm} g(x)`.
    fn hessian(&self, x: &SymMatrix) -> Result<Tensor4>;

    /// `Σ_{j,k,l,m} ∂²_{jk,lm}g(x)·(x^{jl}x^{km} + x^{jm}x^{kl})`, the quadratic
    /// form in the bias correction.
    fn correction_form(&self, x: &SymMatrix) -> Result<f64> {
        Ok(self.hessian(x)?.contract_covariance_form(x))
    }

    /// `h̄(x) = Σ_{j,k,l,m} ∂_{jk}g ∂_{lm}g (x^{jl}x^{km} + x^{jm}x^{kl})`.
    ///
    /// For symmetric `G = ∂g(x)` both halves equal `trace(G x G x)`.
    fn avar_integrand(&self, x: &SymMatrix) -> Result<f64> {
        let grad = self.gradient(x)?;
        let gx = grad.matmul(x);
        Ok(2.0 * trace_of_square(&gx, x.dim()))
    }
}

/// Shared handle to a test function.
pub type FunctionRef = Arc<dyn TestFunction>;

/// `trace(A·A)` for a row-major (not necessarily symmetric) `A`.
fn trace_of_square(a: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..d {
        for k in 0..d {
            s += a[j * d + k] * a[k * d + j];
        }
    }
    s
}

/// Unit "coordinate" matrix for entry `(a,b)` under the split convention:
/// 1 on the diagonal, ½ at both `(a,b)` and `(b,a)` otherwise.
pub fn coordinate_matrix(dim: usize, a: usize, b: usize) -> SymMatrix {
    let mut m = SymMatrix::zeros(dim);
    if a == b {
        m.set(a, a, 1.0);
    } else {
        m.set(a, b, 0.5);
    }
    m
}

fn check_index(dim: usize, idx: &[usize]) -> Result<()> {
    if let Some(&i) = idx.iter().find(|&&i| i >= dim) {
        return Err(Error::Input(format!(
            "entry index {i} out of range for dimension {dim}"
        )));
    }
    Ok(())
}

/// `g(x) = x^{ab}`.
#[derive(Debug, Clone)]
pub struct IdentityComponent {
    dim: usize,
    a: usize,
    b: usize,
}

impl IdentityComponent {
    pub fn new(dim: usize, a: usize, b: usize) -> Result<Self> {
        check_index(dim, &[a, b])?;
        Ok(IdentityComponent { dim, a, b })
    }
}

impl TestFunction for IdentityComponent {
    fn name(&self) -> String {
        format!("identity:a={},b={}", self.a, self.b)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn growth_order(&self) -> f64 {
        1.0
    }
    fn nonnegative(&self) -> bool {
        self.a == self.b
    }
    fn value(&self, x: &SymMatrix) -> f64 {
        x.get(self.a, self.b)
    }
    fn gradient(&self, _x: &SymMatrix) -> Result<SymMatrix> {
        Ok(coordinate_matrix(self.dim, self.a, self.b))
    }
    fn hessian(&self, _x: &SymMatrix) -> Result<Tensor4> {
        Ok(Tensor4::zeros(self.dim))
    }
    fn correction_form(&self, _x: &SymMatrix) -> Result<f64> {
        Ok(0.0)
    }
    fn avar_integrand(&self, x: &SymMatrix) -> Result<f64> {
        let (a, b) = (self.a, self.b);
        Ok(x.get(a, a) * x.get(b, b) + x.get(a, b) * x.get(a, b))
    }
}

/// `g(x) = x^p` for `d = 1`, `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct Power {
    p: f64,
}

impl Power {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Input(format!("power exponent must be positive, got {p}")));
        }
        Ok(Power { p })
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    fn is_integer(&self) -> bool {
        self.p.fract() == 0.0
    }
}

/// `coef · x^e`, with an exact zero when `coef == 0` (avoids `0·∞` at `x = 0`).
#[inline]
fn monomial(coef: f64, x: f64, e: f64) -> f64 {
    if coef == 0.0 {
        0.0
    } else if e == 0.0 {
        coef
    } else if e == 1.0 {
        coef * x
    } else if e == 2.0 {
        coef * x * x
    } else {
        coef * x.powf(e)
    }
}

impl TestFunction for Power {
    fn name(&self) -> String {
        format!("power:p={}", self.p)
    }
    fn dim(&self) -> usize {
        1
    }
    fn growth_order(&self) -> f64 {
        self.p
    }
    /// Integer powers are polynomials; `x^p` with non-integer `p < 3` is not
    /// `C³` at the origin.
    fn smooth_on_boundary(&self) -> bool {
        self.is_integer() || self.p >= 3.0
    }
    fn nonnegative(&self) -> bool {
        true
    }
    fn power_exponent(&self) -> Option<f64> {
        Some(self.p)
    }
    fn value(&self, x: &SymMatrix) -> f64 {
        monomial(1.0, x.get(0, 0), self.p)
    }
    fn gradient(&self, x: &SymMatrix) -> Result<SymMatrix> {
        Ok(SymMatrix::scalar(monomial(self.p, x.get(0, 0), self.p - 1.0)))
    }
    fn hessian(&self, x: &SymMatrix) -> Result<Tensor4> {
        let mut t = Tensor4::zeros(1);
        t.set(0, 0, 0, 0, monomial(self.p * (self.p - 1.0), x.get(0, 0), self.p - 2.0));
        Ok(t)
    }
    fn correction_form(&self, x: &SymMatrix) -> Result<f64> {
        Ok(monomial(2.0 * self.p * (self.p - 1.0), x.get(0, 0), self.p))
    }
    fn avar_integrand(&self, x: &SymMatrix) -> Result<f64> {
        Ok(monomial(2.0 * self.p * self.p, x.get(0, 0), 2.0 * self.p))
    }
}

/// `g(x) = trace(x^q)`, integer `q ≥ 1`, any dimension.
#[derive(Debug, Clone)]
pub struct TracePower {
    dim: usize,
    q: usize,
}

impl TracePower {
    pub fn new(dim: usize, q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::Input("trace_power needs q >= 1".into()));
        }
        Ok(TracePower { dim, q })
    }
}

impl TestFunction for TracePower {
    fn name(&self) -> String {
        format!("trace_power:q={}", self.q)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn growth_order(&self) -> f64 {
        self.q as f64
    }
    fn nonnegative(&self) -> bool {
        true
    }
    fn value(&self, x: &SymMatrix) -> f64 {
        if self.q == 1 {
            return x.trace();
        }
        let half = x.powers(self.q.div_ceil(2));
        let lo = &half[self.q / 2];
        let hi = &half[self.q.div_ceil(2)];
        // trace(A·B) for symmetric A, B
        lo.as_slice().iter().zip(hi.as_slice()).map(|(a, b)| a * b).sum()
    }
    fn gradient(&self, x: &SymMatrix) -> Result<SymMatrix> {
        Ok(x.powers(self.q - 1)[self.q - 1].scaled(self.q as f64))
    }
    /// `∂²_{jk,lm} = q Σ_{r=0}^{q−2} (x^r)^{kl} (x^{q−2−r})^{mj}`, symmetrized.
    fn hessian(&self, x: &SymMatrix) -> Result<Tensor4> {
        let d = self.dim;
        let mut t = Tensor4::zeros(d);
        if self.q < 2 {
            return Ok(t);
        }
        let pw = x.powers(self.q - 2);
        let qf = self.q as f64;
        for r in 0..=(self.q - 2) {
            let (a, b) = (&pw[r], &pw[self.q - 2 - r]);
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        for m in 0..d {
                            let v = t.get(j, k, l, m) + qf * a.get(k, l) * b.get(m, j);
                            t.set(j, k, l, m, v);
                        }
                    }
                }
            }
        }
        Ok(t.symmetrized())
    }
    /// `q Σ_{r=0}^{q−2} [trace(x^q) + trace(x^{r+1}) trace(x^{q−1−r})]`.
    fn correction_form(&self, x: &SymMatrix) -> Result<f64> {
        if self.q < 2 {
            return Ok(0.0);
        }
        let pw = x.powers(self.q);
        let tr: Vec<f64> = pw.iter().map(SymMatrix::trace).collect();
        let sum: f64 = (0..=(self.q - 2))
            .map(|r| tr[self.q] + tr[r + 1] * tr[self.q - 1 - r])
            .sum();
        Ok(self.q as f64 * sum)
    }
}

/// `g(x) = x^{ab}·x^{ef}`.
#[derive(Debug, Clone)]
pub struct EntryProduct {
    dim: usize,
    a: usize,
    b: usize,
    e: usize,
    f: usize,
}

impl EntryProduct {
    pub fn new(dim: usize, a: usize, b: usize, e: usize, f: usize) -> Result<Self> {
        check_index(dim, &[a, b, e, f])?;
        Ok(EntryProduct { dim, a, b, e, f })
    }
}

impl TestFunction for EntryProduct {
    fn name(&self) -> String {
        format!(
            "entry_product:a={},b={},e={},f={}",
            self.a, self.b, self.e, self.f
        )
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn growth_order(&self) -> f64 {
        2.0
    }
    fn nonnegative(&self) -> bool {
        let same = (self.a, self.b) == (self.e, self.f) || (self.a, self.b) == (self.f, self.e);
        same || (self.a == self.b && self.e == self.f)
    }
    fn value(&self, x: &SymMatrix) -> f64 {
        x.get(self.a, self.b) * x.get(self.e, self.f)
    }
    fn gradient(&self, x: &SymMatrix) -> Result<SymMatrix> {
        let mut g = coordinate_matrix(self.dim, self.a, self.b).scaled(x.get(self.e, self.f));
        g.add_scaled(
            &coordinate_matrix(self.dim, self.e, self.f),
            x.get(self.a, self.b),
        );
        Ok(g)
    }
    fn hessian(&self, _x: &SymMatrix) -> Result<Tensor4> {
        let s1 = coordinate_matrix(self.dim, self.a, self.b);
        let s2 = coordinate_matrix(self.dim, self.e, self.f);
        let mut t = Tensor4::zeros(self.dim);
        t.add_outer(&s1, &s2, 1.0);
        t.add_outer(&s2, &s1, 1.0);
        Ok(t)
    }
    /// `4·trace(S_{ab} x S_{ef} x)`.
    fn correction_form(&self, x: &SymMatrix) -> Result<f64> {
        let s1 = coordinate_matrix(self.dim, self.a, self.b).matmul(x);
        let s2 = coordinate_matrix(self.dim, self.e, self.f).matmul(x);
        let d = self.dim;
        let mut tr = 0.0;
        for j in 0..d {
            for k in 0..d {
                tr += s1[j * d + k] * s2[k * d + j];
            }
        }
        Ok(4.0 * tr)
    }
}

/// The asymptotic-variance integrand `h̄` of another function, exposed as a
/// test function. Only evaluation is supported.
#[derive(Debug, Clone)]
pub struct AvarFunction {
    inner: FunctionRef,
}

impl TestFunction for AvarFunction {
    fn name(&self) -> String {
        format!("avar({})", self.inner.name())
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn growth_order(&self) -> f64 {
        (2.0 * self.inner.growth_order() - 2.0).max(0.0)
    }
    fn smooth_on_boundary(&self) -> bool {
        self.inner.smooth_on_boundary()
    }
    fn nonnegative(&self) -> bool {
        true
    }
    fn value(&self, x: &SymMatrix) -> f64 {
        self.inner.avar_integrand(x).unwrap_or(f64::NAN)
    }
    fn gradient(&self, _x: &SymMatrix) -> Result<SymMatrix> {
        Err(Error::Unsupported(format!("gradient of {}", self.name())))
    }
    fn hessian(&self, _x: &SymMatrix) -> Result<Tensor4> {
        Err(Error::Unsupported(format!("hessian of {}", self.name())))
    }
    fn correction_form(&self, _x: &SymMatrix) -> Result<f64> {
        Err(Error::Unsupported(format!("bias correction of {}", self.name())))
    }
    fn avar_integrand(&self, _x: &SymMatrix) -> Result<f64> {
        Err(Error::Unsupported(format!("avar of {}", self.name())))
    }
}

/// `h̄` for `g`, as an evaluation-only test function.
pub fn avar_function(g: &FunctionRef) -> FunctionRef {
    Arc::new(AvarFunction { inner: g.clone() })
}

/// Checks that `x` lies where `g` is smooth.
pub fn check_domain(g: &dyn TestFunction, x: &SymMatrix) -> std::result::Result<(), String> {
    if x.dim() != g.dim() {
        return Err(format!(
            "dimension {} does not match function dimension {}",
            x.dim(),
            g.dim()
        ));
    }
    if !g.smooth_on_boundary() {
        let lam = x.min_eigenvalue();
        if !(lam > 0.0) {
            return Err(format!(
                "smallest eigenvalue {lam} is not positive and the function is only smooth on the interior"
            ));
        }
    }
    Ok(())
}

/// Value, gradient and Hessian of `g` at `x`.
pub fn eval_with_derivatives(g: &dyn TestFunction, x: &SymMatrix) -> Result<(f64, SymMatrix, Tensor4)> {
    check_domain(g, x).map_err(|reason| Error::Domain {
        function: g.name(),
        index: 0,
        reason,
    })?;
    let v = g.value(x);
    let grad = g.gradient(x)?;
    let hess = g.hessian(x)?;
    if !v.is_finite() || !grad.is_finite() || hess.as_slice().iter().any(|h| !h.is_finite()) {
        return Err(Error::NonFinite(format!("{} at {:?}", g.name(), x)));
    }
    Ok((v, grad, hess))
}

/// Symmetric perturbation direction for coordinate `(j,k)`.
fn direction(dim: usize, j: usize, k: usize) -> SymMatrix {
    let mut e = SymMatrix::zeros(dim);
    e.set(j, k, 1.0);
    e
}

/// Max mixed relative error `|fd − exact| / max(|exact|, 1)` between central
/// finite differences and the analytic gradient and Hessian.
///
/// Off-diagonal coordinates are perturbed at `(j,k)` and `(k,j)` together,
/// so the difference quotient there estimates `2·∂_{jk}g`.
pub fn check_derivatives(g: &dyn TestFunction, x: &SymMatrix, h: f64) -> Result<f64> {
    let d = x.dim();
    let grad = g.gradient(x)?;
    let hess = g.hessian(x)?;
    let rel = |fd: f64, exact: f64| (fd - exact).abs() / exact.abs().max(1.0);
    let mut worst: f64 = 0.0;
    for l in 0..d {
        for m in l..d {
            let e = direction(d, l, m);
            let plus = &x.clone() + &e.scaled(h);
            let minus = &x.clone() - &e.scaled(h);
            let mult = if l == m { 1.0 } else { 2.0 };
            let fd = (g.value(&plus) - g.value(&minus)) / (2.0 * h * mult);
            worst = worst.max(rel(fd, grad.get(l, m)));
            let gp = g.gradient(&plus)?;
            let gm = g.gradient(&minus)?;
            for j in 0..d {
                for k in 0..d {
                    let fd2 = (gp.get(j, k) - gm.get(j, k)) / (2.0 * h * mult);
                    worst = worst.max(rel(fd2, hess.get(j, k, l, m)));
                }
            }
        }
    }
    Ok(worst)
}

/// `m_q = E|N(0,1)|^q = 2^{q/2} Γ((q+1)/2) / √π`.
pub fn gaussian_abs_moment(q: f64) -> f64 {
    assert!(q >= 0.0, "absolute moment order must be nonnegative");
    2f64.powf(q / 2.0) * libm::tgamma((q + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

fn parse_params(kind: &str, body: &str) -> Result<Vec<(String, String)>> {
    if body.trim().is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                Error::Input(format!("{kind}: expected key=value, got '{kv}'"))
            })?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn param<T: std::str::FromStr>(kind: &str, params: &[(String, String)], key: &str) -> Result<T> {
    let raw = params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v)
        .ok_or_else(|| Error::Input(format!("{kind}: missing parameter '{key}'")))?;
    raw.parse()
        .map_err(|_| Error::Input(format!("{kind}: cannot parse {key}='{raw}'")))
}

/// Parses a built-in by name, e.g. `power:p=2`, `trace_power:q=2`,
/// `identity:a=0,b=1`, `entry_product:a=0,b=0,e=1,f=1`. Indices are 0-based.
pub fn parse_function(spec: &str, dim: usize) -> Result<FunctionRef> {
    let (kind, body) = spec.split_once(':').unwrap_or((spec, ""));
    let kind = kind.trim();
    let params = parse_params(kind, body)?;
    let allowed: &[&str] = match kind {
        "identity" => &["a", "b"],
        "power" => &["p"],
        "trace_power" => &["q"],
        "entry_product" => &["a", "b", "e", "f"],
        other => return Err(Error::Input(format!("unknown test function '{other}'"))),
    };
    if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(Error::Input(format!("{kind}: unknown parameter '{k}'")));
    }
    let f: FunctionRef = match kind {
        "identity" => Arc::new(IdentityComponent::new(
            dim,
            param(kind, &params, "a")?,
            param(kind, &params, "b")?,
        )?),
        "power" => {
            if dim != 1 {
                return Err(Error::Dimension(format!("power is one-dimensional, data has d={dim}")));
            }
            Arc::new(Power::new(param(kind, &params, "p")?)?)
        }
        "trace_power" => Arc::new(TracePower::new(dim, param(kind, &params, "q")?)?),
        _ => Arc::new(EntryProduct::new(
            dim,
            param(kind, &params, "a")?,
            param(kind, &params, "b")?,
            param(kind, &params, "e")?,
            param(kind, &params, "f")?,
        )?),
    };
    Ok(f)
}

//! Residual checks of candidate solutions.
//!
//! Everything here uses its own adaptive Simpson quadrature, independent of
//! the Gauss rule inside the step solver.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json;
use crate::logpower::LogPowerPolynomial;
use crate::model::{sector_index, BivariatePolynomial, Polynomial, ProblemSpec};
use crate::scalar::Real;
use crate::stepsolver::{Evaluable, FnEval};

pub const SIMPSON_TOLERANCE: f64 = 1e-12;
const MAX_DEPTH: u32 = 40;

fn simpson_step(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn simpson_recursive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson_step(f, a, fa, m, fm);
    let (rm, frm, right) = simpson_step(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_recursive(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_recursive(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol` (scaled by the
/// magnitude of the first estimate when that exceeds one).
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a > b {
        return Err(Error::Domain(format!("integration limits reversed: {a} > {b}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let (fa, fb) = (f(a), f(b));
    let (_, _, whole) = simpson_step(&f, a, fa, b, fb);
    let tol = tol * whole.abs().max(1.0);
    // Four initial panels so that integrands vanishing at the probe points
    // are not mistaken for zero.
    let quarter = (b - a) / 4.0;
    let mut total = 0.0;
    for k in 0..4 {
        let (lo, hi) = (a + k as f64 * quarter, if k == 3 { b } else { a + (k + 1) as f64 * quarter });
        let (flo, fhi) = (f(lo), f(hi));
        let (pm, fpm, s) = simpson_step(&f, lo, flo, hi, fhi);
        total += simpson_recursive(&f, lo, flo, hi, fhi, pm, fpm, s, 0.25 * tol, MAX_DEPTH);
    }
    Ok(total)
}

/// `∫ₐᵇ g` where `g` may have an integrable singularity at `a`; substitutes
/// `s = a + (b−a)u²` so the integrand carries a vanishing Jacobian there.
pub fn integrate_singular_start(g: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    if a > b {
        return Err(Error::Domain(format!("integration limits reversed: {a} > {b}")));
    }
    let w = b - a;
    adaptive_simpson(
        |u| {
            if u == 0.0 {
                0.0
            } else {
                g(a + w * u * u) * 2.0 * w * u
            }
        },
        0.0,
        1.0,
        SIMPSON_TOLERANCE,
    )
}

fn check_time<X: Evaluable + ?Sized>(x: &X, t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("residuals are evaluated for t > 0, got {t}")));
    }
    let end = x.domain_end();
    if t > end * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("t = {t} lies beyond the solution's domain end {end}")));
    }
    Ok(())
}

/// `Σᵢ ∫_{αᵢ₋₁(t)}^{αᵢ(t)} kernels[i](t,s) x(s) ds`.
fn sector_integrals<X: Evaluable + ?Sized>(
    spec: &ProblemSpec,
    kernels: &[BivariatePolynomial],
    x: &X,
    t: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for (i, k) in kernels.iter().enumerate() {
        if k.is_zero() {
            continue;
        }
        let (lo, hi) = spec.sector_bounds(i, t);
        let integrand = |s: f64| k.eval(t, s) * x.value(s);
        sum += if i == 0 {
            integrate_singular_start(integrand, 0.0, hi)?
        } else {
            adaptive_simpson(integrand, lo, hi, SIMPSON_TOLERANCE)?
        };
    }
    Ok(sum)
}

/// `a·K₁(t,0) + Σ ∫ Kᵢ x − f(t)`.
pub fn residual_eq3<X: Evaluable + ?Sized>(spec: &ProblemSpec, a: f64, x: &X, t: f64) -> Result<f64> {
    check_time(x, t)?;
    let singular = a * spec.kernels()[0].eval(t, 0.0);
    Ok(singular + sector_integrals(spec, spec.kernels(), x, t)? - spec.rhs().eval(t))
}

/// `F(x)(t) = K_n(t,t)x(t) + Σ αᵢ′(Kᵢ−Kᵢ₊₁)(t,αᵢ) x(αᵢ) + Σ ∫ ∂ₜKᵢ x`.
pub fn operator_f<X: Evaluable + ?Sized>(spec: &ProblemSpec, x: &X, t: f64) -> Result<f64> {
    check_time(x, t)?;
    let mut sum = spec.diagonal().eval(t) * x.value(t);
    for (b, w) in spec.boundaries().iter().zip(spec.jump_weights()) {
        sum += w.eval(t) * x.value(b.eval(t));
    }
    Ok(sum + sector_integrals(spec, spec.kernel_dt(), x, t)?)
}

/// `F(x)(t) − (f′(t) − ∂ₜK₁(t,0)·f(0)/K₁(0,0))`.
pub fn residual_operator_f<X: Evaluable + ?Sized>(spec: &ProblemSpec, x: &X, t: f64) -> Result<f64> {
    Ok(operator_f(spec, x, t)? - spec.regular_rhs()?.eval(t))
}

/// `x(t) + Ax + Kx − f̄(t)`.
pub fn residual_eq6<X: Evaluable + ?Sized>(spec: &ProblemSpec, x: &X, t: f64) -> Result<f64> {
    let diag = spec.diagonal().eval(t);
    if diag == 0.0 {
        return Err(Error::SingularDiagonal { t });
    }
    Ok(residual_operator_f(spec, x, t)? / diag)
}

/// `F(p) − RHS` as an exact polynomial.
pub fn operator_residual_polynomial(spec: &ProblemSpec, p: &Polynomial) -> Result<Polynomial> {
    let mut out = spec.diagonal().mul(p);
    for (b, w) in spec.boundaries().iter().zip(spec.jump_weights()) {
        out = out.add(&w.mul(&p.compose(b.polynomial())));
    }
    for (i, dk) in spec.kernel_dt().iter().enumerate() {
        let (lower, upper) = spec.sector_limits(i);
        for (&(nu, mu), c) in dk.terms() {
            let mut weighted = vec![Real::zero(); mu as usize];
            weighted.push(Real::one());
            let antiderivative = Polynomial::new(weighted).mul(p).antiderivative();
            let span = antiderivative.compose(&upper).sub(&antiderivative.compose(&lower));
            out = out.add(&span.mul(&Polynomial::identity().pow(nu)).scale(c));
        }
    }
    Ok(out.sub(&spec.regular_rhs()?))
}

/// Exact `F(p) − RHS` at `t` for a polynomial regular part.
pub fn residual_operator_f_exact(spec: &ProblemSpec, p: &Polynomial, t: f64) -> Result<Real> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("residuals are evaluated for t > 0, got {t}")));
    }
    let point = Real::exact_from_f64(t).ok_or_else(|| Error::Domain(format!("t = {t} is not finite")))?;
    Ok(operator_residual_polynomial(spec, p)?.eval_exact(&point))
}

/// `F(x̂) − RHS` at `t`, exactly when `x̂` is a rational polynomial.
pub fn residual_operator_f_logpower(spec: &ProblemSpec, xhat: &LogPowerPolynomial<Real>, t: f64) -> Result<f64> {
    if let Some(p) = xhat.as_polynomial().filter(Polynomial::is_exact) {
        return Ok(residual_operator_f_exact(spec, &p, t)?.to_f64());
    }
    let x = FnEval::new(|s| xhat.evaluate(s).unwrap_or(f64::NAN), spec.horizon());
    residual_operator_f(spec, &x, t)
}

/// Observed power-law decay of residuals toward `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decay {
    /// Every residual vanished identically.
    Exact,
    Slope(f64),
}

impl Decay {
    /// `Exact` or a slope of at least `order`.
    pub fn at_least(&self, order: f64) -> bool {
        match self {
            Decay::Exact => true,
            Decay::Slope(s) => *s >= order,
        }
    }
}

/// Least-squares slope of `ln|r|` against `ln t`.
pub fn decay_order(values: &[(f64, f64)]) -> Result<Decay> {
    decay_order_above_floor(values, 0.0)
}

/// As [`decay_order`] but ignoring residuals at or below `floor`; fewer than
/// two remaining points count as exact.
pub fn decay_order_above_floor(values: &[(f64, f64)], floor: f64) -> Result<Decay> {
    if values.len() < 3 {
        return Err(Error::Domain(format!("decay order needs at least 3 points, got {}", values.len())));
    }
    if values.iter().any(|(t, _)| !(*t > 0.0)) {
        return Err(Error::Domain("decay order needs positive t".into()));
    }
    let points: Vec<(f64, f64)> =
        values.iter().filter(|(_, r)| r.abs() > floor).map(|(t, r)| (t.ln(), r.abs().ln())).collect();
    if points.len() < 2 {
        return Ok(Decay::Exact);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(Decay::Slope(sxy / sxx))
}

/// `|∫ K(t,s)·a·η_σ(s) ds − a·K₁(t,0)|` for the bump `η_σ(s) = 6s(σ−s)/σ³` on
/// `[0, σ]`; tends to zero with `σ`.
pub fn mollifier_error(spec: &ProblemSpec, a: f64, t: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma < t) {
        return Err(Error::Domain(format!("mollifier width {sigma} must lie in (0, t = {t})")));
    }
    let mut breaks = vec![0.0];
    breaks.extend(spec.boundaries().iter().map(|b| b.eval(t)).filter(|&s| s > 0.0 && s < sigma));
    breaks.push(sigma);
    let mut smeared = 0.0;
    for w in breaks.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let piece = sector_index(spec, t, mid);
        let k = &spec.kernels()[piece];
        smeared += adaptive_simpson(
            |s| k.eval(t, s) * a * 6.0 * s * (sigma - s) / sigma.powi(3),
            w[0],
            w[1],
            SIMPSON_TOLERANCE,
        )?;
    }
    Ok((smeared - a * spec.kernels()[0].eval(t, 0.0)).abs())
}

/// Residuals of the original and differentiated equations on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub grid: Vec<f64>,
    pub eq3: Vec<f64>,
    pub eq6: Vec<f64>,
    pub representation: Vec<&'static str>,
    pub decay: Option<Decay>,
}

impl ResidualReport {
    pub fn max_eq3(&self) -> f64 {
        self.eq3.iter().map(|r| r.abs()).fold(0.0, f64::max)
    }

    pub fn max_eq6(&self) -> f64 {
        self.eq6.iter().map(|r| r.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.max_eq3().max(self.max_eq6())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "grid": json::numbers(self.grid.iter().copied()),
            "eq3": json::numbers(self.eq3.iter().copied()),
            "eq6": json::numbers(self.eq6.iter().copied()),
            "representation": self.representation,
            "max_eq3": json::number(self.max_eq3()),
            "max_eq6": json::number(self.max_eq6()),
            "max_abs": json::number(self.max_abs()),
            "decay": match self.decay {
                None => Value::Null,
                Some(Decay::Exact) => json!("exact"),
                Some(Decay::Slope(s)) => json::number(s),
            },
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,eq3,eq6,representation\n");
        for i in 0..self.grid.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                json::format_float(self.grid[i]),
                json::format_float(self.eq3[i]),
                json::format_float(self.eq6[i]),
                self.representation[i]
            ));
        }
        out
    }
}

/// Evaluates both residual forms at every grid point.
pub fn residual_report<X: Evaluable + ?Sized>(
    spec: &ProblemSpec,
    a: f64,
    x: &X,
    grid: &[f64],
) -> Result<ResidualReport> {
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("residual grid must be strictly increasing".into()));
    }
    let mut eq3 = Vec::with_capacity(grid.len());
    let mut eq6 = Vec::with_capacity(grid.len());
    for &t in grid {
        eq3.push(residual_eq3(spec, a, x, t)?);
        eq6.push(residual_eq6(spec, x, t)?);
    }
    Ok(ResidualReport {
        grid: grid.to_vec(),
        eq3,
        eq6,
        representation: grid.iter().map(|&t| x.representation(t)).collect(),
        decay: None,
    })
}

/// `count` points spread uniformly over `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![hi];
    }
    let last = count - 1;
    (0..count).map(|k| if k == last { hi } else { lo + (hi - lo) * k as f64 / last as f64 }).collect()
}

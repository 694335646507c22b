//! Correction of the asymptotic approximation and assembly of the
//! generalized solution `u = a·δ + x̂ + t^{N*}·v`.
//!
//! With `x = x̂ + t^{N*}v` the differentiated equation becomes
//! `v + M v + K_att v = γ` where both operators carry the attenuation
//! factors `(αᵢ(t)/t)^{N*}` and `(s/t)^{N*}`. It is solved by successive
//! approximations, contractive in the norm `max e^{−lt}|v(t)|` for a large
//! enough weight `l`.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::asymptotics::{residual_series, AsymptoticSolution};
use crate::error::{Error, Result};
use crate::json;
use crate::logpower::LogPowerPolynomial;
use crate::model::{singular_amplitude, ProblemSpec, SolverConstants};
use crate::quadrature::GaussRule;
use crate::scalar::{ParamId, Real};
use crate::stepsolver::{lobatto_nodes, solve_regular, Evaluable, MeshFunction, StepOptions};

/// Relative size below which residual terms at solved orders are rounding noise.
const NOISE: f64 = 1e-9;
/// Innermost point of the Richardson extrapolation for `γ(0)`.
const GAMMA_T0: f64 = 1e-6;
/// Extra orders kept in the residual series when boundaries are nonlinear.
const SERIES_MARGIN: u32 = 20;

/// `f(0)/K₁(0,0)`, exact for rational data.
pub fn singular_coefficient(spec: &ProblemSpec) -> Result<Real> {
    singular_amplitude(spec)
}

/// `F(x̂)` evaluated pointwise through exact antiderivatives of the
/// log-power integrands; used away from the origin when the residual series
/// is only a truncation.
#[derive(Clone, Debug)]
struct PointwiseOperator {
    xhat: LogPowerPolynomial<Real>,
    /// `∫₀ˢ σ^μ x̂(σ) dσ` per sector and kernel-derivative term.
    antiderivatives: Vec<Vec<(u32, Real, LogPowerPolynomial<Real>)>>,
}

impl PointwiseOperator {
    fn new(spec: &ProblemSpec, xhat: &LogPowerPolynomial<Real>) -> Self {
        let max_mu = spec.kernel_dt().iter().flat_map(|k| k.terms().keys().map(|&(_, mu)| mu)).max().unwrap_or(0);
        let widened = xhat.with_order(xhat.order().max(xhat.max_power().unwrap_or(0)) + max_mu + 2);
        let antiderivatives = spec
            .kernel_dt()
            .iter()
            .map(|dk| {
                dk.terms()
                    .iter()
                    .map(|(&(nu, mu), c)| {
                        let g = widened
                            .mul(&LogPowerPolynomial::monomial(mu, 0, Real::one(), widened.order()))
                            .integrate_from_zero();
                        (nu, c.clone(), g)
                    })
                    .collect()
            })
            .collect();
        PointwiseOperator { xhat: xhat.clone(), antiderivatives }
    }

    fn residual(&self, spec: &ProblemSpec, t: f64) -> Result<f64> {
        let at = |g: &LogPowerPolynomial<Real>, s: f64| if s > 0.0 { g.evaluate(s) } else { Ok(0.0) };
        let mut sum = spec.diagonal().eval(t) * self.xhat.evaluate(t)?;
        for (b, w) in spec.boundaries().iter().zip(spec.jump_weights()) {
            sum += w.eval(t) * self.xhat.evaluate(b.eval(t))?;
        }
        for (i, terms) in self.antiderivatives.iter().enumerate() {
            let (lo, hi) = spec.sector_bounds(i, t);
            for (nu, c, g) in terms {
                sum += c.to_f64() * t.powi(*nu as i32) * (at(g, hi)? - at(g, lo)?);
            }
        }
        Ok(sum - spec.regular_rhs()?.eval(t))
    }
}

/// Right-hand side `γ(t) = (RHS − F(x̂))(t) / (t^{N*} K_n(t,t))`.
#[derive(Clone, Debug)]
pub struct Gamma {
    spec: ProblemSpec,
    nstar: u32,
    /// `(RHS − F(x̂)) / t^{N*}` as a log-power series.
    series: LogPowerPolynomial<Real>,
    /// Beyond `t_switch` the series is a truncation and `pointwise` is used.
    t_switch: f64,
    pointwise: Option<PointwiseOperator>,
}

/// Builds `γ` for the bound approximation `xhat` whose coefficients were
/// solved through order `solved_order`.
pub fn build_gamma(
    spec: &ProblemSpec,
    xhat: &LogPowerPolynomial<Real>,
    solved_order: u32,
    nstar: u32,
) -> Result<Gamma> {
    let kernel_degree =
        spec.kernels().iter().flat_map(|k| k.terms().keys().map(|&(nu, mu)| nu + mu)).max().unwrap_or(0);
    let linear = spec.boundaries().iter().all(|b| b.is_linear());
    let top = xhat.max_power().unwrap_or(0).max(solved_order).max(nstar)
        + kernel_degree
        + spec.rhs().degree() as u32
        + 2
        + if linear { 0 } else { SERIES_MARGIN };
    let residual = residual_series(spec, xhat, top, |c| c)?;

    let scale = xhat.terms().values().chain(spec.rhs().coeffs()).map(|c| c.to_f64().abs()).fold(1.0, f64::max);
    let mut kept = BTreeMap::new();
    for (&(j, k), c) in residual.terms() {
        let noise = !c.is_exact() && c.to_f64().abs() <= NOISE * scale;
        if j <= solved_order && noise {
            continue;
        }
        if j < nstar || (j == nstar && k > 0) {
            return Err(Error::HypothesisViolated(format!("residual term {c}·t^{j}·ln^{k} t is not O(t^{nstar})")));
        }
        kept.insert((j - nstar, k), -c.clone());
    }
    let series = LogPowerPolynomial::from_terms(kept, top - nstar);
    let (t_switch, pointwise) = if linear {
        (f64::INFINITY, None)
    } else {
        let switch = 0.05f64.max(10f64.powf(-6.0 / nstar.max(1) as f64));
        (switch, Some(PointwiseOperator::new(spec, xhat)))
    };
    Ok(Gamma { spec: spec.clone(), nstar, series, t_switch, pointwise })
}

impl Gamma {
    /// `γ(t)` for `t > 0`.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("γ is evaluated pointwise only for t > 0, got {t}")));
        }
        let diag = self.spec.diagonal().eval(t);
        if diag == 0.0 {
            return Err(Error::SingularDiagonal { t });
        }
        match &self.pointwise {
            Some(op) if t > self.t_switch => Ok(-op.residual(&self.spec, t)? / (t.powi(self.nstar as i32) * diag)),
            _ => Ok(self.series.evaluate(t)? / diag),
        }
    }

    /// `γ(0)` by Richardson extrapolation from `t₀, t₀/2, t₀/4`.
    pub fn at_zero(&self) -> Result<f64> {
        let (g1, g2, g4) = (self.value(GAMMA_T0)?, self.value(GAMMA_T0 / 2.0)?, self.value(GAMMA_T0 / 4.0)?);
        let r1 = 2.0 * g2 - g1;
        let r1_half = 2.0 * g4 - g2;
        Ok((4.0 * r1_half - r1) / 3.0)
    }

    /// `γ(t)` for `t ≥ 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            self.at_zero()
        } else {
            self.value(t)
        }
    }

    /// The series `t^{N*}K_n(t,t)·γ(t)` near the origin.
    pub fn series(&self) -> &LogPowerPolynomial<Real> {
        &self.series
    }

    pub fn nstar(&self) -> u32 {
        self.nstar
    }
}

/// Tunables of the correction solve.
#[derive(Clone, Debug, PartialEq)]
pub struct RefineOptions {
    pub panels: usize,
    pub nodes_per_panel: usize,
    pub tol: f64,
    pub max_iterations: usize,
    pub quadrature_order: usize,
    pub l_max: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            panels: 16,
            nodes_per_panel: 17,
            tol: 1e-10,
            max_iterations: 500,
            quadrature_order: 8,
            l_max: (1u64 << 20) as f64,
        }
    }
}

/// Record of the weighted-norm contraction.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionReport {
    pub l: f64,
    /// Sampled bound of the attenuated functional operator.
    pub q_m: f64,
    /// Sampled bound of the attenuated integral operator in the `l`-norm.
    pub q1: f64,
    pub ratios: Vec<f64>,
    pub iterations: usize,
}

impl ContractionReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "l": json::number(self.l),
            "q_m": json::number(self.q_m),
            "q1": json::number(self.q1),
            "max_ratio": json::number(self.max_ratio()),
            "iterations": self.iterations,
        })
    }
}

/// `P` uniform panels on `[0, end]` whose first panel is split again
/// geometrically into `[0, w/2^{P−1}], …, [w/2, w]` (`w = end/P`); Lobatto
/// nodes on each, shared panel ends. The grading resolves the `tʲ lnᵏ t`
/// behaviour of `v` near the origin.
pub fn correction_nodes(end: f64, opts: &RefineOptions) -> Vec<f64> {
    let panels = opts.panels.max(1);
    let width = end / panels as f64;
    let mut breaks = vec![0.0];
    breaks.extend((1..panels).rev().map(|p| width / 2f64.powi(p as i32)));
    breaks.extend((1..=panels).map(|p| if p == panels { end } else { p as f64 * width }));
    let mut nodes = vec![0.0];
    for w in breaks.windows(2) {
        nodes.extend(lobatto_nodes(w[0], w[1], opts.nodes_per_panel).into_iter().skip(1));
    }
    nodes
}

/// `(αᵢ(t)/t)`, with the limit `αᵢ′(0)` at the origin.
fn ratio(spec: &ProblemSpec, i: usize, t: f64) -> f64 {
    let b = &spec.boundaries()[i];
    if t > 0.0 {
        b.eval(t) / t
    } else {
        b.slope_at_zero().to_f64()
    }
}

/// `(M v)(t) = K_n⁻¹ Σ αᵢ′(αᵢ/t)^{N*}(Kᵢ−Kᵢ₊₁)(t,αᵢ) v(αᵢ)`.
pub fn m_att(spec: &ProblemSpec, v: &impl Evaluable, nstar: u32, t: f64) -> Result<f64> {
    let diag = spec.diagonal().eval(t);
    if diag == 0.0 {
        return Err(Error::SingularDiagonal { t });
    }
    let mut sum = 0.0;
    for (i, (b, w)) in spec.boundaries().iter().zip(spec.jump_weights()).enumerate() {
        sum += w.eval(t) * ratio(spec, i, t).powi(nstar as i32) * v.value(b.eval(t));
    }
    Ok(sum / diag)
}

fn attenuated_integral(
    spec: &ProblemSpec,
    nstar: u32,
    t: f64,
    breaks: &[f64],
    rule: &GaussRule,
    mut integrand: impl FnMut(usize, f64) -> f64,
) -> Result<f64> {
    if t == 0.0 || spec.kernel_dt().iter().all(|k| k.is_zero()) {
        return Ok(0.0);
    }
    let diag = spec.diagonal().eval(t);
    if diag == 0.0 {
        return Err(Error::SingularDiagonal { t });
    }
    let mut sum = 0.0;
    for (i, dk) in spec.kernel_dt().iter().enumerate() {
        if dk.is_zero() {
            continue;
        }
        let (lo, hi) = spec.sector_bounds(i, t);
        if hi <= lo {
            continue;
        }
        let mut panel = vec![lo];
        let first = breaks.partition_point(|&b| b <= lo);
        panel.extend(breaks[first..].iter().copied().take_while(|&b| b < hi));
        panel.push(hi);
        sum += rule.composite(|s| dk.eval(t, s) * (s / t).powi(nstar as i32) * integrand(i, s), &panel);
    }
    Ok(sum / diag)
}

/// `(K_att v)(t) = K_n⁻¹ Σ ∫ ∂ₜKᵢ(t,s)(s/t)^{N*} v(s) ds`.
pub fn k_att(spec: &ProblemSpec, v: &impl Evaluable, nstar: u32, t: f64, rule: &GaussRule) -> Result<f64> {
    attenuated_integral(spec, nstar, t, v.breakpoints(), rule, |_, s| v.value(s))
}

/// Sampled `sup_t |M|` over `nodes`.
pub fn functional_bound(spec: &ProblemSpec, nstar: u32, nodes: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in nodes {
        let diag = spec.diagonal().eval(t);
        if diag == 0.0 {
            return Err(Error::SingularDiagonal { t });
        }
        let total: f64 = spec
            .jump_weights()
            .iter()
            .enumerate()
            .map(|(i, w)| (w.eval(t) * ratio(spec, i, t).powi(nstar as i32)).abs())
            .sum();
        worst = worst.max(total / diag.abs());
    }
    Ok(worst)
}

/// Sampled `sup_t ∫ |K_n⁻¹∂ₜK|(s/t)^{N*} e^{−l(t−s)} ds` over `nodes`.
pub fn integral_bound(spec: &ProblemSpec, nstar: u32, l: f64, nodes: &[f64], rule: &GaussRule) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in nodes {
        let diag = spec.diagonal().eval(t);
        let value = attenuated_integral(spec, nstar, t, nodes, rule, |i, s| {
            let dk = &spec.kernel_dt()[i];
            // multiplying by both signs turns the integrand into its absolute value
            dk.eval(t, s).signum() * diag.signum() * (-l * (t - s)).exp()
        })?;
        worst = worst.max(value.abs());
    }
    Ok(worst)
}

fn weighted_norm(nodes: &[f64], values: &[f64], l: f64) -> f64 {
    nodes.iter().zip(values).map(|(t, v)| (-l * t).exp() * v.abs()).fold(0.0, f64::max)
}

/// Fixed point of `v = γ − M v − K_att v` on `[0, T′]`.
pub fn contraction_solve(
    spec: &ProblemSpec,
    gamma: &Gamma,
    consts: &SolverConstants,
    opts: &RefineOptions,
) -> Result<(MeshFunction, ContractionReport)> {
    let nstar = gamma.nstar();
    if !(consts.t_prime > 0.0) {
        return Err(Error::NoValidConstants { a0: consts.a0, eps_bound: consts.eps_bound });
    }
    let nodes = correction_nodes(consts.t_prime, opts);
    let rule = GaussRule::new(opts.quadrature_order);

    let q_m = functional_bound(spec, nstar, &nodes)?;
    let mut l = 0.0;
    let mut q1 = integral_bound(spec, nstar, l, &nodes, &rule)?;
    while q1 > 0.5 * (1.0 - q_m) {
        l = if l == 0.0 { 1.0 } else { 2.0 * l };
        if l > opts.l_max {
            return Err(Error::WeightExhausted { l_max: opts.l_max, q: q_m, q1 });
        }
        q1 = integral_bound(spec, nstar, l, &nodes, &rule)?;
    }

    let rhs: Vec<f64> = nodes.iter().map(|&t| gamma.eval(t)).collect::<Result<_>>()?;
    let mut current = rhs.clone();
    let mut ratios = Vec::new();
    let mut previous: Option<f64> = None;
    for iteration in 1..=opts.max_iterations {
        let v = MeshFunction::new(nodes.clone(), current.clone())?;
        let next: Vec<f64> = nodes
            .iter()
            .zip(&rhs)
            .map(|(&t, g)| Ok(g - m_att(spec, &v, nstar, t)? - k_att(spec, &v, nstar, t, &rule)?))
            .collect::<Result<_>>()?;
        let diff: Vec<f64> = next.iter().zip(&current).map(|(a, b)| a - b).collect();
        let sup = diff.iter().map(|d| d.abs()).fold(0.0, f64::max);
        let weighted = weighted_norm(&nodes, &diff, l);
        if !sup.is_finite() {
            return Err(Error::ContractionFailure {
                start: 0.0,
                end: consts.t_prime,
                ratio: f64::INFINITY,
                iterations: iteration,
            });
        }
        let scale = next.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if let Some(prev) = previous {
            if prev > 1e3 * f64::EPSILON * scale {
                ratios.push(weighted / prev);
            }
        }
        current = next;
        if sup <= opts.tol {
            let v = MeshFunction::new(nodes, current)?;
            return Ok((v, ContractionReport { l, q_m, q1, ratios, iterations: iteration }));
        }
        previous = Some(weighted);
    }
    Err(Error::ContractionFailure {
        start: 0.0,
        end: consts.t_prime,
        ratio: ratios.last().copied().unwrap_or(f64::NAN),
        iterations: opts.max_iterations,
    })
}

/// How the regular part is represented.
#[derive(Clone, Debug, PartialEq)]
pub enum RegularPart {
    /// Step-method node values on `[0, T]`.
    Mesh(MeshFunction),
    /// `x̂(t) + t^{N*}v(t)` for `t ≥ t_split`, `x̂(t)` below.
    Composite { xhat: LogPowerPolynomial<Real>, v: MeshFunction, nstar: u32, t_split: f64 },
}

/// `u(t) = a·δ(t) + x(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedSolution {
    pub a: Real,
    pub parameters: BTreeMap<ParamId, Real>,
    pub regular: RegularPart,
    pub horizon: f64,
    pub contraction: Option<ContractionReport>,
}

impl GeneralizedSolution {
    pub fn path(&self) -> &'static str {
        match self.regular {
            RegularPart::Mesh(_) => "theorem-1",
            RegularPart::Composite { .. } => "theorem-2",
        }
    }

    pub fn nstar(&self) -> Option<u32> {
        match &self.regular {
            RegularPart::Mesh(_) => None,
            RegularPart::Composite { nstar, .. } => Some(*nstar),
        }
    }

    pub fn t_split(&self) -> f64 {
        match &self.regular {
            RegularPart::Mesh(_) => 0.0,
            RegularPart::Composite { t_split, .. } => *t_split,
        }
    }

    /// Regular part `x(t)`.
    pub fn regular_value(&self, t: f64) -> f64 {
        match &self.regular {
            RegularPart::Mesh(m) => m.eval(t),
            RegularPart::Composite { xhat, v, nstar, t_split } => {
                let base = xhat.evaluate(t).unwrap_or(f64::NAN);
                if t >= *t_split {
                    base + t.powi(*nstar as i32) * v.eval(t)
                } else {
                    base
                }
            }
        }
    }

    /// `[t, x(t)]` on `count` uniform points, starting at 0 only when the
    /// regular part is finite there.
    pub fn samples(&self, count: usize) -> Vec<(f64, f64)> {
        let count = count.max(2);
        let first = match self.regular {
            RegularPart::Mesh(_) => 0,
            RegularPart::Composite { .. } => 1,
        };
        (first..count)
            .map(|k| {
                let t = self.horizon * k as f64 / (count - 1) as f64;
                (t, self.regular_value(t))
            })
            .collect()
    }

    pub fn samples_csv(&self, count: usize) -> String {
        let mut out = String::from("t,x\n");
        for (t, x) in self.samples(count) {
            out.push_str(&format!("{},{}\n", json::format_float(t), json::format_float(x)));
        }
        out
    }

    pub fn to_json(&self, sample_count: usize) -> Value {
        let regular = match &self.regular {
            RegularPart::Mesh(m) => json!({
                "kind": "mesh",
                "nodes": json::numbers(m.nodes().iter().copied()),
                "values": json::numbers(m.values().iter().copied()),
            }),
            RegularPart::Composite { xhat, v, nstar, t_split } => json!({
                "kind": "composite",
                "order": xhat.order(),
                "xhat": xhat.terms().iter().map(|((j, k), c)| json!([j, k, json::number(c.to_f64())])).collect::<Vec<_>>(),
                "nstar": nstar,
                "t_split": json::number(*t_split),
                "v_nodes": json::numbers(v.nodes().iter().copied()),
                "v_values": json::numbers(v.values().iter().copied()),
            }),
        };
        let params: serde_json::Map<String, Value> =
            self.parameters.iter().map(|(id, v)| (id.to_string(), json::number(v.to_f64()))).collect();
        json!({
            "path": self.path(),
            "a": json::number(self.a.to_f64()),
            "a_exact": self.a.as_rational().map(|_| self.a.to_string()),
            "parameters": params,
            "Nstar": self.nstar(),
            "T_prime": json::number(self.horizon),
            "regular": regular,
            "contraction": self.contraction.as_ref().map(ContractionReport::to_json),
            "samples": self.samples(sample_count).iter().map(|(t, x)| json!([json::number(*t), json::number(*x)])).collect::<Vec<_>>(),
        })
    }

    /// Reconstructs the solution from [`GeneralizedSolution::to_json`] output.
    pub fn from_json(value: &Value) -> Result<Self> {
        let field = |name: &str| value.get(name).ok_or_else(|| parse_error(name, "missing"));
        let num = |v: &Value, name: &str| json::as_f64(v).ok_or_else(|| parse_error(name, "expected a number"));
        let nums = |v: &Value, name: &str| -> Result<Vec<f64>> {
            v.as_array().ok_or_else(|| parse_error(name, "expected an array"))?.iter().map(|x| num(x, name)).collect()
        };
        let a = match value.get("a_exact").and_then(Value::as_str).and_then(crate::scalar::parse_exact) {
            Some(r) => Real::Exact(r),
            None => Real::Float(num(field("a")?, "a")?),
        };
        let mut parameters = BTreeMap::new();
        if let Some(map) = value.get("parameters").and_then(Value::as_object) {
            for (name, v) in map {
                let id = ParamId::parse(name).ok_or_else(|| parse_error("parameters", "unknown parameter name"))?;
                parameters.insert(id, Real::Float(num(v, "parameters")?));
            }
        }
        let horizon = num(field("T_prime")?, "T_prime")?;
        let reg = field("regular")?;
        let regular = match reg.get("kind").and_then(Value::as_str) {
            Some("mesh") => RegularPart::Mesh(MeshFunction::new(
                nums(reg.get("nodes").unwrap_or(&Value::Null), "regular.nodes")?,
                nums(reg.get("values").unwrap_or(&Value::Null), "regular.values")?,
            )?),
            Some("composite") => {
                let order =
                    reg.get("order")
                        .and_then(Value::as_u64)
                        .ok_or_else(|| parse_error("regular.order", "expected an integer"))? as u32;
                let mut terms = Vec::new();
                for entry in reg
                    .get("xhat")
                    .and_then(Value::as_array)
                    .ok_or_else(|| parse_error("regular.xhat", "expected an array"))?
                {
                    let parts = entry
                        .as_array()
                        .filter(|p| p.len() == 3)
                        .ok_or_else(|| parse_error("regular.xhat", "expected [j, k, c]"))?;
                    let j = parts[0].as_u64().ok_or_else(|| parse_error("regular.xhat", "bad j"))? as u32;
                    let k = parts[1].as_u64().ok_or_else(|| parse_error("regular.xhat", "bad k"))? as u32;
                    terms.push(((j, k), Real::Float(num(&parts[2], "regular.xhat")?)));
                }
                RegularPart::Composite {
                    xhat: LogPowerPolynomial::from_terms(terms, order),
                    v: MeshFunction::new(
                        nums(reg.get("v_nodes").unwrap_or(&Value::Null), "regular.v_nodes")?,
                        nums(reg.get("v_values").unwrap_or(&Value::Null), "regular.v_values")?,
                    )?,
                    nstar: reg
                        .get("nstar")
                        .and_then(Value::as_u64)
                        .ok_or_else(|| parse_error("regular.nstar", "expected an integer"))?
                        as u32,
                    t_split: num(reg.get("t_split").unwrap_or(&Value::Null), "regular.t_split")?,
                }
            }
            _ => return Err(parse_error("regular.kind", "expected \"mesh\" or \"composite\"")),
        };
        Ok(GeneralizedSolution { a, parameters, regular, horizon, contraction: None })
    }
}

fn parse_error(field: &str, message: &str) -> Error {
    Error::Parse { field: field.into(), message: message.into() }
}

impl Evaluable for GeneralizedSolution {
    fn value(&self, t: f64) -> f64 {
        self.regular_value(t)
    }
    fn domain_end(&self) -> f64 {
        self.horizon
    }
    fn breakpoints(&self) -> &[f64] {
        match &self.regular {
            RegularPart::Mesh(m) => m.nodes(),
            RegularPart::Composite { v, .. } => v.nodes(),
        }
    }
    fn representation(&self, t: f64) -> &'static str {
        match &self.regular {
            RegularPart::Mesh(_) => "mesh",
            RegularPart::Composite { t_split, .. } if t < *t_split => "asymptotic",
            RegularPart::Composite { .. } => "composite",
        }
    }
}

/// Combines the pieces of the second construction.
pub fn assemble(
    spec: &ProblemSpec,
    asym: &AsymptoticSolution,
    params: &BTreeMap<ParamId, Real>,
    v: MeshFunction,
    nstar: u32,
    t_prime: f64,
) -> Result<GeneralizedSolution> {
    let xhat = asym.bind(params)?;
    let t_split = v.nodes().iter().copied().find(|&t| t > 0.0).unwrap_or(0.0);
    Ok(GeneralizedSolution {
        a: singular_coefficient(spec)?,
        parameters: params.clone(),
        regular: RegularPart::Composite { xhat, v, nstar, t_split },
        horizon: t_prime,
        contraction: None,
    })
}

/// Second construction end to end: `γ`, the contraction solve and assembly.
pub fn solve_with_correction(
    spec: &ProblemSpec,
    consts: &SolverConstants,
    asym: &AsymptoticSolution,
    params: &BTreeMap<ParamId, Real>,
    opts: &RefineOptions,
) -> Result<GeneralizedSolution> {
    if asym.order < consts.nstar {
        return Err(Error::Domain(format!("asymptotic order {} is below N* = {}", asym.order, consts.nstar)));
    }
    let xhat = asym.bind(params)?;
    let gamma = build_gamma(spec, &xhat, asym.order, consts.nstar)?;
    let (v, report) = contraction_solve(spec, &gamma, consts, opts)?;
    let mut solution = assemble(spec, asym, params, v, consts.nstar, consts.t_prime)?;
    solution.contraction = Some(report);
    Ok(solution)
}

/// Step-method construction wrapped as a generalized solution.
pub fn solve_step_method(
    spec: &ProblemSpec,
    consts: &SolverConstants,
    opts: &StepOptions,
) -> Result<GeneralizedSolution> {
    let regular = solve_regular(spec, consts, opts)?;
    Ok(GeneralizedSolution {
        a: singular_coefficient(spec)?,
        parameters: BTreeMap::new(),
        regular: RegularPart::Mesh(regular.function),
        horizon: spec.horizon(),
        contraction: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::compute_asymptotics;
    use crate::model::{default_target_q, estimate_constants, parse_problem};

    const LN2: f64 = std::f64::consts::LN_2;

    fn doc(boundaries: &str, kernels: &str, f: &str) -> ProblemSpec {
        parse_problem(&format!(r#"{{"T": 2, "boundaries": {boundaries}, "kernels": {kernels}, "f": {f}}}"#)).unwrap()
    }

    fn example1() -> ProblemSpec {
        doc("[[0.5]]", r#"[{"terms": [[0,0,1]]}, {"terms": [[0,0,2]]}]"#, "[2, 1]")
    }

    fn example2() -> ProblemSpec {
        doc("[[0.5]]", r#"[{"terms": [[0,0,1]]}, {"terms": [[0,0,-1]]}]"#, "[1, 1]")
    }

    fn constants(spec: &ProblemSpec) -> SolverConstants {
        estimate_constants(spec, default_target_q(spec).unwrap(), 200).unwrap()
    }

    fn params(c: f64) -> BTreeMap<ParamId, Real> {
        BTreeMap::from([(ParamId(0), Real::Float(c))])
    }

    #[test]
    fn singular_coefficients() {
        assert_eq!(singular_coefficient(&example1()).unwrap(), Real::from_i64(2));
        assert_eq!(singular_coefficient(&example2()).unwrap(), Real::one());
        let relaxed = doc("[[0.5]]", r#"[{"terms": [[0,0,1]]}, {"terms": [[0,0,2]]}]"#, "[0, 1]");
        assert_eq!(singular_coefficient(&relaxed).unwrap(), Real::zero());
        let uncovered = doc("[]", r#"[{"terms": [[0,1,1]]}]"#, "[1]");
        assert!(matches!(singular_coefficient(&uncovered), Err(Error::NotCovered(_))));
    }

    #[test]
    fn gamma_vanishes_for_exact_expansions() {
        let asym = compute_asymptotics(&example1(), 2).unwrap();
        let g = build_gamma(&example1(), &asym.bind(&BTreeMap::new()).unwrap(), 2, 0).unwrap();
        assert!(g.series().is_zero());
        assert_eq!(g.value(0.5).unwrap(), 0.0);

        let asym = compute_asymptotics(&example2(), 2).unwrap();
        let g = build_gamma(&example2(), &asym.bind(&params(0.3)).unwrap(), 2, 2).unwrap();
        assert!(g.series().is_zero(), "{}", g.series());
        assert_eq!(g.at_zero().unwrap(), 0.0);
    }

    #[test]
    fn perturbed_expansion_has_linear_gamma() {
        let spec = example2();
        let asym = compute_asymptotics(&spec, 2).unwrap();
        let perturbed =
            asym.bind(&params(0.0)).unwrap().with_order(3).add(&LogPowerPolynomial::monomial(3, 0, Real::one(), 3));
        let g = build_gamma(&spec, &perturbed, 2, 2).unwrap();
        for t in [1e-3, 0.2, 1.5] {
            assert!((g.value(t).unwrap() + 7.0 * t / 8.0).abs() < 1e-14);
        }
        assert!(g.at_zero().unwrap().abs() < 1e-12);

        let consts = constants(&spec);
        let (v, report) = contraction_solve(&spec, &g, &consts, &RefineOptions::default()).unwrap();
        for (t, value) in v.nodes().iter().zip(v.values()) {
            assert!((value + t).abs() < 1e-9, "v({t}) = {value}");
        }
        assert!(report.max_ratio() <= report.q_m + report.q1 + 0.05);
        assert!(report.q_m + report.q1 < 1.0);
    }

    #[test]
    fn hypothesis_violation_is_reported() {
        // x̂ = 0 leaves the full right-hand side 1 at order 0 while N* = 2.
        let spec = example2();
        let zero = LogPowerPolynomial::zero(2);
        assert!(matches!(build_gamma(&spec, &zero, 2, 2), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn example_two_correction_is_negligible() {
        let spec = example2();
        let consts = constants(&spec);
        assert_eq!(consts.nstar, 2);
        let asym = compute_asymptotics(&spec, consts.nstar).unwrap();
        for c in [-1.0, 0.0, 2.0] {
            let sol = solve_with_correction(&spec, &consts, &asym, &params(c), &RefineOptions::default()).unwrap();
            assert_eq!(sol.a, Real::one());
            for t in [0.01, 0.5, 1.0, 2.0] {
                assert!((sol.regular_value(t) - (c - t.ln() / LN2)).abs() < 1e-12);
            }
        }
        let sol = solve_with_correction(&spec, &consts, &asym, &params(3.0), &RefineOptions::default()).unwrap();
        assert!((sol.regular_value(1.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn attenuation_bound_holds_on_the_mesh() {
        let spec = example2();
        let consts = constants(&spec);
        let nodes = correction_nodes(consts.t_prime, &RefineOptions::default());
        for &t in &nodes {
            let r = ratio(&spec, 0, t).powi(consts.nstar as i32);
            assert!(r <= consts.eps_bound.powi(consts.nstar as i32) + 1e-15);
        }
    }

    #[test]
    fn integral_operator_with_growing_kernel() {
        // Example-2 geometry with K₂ = −1 − t: the integral operator is active.
        let spec = doc("[[0.5]]", r#"[{"terms": [[0,0,1]]}, {"terms": [[0,0,-1],[1,0,-1]]}]"#, "[1, 1]");
        let consts = constants(&spec);
        let asym = compute_asymptotics(&spec, consts.nstar.max(2)).unwrap();
        let sol = solve_with_correction(&spec, &consts, &asym, &params(0.5), &RefineOptions::default()).unwrap();
        let report = sol.contraction.as_ref().unwrap();
        assert!(report.q1 > 0.0);
        assert!(report.max_ratio() <= report.q_m + report.q1 + 0.05);
        for t in [0.05, 0.3, 0.8] {
            let r = crate::verifier::residual_eq6(&spec, &sol, t).unwrap();
            assert!(r.abs() < 1e-6, "t = {t}: {r}");
        }
    }

    #[test]
    fn json_round_trip() {
        let spec = example2();
        let consts = constants(&spec);
        let asym = compute_asymptotics(&spec, consts.nstar).unwrap();
        let sol = solve_with_correction(&spec, &consts, &asym, &params(0.25), &RefineOptions::default()).unwrap();
        let back = GeneralizedSolution::from_json(&sol.to_json(11)).unwrap();
        assert_eq!(back.a, sol.a);
        for t in [0.001, 0.4, 1.7] {
            assert_eq!(back.regular_value(t), sol.regular_value(t));
        }
        let step = solve_step_method(&example1(), &constants(&example1()), &StepOptions::default()).unwrap();
        let back = GeneralizedSolution::from_json(&step.to_json(5)).unwrap();
        assert_eq!(back.regular, step.regular);
        assert_eq!(back.a, Real::from_i64(2));
    }
}

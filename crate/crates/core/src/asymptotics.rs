//! Asymptotic approximation `x̂(t) = Σ_{j≤N} xⱼ(ln t) tʲ` of the regular part.
//!
//! Substituting `x̂` into the differentiated equation
//! `F(x) = f′(t) − ∂ₜK₁(t,0)·f(0)/K₁(0,0)` and collecting `tʲ` gives, order
//! by order, the difference equation
//!
//! ```text
//! K_n(0,0)·xⱼ(z) + Σᵢ αᵢ′(0)^{1+j}(Kᵢ(0,0) − K_{i+1}(0,0))·xⱼ(z + ln αᵢ′(0)) + Pⱼ(z) = 0
//! ```
//!
//! where `Pⱼ` collects the contributions of `x₀ … x_{j−1}`. At a zero of the
//! characteristic function of multiplicity `m` the solution gains degree `m`
//! in `z` and `m` free parameters.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::characteristic::{self, find_integer_roots, CharacteristicReport, ROOT_TOLERANCE};
use crate::error::{Error, Result};
use crate::json;
use crate::logpower::{LogPowerPolynomial, ZPolynomial};
use crate::model::{singular_amplitude, ProblemSpec};
use crate::scalar::{AffineValue, Coeff, ParamId, Real};

/// Relative size below which a floating-point coefficient counts as zero.
const NOISE: f64 = 1e-9;
/// `|B(j)|` below this (in floating mode) triggers a conditioning warning.
const CONDITIONING_WARNING: f64 = 1e-8;

/// One shifted term `weight · p(z + ln ratio)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Shift {
    pub weight: Real,
    pub ratio: Real,
}

impl Shift {
    pub fn log_shift(&self) -> Real {
        self.ratio.try_ln().expect("shift ratios are validated positive")
    }
}

/// `L[p](z) = c·p(z) + Σ wᵢ·p(z + aᵢ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceOperator {
    pub constant_weight: Real,
    pub shifts: Vec<Shift>,
}

impl DifferenceOperator {
    /// Operator acting on the coefficient of `tʲ`.
    pub fn at_order(spec: &ProblemSpec, j: u32) -> Self {
        DifferenceOperator {
            constant_weight: characteristic::diagonal_at_origin(spec),
            shifts: characteristic::shift_data(spec)
                .into_iter()
                .map(|(slope, jump)| Shift { weight: &slope.powi(1 + j) * &jump, ratio: slope })
                .collect(),
        }
    }

    /// `βᵣ`: `β₀ = c + Σwᵢ`, `βᵣ = Σ wᵢ aᵢʳ`. These are `B` and its derivatives.
    pub fn moment(&self, r: u32) -> Real {
        if r == 0 {
            return self.shifts.iter().fold(self.constant_weight.clone(), |acc, s| &acc + &s.weight);
        }
        self.shifts.iter().fold(Real::zero(), |acc, s| &acc + &(&s.weight * &s.log_shift().powi(r)))
    }

    /// Scale used for the noise threshold of `βᵣ`.
    fn moment_scale(&self, r: u32) -> f64 {
        self.shifts.iter().fold(self.constant_weight.to_f64().abs(), |acc, s| {
            acc + s.weight.to_f64().abs() * (1.0 + s.log_shift().to_f64().abs()).powi(r as i32)
        })
    }

    pub fn apply<C: Coeff>(&self, p: &ZPolynomial<C>) -> ZPolynomial<C> {
        self.shifts
            .iter()
            .fold(p.scale(&self.constant_weight), |acc, s| acc.add(&p.shift(&s.log_shift()).scale(&s.weight)))
    }
}

/// Hands out fresh parameter ids.
#[derive(Clone, Debug, Default)]
pub struct ParamAllocator {
    next: u32,
}

impl ParamAllocator {
    pub fn fresh(&mut self) -> ParamId {
        let id = ParamId(self.next);
        self.next += 1;
        id
    }

    pub fn allocated(&self) -> Vec<ParamId> {
        (0..self.next).map(ParamId).collect()
    }
}

fn negligible(value: &Real, scale: f64) -> bool {
    match value {
        Real::Exact(_) => value.is_zero(),
        Real::Float(v) => v.abs() <= NOISE * scale.max(1.0),
    }
}

fn binomial(n: usize, k: usize) -> Real {
    (0..k).fold(Real::one(), |acc, i| &(&acc * &Real::from_i64((n - i) as i64)) / &Real::from_i64(i as i64 + 1))
}

/// Polynomial solution of `L[p] = rhs` when `L` has a zero of exactly
/// `multiplicity` at the origin of its moment sequence.
///
/// The result has degree `deg(rhs) + multiplicity`; its lowest
/// `multiplicity` coefficients are fresh free parameters.
pub fn solve_difference_equation(
    op: &DifferenceOperator,
    rhs: &ZPolynomial<AffineValue>,
    multiplicity: u32,
    params: &mut ParamAllocator,
) -> Result<ZPolynomial<AffineValue>> {
    let m = multiplicity as usize;
    for r in 0..multiplicity {
        let beta = op.moment(r);
        if !negligible(&beta, op.moment_scale(r)) {
            return Err(Error::MultiplicityMismatch(format!(
                "moment β{r} = {beta} does not vanish for declared multiplicity {multiplicity}"
            )));
        }
    }
    let leading = op.moment(multiplicity);
    if negligible(&leading, op.moment_scale(multiplicity)) {
        return Err(Error::MultiplicityMismatch(format!(
            "moment β{multiplicity} vanishes; the root multiplicity exceeds {multiplicity}"
        )));
    }

    let mut coeffs: Vec<AffineValue> = (0..m).map(|_| AffineValue::parameter(params.fresh())).collect();
    let Some(d) = rhs.degree() else {
        return Ok(ZPolynomial::new(coeffs));
    };
    let top = d + m;
    let moments: Vec<Real> = (0..=top as u32).map(|r| op.moment(r)).collect();
    coeffs.resize(top + 1, AffineValue::constant(Real::zero()));
    for e in (0..=d).rev() {
        let mut acc = rhs.coeff(e);
        for k in (e + m + 1)..=top {
            acc = acc.sub(&coeffs[k].scale(&(&binomial(k, k - e) * &moments[k - e])));
        }
        let pivot = &binomial(e + m, m) * &leading;
        coeffs[e + m] = acc.scale(&pivot.recip());
    }
    Ok(ZPolynomial::new(coeffs))
}

/// `F(g)` in log-power form, truncated at `order`:
/// `K_n(t,t)g(t) + Σ wᵢ(t) g(αᵢ(t)) + Σᵢ ∫_{α_{i−1}}^{αᵢ} ∂ₜKᵢ(t,s) g(s) ds`.
pub fn operator_series<C: Coeff>(
    spec: &ProblemSpec,
    g: &LogPowerPolynomial<C>,
    order: u32,
) -> Result<LogPowerPolynomial<C>> {
    let g = g.with_order(order);
    let mut out = g.mul(&LogPowerPolynomial::from_polynomial(spec.diagonal(), order));
    for (b, weight) in spec.boundaries().iter().zip(spec.jump_weights()) {
        if weight.is_zero() {
            continue;
        }
        let shifted = g.substitute_boundary(b, order)?;
        out = out.add(&shifted.mul(&LogPowerPolynomial::from_polynomial(weight, order)));
    }
    let last = spec.pieces() - 1;
    for (i, dk) in spec.kernel_dt().iter().enumerate() {
        for (&(nu, mu), c) in dk.terms() {
            let antiderivative = g.mul(&LogPowerPolynomial::monomial(mu, 0, Real::one(), order)).integrate_from_zero();
            let upper = if i == last {
                antiderivative.clone()
            } else {
                antiderivative.substitute_boundary(&spec.boundaries()[i], order)?
            };
            let span = if i == 0 {
                upper
            } else {
                upper.sub(&antiderivative.substitute_boundary(&spec.boundaries()[i - 1], order)?)
            };
            out = out.add(&span.mul(&LogPowerPolynomial::monomial(nu, 0, c.clone(), order)));
        }
    }
    Ok(out)
}

/// `F(g) − (f′ − ∂ₜK₁(t,0)·f(0)/K₁(0,0))` truncated at `order`.
pub fn residual_series<C: Coeff>(
    spec: &ProblemSpec,
    g: &LogPowerPolynomial<C>,
    order: u32,
    lift: impl Fn(Real) -> C,
) -> Result<LogPowerPolynomial<C>> {
    let rhs = LogPowerPolynomial::from_polynomial(&spec.regular_rhs()?, order).map(|c| lift(c.clone()));
    Ok(operator_series(spec, g, order)?.sub(&rhs))
}

fn assemble<C: Coeff>(coefficients: &[ZPolynomial<C>], order: u32) -> LogPowerPolynomial<C> {
    coefficients.iter().enumerate().fold(LogPowerPolynomial::zero(order), |acc, (j, x)| {
        acc.add(&LogPowerPolynomial::from_z_polynomial(x, j as u32, order))
    })
}

/// Forcing `Pⱼ` of the order-`j` equation `Lⱼ[xⱼ] + Pⱼ = 0` given `x₀ … x_{j−1}`.
pub fn expand_operator(
    spec: &ProblemSpec,
    previous: &[ZPolynomial<AffineValue>],
    j: u32,
) -> Result<ZPolynomial<AffineValue>> {
    if previous.len() != j as usize {
        return Err(Error::InternalConsistency(format!(
            "order {j} needs {j} previous coefficients, got {}",
            previous.len()
        )));
    }
    let partial = assemble(previous, j);
    let residual = residual_series(spec, &partial, j, AffineValue::constant)?;
    let forcing = residual.coefficient_of_power(j);
    let bound = previous.iter().filter_map(ZPolynomial::degree).max().unwrap_or(0);
    if forcing.degree().is_some_and(|d| d > bound) {
        return Err(Error::InternalConsistency(format!(
            "forcing at order {j} has log-degree {:?} above the bound {bound}",
            forcing.degree()
        )));
    }
    Ok(forcing)
}

/// The expansion `Σ xⱼ(ln t) tʲ` with its free parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticSolution {
    pub order: u32,
    pub coefficients: Vec<ZPolynomial<AffineValue>>,
    pub free_parameters: Vec<ParamId>,
    pub characteristic: CharacteristicReport,
    pub warnings: Vec<String>,
}

/// Builds `x̂` through order `n`.
pub fn compute_asymptotics(spec: &ProblemSpec, n: u32) -> Result<AsymptoticSolution> {
    singular_amplitude(spec)?;
    let characteristic = find_integer_roots(spec, n, ROOT_TOLERANCE)?;
    let mut params = ParamAllocator::default();
    let mut coefficients: Vec<ZPolynomial<AffineValue>> = Vec::with_capacity(n as usize + 1);
    let mut warnings = Vec::new();

    for j in 0..=n {
        let forcing = expand_operator(spec, &coefficients, j)?;
        let multiplicity = characteristic.multiplicity(j);
        let op = DifferenceOperator::at_order(spec, j);
        if multiplicity == 0 {
            let b = op.moment(0);
            if !b.is_exact() && b.to_f64().abs() < CONDITIONING_WARNING {
                warnings.push(format!(
                    "B({j}) = {b:e} is nearly zero; coefficient x{j} is ill-conditioned",
                    b = b.to_f64()
                ));
            }
        }
        let x = solve_difference_equation(&op, &forcing.neg(), multiplicity, &mut params)?;

        let bound = characteristic.free_constants_through(j) as usize;
        if x.degree().is_some_and(|d| d > bound) {
            return Err(Error::InternalConsistency(format!(
                "x{j} has degree {:?} above the multiplicity sum {bound}",
                x.degree()
            )));
        }
        let check = op.apply(&x).add(&forcing);
        let scale = forcing.magnitude().max(x.magnitude());
        if check.coeffs().iter().any(|c| !affine_negligible(c, scale)) {
            return Err(Error::InternalConsistency(format!("order-{j} difference equation not satisfied")));
        }
        coefficients.push(x);
    }

    Ok(AsymptoticSolution { order: n, coefficients, free_parameters: params.allocated(), characteristic, warnings })
}

fn affine_negligible(c: &AffineValue, scale: f64) -> bool {
    negligible(&c.constant, scale) && c.linear.values().all(|v| negligible(v, scale))
}

impl AsymptoticSolution {
    pub fn to_logpower(&self) -> LogPowerPolynomial<AffineValue> {
        assemble(&self.coefficients, self.order)
    }

    /// `x̂` with every parameter replaced by its value.
    pub fn bind(&self, params: &BTreeMap<ParamId, Real>) -> Result<LogPowerPolynomial<Real>> {
        for id in params.keys() {
            if !self.free_parameters.contains(id) {
                return Err(Error::ParameterMismatch(format!("`{id}` is not a free parameter of this expansion")));
            }
        }
        self.to_logpower().try_map(|c| c.bind(params))
    }

    /// Sum of multiplicities of roots `≤ j` that were used.
    pub fn parameters_through(&self, j: u32) -> usize {
        self.coefficients
            .iter()
            .take(j as usize + 1)
            .flat_map(|x| x.coeffs().iter().flat_map(|c| c.parameters()))
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    }

    /// Human-readable `x̂(t) = …`.
    pub fn pretty(&self) -> String {
        let mut monomials: Vec<(Real, Option<ParamId>, u32, u32)> = Vec::new();
        for ((j, k), c) in self.to_logpower().terms() {
            if !c.constant.is_zero() {
                monomials.push((c.constant.clone(), None, *j, *k));
            }
            for (id, v) in &c.linear {
                monomials.push((v.clone(), Some(*id), *j, *k));
            }
        }
        // parameters first within each (j, k)
        monomials.sort_by_key(|(_, p, j, k)| (*j, *k, p.is_none(), p.map(|id| id.0)));
        let mut out = String::from("x̂(t) = ");
        if monomials.is_empty() {
            out.push('0');
            return out;
        }
        for (idx, (c, param, j, k)) in monomials.iter().enumerate() {
            let negative = c.signum() < 0;
            let sep = match (idx == 0, negative) {
                (true, true) => "−",
                (true, false) => "",
                (false, true) => " − ",
                (false, false) => " + ",
            };
            let magnitude = c.abs();
            let mut factors: Vec<String> = Vec::new();
            if magnitude != Real::one() {
                factors.push(magnitude.to_string());
            }
            if let Some(id) = param {
                factors.push(id.to_string());
            }
            match j {
                0 => {}
                1 => factors.push("t".into()),
                j => factors.push(format!("t^{j}")),
            }
            match k {
                0 => {}
                1 => factors.push("ln t".into()),
                k => factors.push(format!("ln^{k} t")),
            }
            if factors.is_empty() {
                factors.push("1".into());
            }
            let _ = write!(out, "{sep}{}", factors.join("·"));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .to_logpower()
            .terms()
            .iter()
            .map(|((j, k), c)| {
                let params: serde_json::Map<String, Value> =
                    c.linear.iter().map(|(id, v)| (id.to_string(), json::number(v.to_f64()))).collect();
                json!({
                    "j": j,
                    "k": k,
                    "constant": json::number(c.constant.to_f64()),
                    "exact": c.constant.as_rational().map(|_| c.constant.to_string()),
                    "parameters": params,
                })
            })
            .collect();
        json!({
            "order": self.order,
            "parameters": self.free_parameters.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "terms": terms,
            "characteristic": self.characteristic.to_json(),
            "warnings": self.warnings,
            "pretty": self.pretty(),
        })
    }
}

/// Numeric `x̂(t)` for the given parameter values.
pub fn eval_asymptotic(asym: &AsymptoticSolution, params: &BTreeMap<ParamId, f64>, t: f64) -> Result<f64> {
    let bound: BTreeMap<ParamId, Real> = params.iter().map(|(k, v)| (*k, Real::Float(*v))).collect();
    let missing = asym.free_parameters.iter().find(|id| !bound.contains_key(id));
    if let Some(id) = missing {
        return Err(Error::MissingParameter(id.to_string()));
    }
    asym.bind(&bound)?.evaluate(t)
}

/// Order-zero forcing `f′(0) − (f(0)/K₁(0,0))·∂ₜK₁(0,0)`.
pub fn build_rhs0(spec: &ProblemSpec) -> Result<Real> {
    Ok(spec.regular_rhs()?.coeff(0))
}

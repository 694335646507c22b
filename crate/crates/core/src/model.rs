//! Problem data: polynomial kernels, boundary curves and right-hand side.
//!
//! The equation is `∫₀ᵗ K(t,s) u(s) ds = f(t)` where `K = Kᵢ` on the sector
//! `α_{i-1}(t) < s < αᵢ(t)`, `α₀ = 0`, `α_n(t) = t`. All data is polynomial
//! and kept exact; every polynomial also caches `f64` coefficients for the
//! numeric solvers.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::scalar::{parse_exact, Real};

/// Univariate polynomial in `t`, ascending coefficients.
#[derive(Clone, Debug)]
pub struct Polynomial {
    coeffs: Vec<Real>,
    numeric: Vec<f64>,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Real>) -> Self {
        while coeffs.last().is_some_and(Real::is_zero) {
            coeffs.pop();
        }
        let numeric = coeffs.iter().map(Real::to_f64).collect();
        Polynomial { coeffs, numeric }
    }

    pub fn zero() -> Self {
        Polynomial::new(Vec::new())
    }

    pub fn constant(c: Real) -> Self {
        Polynomial::new(vec![c])
    }

    /// `t`
    pub fn identity() -> Self {
        Polynomial::new(vec![Real::zero(), Real::one()])
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Polynomial::new(coeffs.iter().map(|&c| Real::from_i64(c)).collect())
    }

    pub fn coeffs(&self) -> &[Real] {
        &self.coeffs
    }

    pub fn coeff(&self, power: usize) -> Real {
        self.coeffs.get(power).cloned().unwrap_or_else(Real::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.coeffs.iter().all(Real::is_exact)
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.numeric.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn eval_exact(&self, t: &Real) -> Real {
        self.coeffs.iter().rev().fold(Real::zero(), |acc, c| &(&acc * t) + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c * &Real::from_i64(k as i64)).collect())
    }

    /// Antiderivative vanishing at 0.
    pub fn antiderivative(&self) -> Polynomial {
        let mut out = vec![Real::zero()];
        out.extend(self.coeffs.iter().enumerate().map(|(k, c)| c / &Real::from_i64(k as i64 + 1)));
        Polynomial::new(out)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        Polynomial::new((0..len).map(|k| &self.coeff(k) + &other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(&Real::from_i64(-1)))
    }

    pub fn scale(&self, c: &Real) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|x| x * c).collect())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![Real::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = &out[i + j] + &(a * b);
            }
        }
        Polynomial::new(out)
    }

    pub fn pow(&self, exp: u32) -> Polynomial {
        (0..exp).fold(Polynomial::constant(Real::one()), |acc, _| acc.mul(self))
    }

    /// `self(inner(t))`
    pub fn compose(&self, inner: &Polynomial) -> Polynomial {
        self.coeffs.iter().rev().fold(Polynomial::zero(), |acc, c| acc.mul(inner).add(&Polynomial::constant(c.clone())))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            if !first {
                write!(f, " + ")?;
            }
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}·t")?,
                _ => write!(f, "{c}·t^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

/// Polynomial `Σ c_{νμ} t^ν s^μ`.
#[derive(Clone, Debug)]
pub struct BivariatePolynomial {
    terms: BTreeMap<(u32, u32), Real>,
    numeric: Vec<(i32, i32, f64)>,
}

impl PartialEq for BivariatePolynomial {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl BivariatePolynomial {
    pub fn new(terms: impl IntoIterator<Item = ((u32, u32), Real)>) -> Self {
        let mut map: BTreeMap<(u32, u32), Real> = BTreeMap::new();
        for (key, c) in terms {
            let entry = map.entry(key).or_insert_with(Real::zero);
            *entry = &*entry + &c;
        }
        map.retain(|_, c| !c.is_zero());
        let numeric = map.iter().map(|(&(nu, mu), c)| (nu as i32, mu as i32, c.to_f64())).collect();
        BivariatePolynomial { terms: map, numeric }
    }

    pub fn constant(c: Real) -> Self {
        BivariatePolynomial::new([((0, 0), c)])
    }

    pub fn terms(&self) -> &BTreeMap<(u32, u32), Real> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.terms.values().all(Real::is_exact)
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        self.numeric.iter().map(|&(nu, mu, c)| c * t.powi(nu) * s.powi(mu)).sum()
    }

    pub fn eval_exact(&self, t: &Real, s: &Real) -> Real {
        self.terms.iter().fold(Real::zero(), |acc, (&(nu, mu), c)| &acc + &(&(c * &t.powi(nu)) * &s.powi(mu)))
    }

    /// `∂/∂t`
    pub fn d_dt(&self) -> BivariatePolynomial {
        BivariatePolynomial::new(
            self.terms
                .iter()
                .filter(|(&(nu, _), _)| nu > 0)
                .map(|(&(nu, mu), c)| ((nu - 1, mu), c * &Real::from_i64(nu as i64))),
        )
    }

    /// `K(t, g(t))` as a polynomial in `t`.
    pub fn along(&self, g: &Polynomial) -> Polynomial {
        self.terms.iter().fold(Polynomial::zero(), |acc, (&(nu, mu), c)| {
            let mut term = g.pow(mu).scale(c);
            term = term.mul(&Polynomial::identity().pow(nu));
            acc.add(&term)
        })
    }

    /// `K(t, t)`
    pub fn diagonal(&self) -> Polynomial {
        self.along(&Polynomial::identity())
    }

    /// `K(0, 0)`
    pub fn at_origin(&self) -> Real {
        self.terms.get(&(0, 0)).cloned().unwrap_or_else(Real::zero)
    }
}

impl fmt::Display for BivariatePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(&(nu, mu), c)| match (nu, mu) {
                (0, 0) => format!("{c}"),
                (nu, 0) => format!("{c}·t^{nu}"),
                (0, mu) => format!("{c}·s^{mu}"),
                (nu, mu) => format!("{c}·t^{nu}·s^{mu}"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Boundary curve `s = α(t)` with `α(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFunction {
    poly: Polynomial,
    derivative: Polynomial,
}

impl BoundaryFunction {
    /// Builds `α(t) = c₁t + c₂t² + …` from `[c₁, c₂, …]`.
    pub fn from_coeffs(coeffs: Vec<Real>) -> Self {
        let mut all = vec![Real::zero()];
        all.extend(coeffs);
        BoundaryFunction::from_polynomial(Polynomial::new(all)).expect("constant term is zero by construction")
    }

    pub fn from_polynomial(poly: Polynomial) -> Result<Self> {
        if !poly.coeff(0).is_zero() {
            return Err(Error::InvalidBoundary(format!("α(0) = {} ≠ 0", poly.coeff(0))));
        }
        let derivative = poly.derivative();
        Ok(BoundaryFunction { poly, derivative })
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    pub fn derivative(&self) -> &Polynomial {
        &self.derivative
    }

    /// `α′(0)`
    pub fn slope_at_zero(&self) -> Real {
        self.poly.coeff(1)
    }

    pub fn is_linear(&self) -> bool {
        self.poly.degree() <= 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.poly.eval(t)
    }

    pub fn eval_derivative(&self, t: f64) -> f64 {
        self.derivative.eval(t)
    }
}

/// Cached polynomial quantities derived from the problem data.
#[derive(Clone, Debug, PartialEq)]
struct Derived {
    kernel_dt: Vec<BivariatePolynomial>,
    diagonal: Polynomial,
    /// `αᵢ′(t)·(Kᵢ(t,αᵢ(t)) − K_{i+1}(t,αᵢ(t)))`
    jumps: Vec<Polynomial>,
}

/// The tuple `(T, {αᵢ}, {Kᵢ}, f)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    horizon: Real,
    boundaries: Vec<BoundaryFunction>,
    kernels: Vec<BivariatePolynomial>,
    rhs: Polynomial,
    derived: Derived,
}

impl ProblemSpec {
    pub fn new(
        horizon: Real,
        boundaries: Vec<BoundaryFunction>,
        kernels: Vec<BivariatePolynomial>,
        rhs: Polynomial,
    ) -> Result<Self> {
        if kernels.len() != boundaries.len() + 1 || kernels.is_empty() {
            return Err(Error::PieceCountMismatch {
                kernels: kernels.len(),
                boundaries: boundaries.len(),
                expected: kernels.len().saturating_sub(1),
            });
        }
        if horizon.signum() <= 0 {
            return Err(Error::Parse { field: "T".into(), message: "must be positive".into() });
        }
        let kernel_dt = kernels.iter().map(BivariatePolynomial::d_dt).collect();
        let diagonal = kernels.last().expect("nonempty").diagonal();
        let jumps = boundaries
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let jump = kernels[i].along(b.polynomial()).sub(&kernels[i + 1].along(b.polynomial()));
                b.derivative().mul(&jump)
            })
            .collect();
        Ok(ProblemSpec { horizon, boundaries, kernels, rhs, derived: Derived { kernel_dt, diagonal, jumps } })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.to_f64()
    }

    pub fn horizon_exact(&self) -> &Real {
        &self.horizon
    }

    pub fn boundaries(&self) -> &[BoundaryFunction] {
        &self.boundaries
    }

    pub fn kernels(&self) -> &[BivariatePolynomial] {
        &self.kernels
    }

    pub fn rhs(&self) -> &Polynomial {
        &self.rhs
    }

    /// Number of kernel pieces `n`.
    pub fn pieces(&self) -> usize {
        self.kernels.len()
    }

    /// `∂Kᵢ/∂t` for every piece.
    pub fn kernel_dt(&self) -> &[BivariatePolynomial] {
        &self.derived.kernel_dt
    }

    /// `K_n(t,t)`
    pub fn diagonal(&self) -> &Polynomial {
        &self.derived.diagonal
    }

    /// Weights `αᵢ′(t)·(Kᵢ − K_{i+1})(t, αᵢ(t))` of the functional terms.
    pub fn jump_weights(&self) -> &[Polynomial] {
        &self.derived.jumps
    }

    /// True when every coefficient is an exact rational.
    pub fn is_exact(&self) -> bool {
        self.horizon.is_exact()
            && self.rhs.is_exact()
            && self.kernels.iter().all(BivariatePolynomial::is_exact)
            && self.boundaries.iter().all(|b| b.polynomial().is_exact())
    }

    /// Lower and upper sector limits of piece `i` (0-based) as polynomials.
    pub fn sector_limits(&self, i: usize) -> (Polynomial, Polynomial) {
        let lower = if i == 0 { Polynomial::zero() } else { self.boundaries[i - 1].polynomial().clone() };
        let upper =
            if i + 1 == self.pieces() { Polynomial::identity() } else { self.boundaries[i].polynomial().clone() };
        (lower, upper)
    }

    /// Numeric sector limits at `t`.
    pub fn sector_bounds(&self, i: usize, t: f64) -> (f64, f64) {
        let lower = if i == 0 { 0.0 } else { self.boundaries[i - 1].eval(t) };
        let upper = if i + 1 == self.pieces() { t } else { self.boundaries[i].eval(t) };
        (lower, upper)
    }

    /// Right-hand side of the differentiated equation:
    /// `f′(t) − ∂K₁(t,0)/∂t · f(0)/K₁(0,0)`.
    pub fn regular_rhs(&self) -> Result<Polynomial> {
        let a = singular_amplitude(self)?;
        let k1_dt_at_zero = self.kernel_dt()[0].along(&Polynomial::zero());
        Ok(self.rhs.derivative().sub(&k1_dt_at_zero.scale(&a)))
    }

    /// `f̄(t) = K_n(t,t)⁻¹ · regular_rhs(t)`.
    pub fn fbar(&self, t: f64) -> Result<f64> {
        let diag = self.diagonal().eval(t);
        if diag == 0.0 {
            return Err(Error::SingularDiagonal { t });
        }
        Ok(self.regular_rhs()?.eval(t) / diag)
    }
}

/// `f(0)/K₁(0,0)`
pub(crate) fn singular_amplitude(spec: &ProblemSpec) -> Result<Real> {
    let k = spec.kernels()[0].at_origin();
    if k.is_zero() {
        return Err(Error::NotCovered("K₁(0,0) = 0".into()));
    }
    Ok(&spec.rhs().coeff(0) / &k)
}

fn coefficient(value: &Value, field: &str) -> Result<Real> {
    match value {
        Value::Number(n) => {
            let text = n.to_string();
            parse_exact(&text).map(Real::Exact).ok_or_else(|| Error::Parse {
                field: field.to_string(),
                message: format!("cannot read number `{text}`"),
            })
        }
        Value::String(s) => parse_exact(s).map(Real::Exact).ok_or_else(|| Error::Unsupported {
            field: field.to_string(),
            message: format!("`{s}` is not a numeric or p/q coefficient; only polynomial data is accepted"),
        }),
        other => Err(Error::Parse {
            field: field.to_string(),
            message: format!("expected a number or \"p/q\" string, found {other}"),
        }),
    }
}

fn array<'a>(value: &'a Value, field: &str) -> Result<&'a Vec<Value>> {
    value.as_array().ok_or_else(|| Error::Parse { field: field.to_string(), message: "expected an array".into() })
}

fn exponent(value: &Value, field: &str) -> Result<u32> {
    value.as_u64().and_then(|v| u32::try_from(v).ok()).ok_or_else(|| Error::Parse {
        field: field.to_string(),
        message: format!("expected a nonnegative integer exponent, found {value}"),
    })
}

/// Reads a problem-spec JSON document.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::Parse { field: "<document>".into(), message: e.to_string() })?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::Parse { field: "<document>".into(), message: "expected a JSON object".into() })?;
    let get =
        |key: &str| obj.get(key).ok_or_else(|| Error::Parse { field: key.to_string(), message: "missing".into() });

    let horizon = coefficient(get("T")?, "T")?;

    let mut boundaries = Vec::new();
    for (i, b) in array(get("boundaries")?, "boundaries")?.iter().enumerate() {
        let field = format!("boundaries[{i}]");
        let coeffs = array(b, &field)?
            .iter()
            .enumerate()
            .map(|(k, c)| coefficient(c, &format!("{field}[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        boundaries.push(BoundaryFunction::from_coeffs(coeffs));
    }

    let mut kernels = Vec::new();
    for (i, k) in array(get("kernels")?, "kernels")?.iter().enumerate() {
        let field = format!("kernels[{i}]");
        let terms_value = k
            .get("terms")
            .ok_or_else(|| Error::Parse { field: format!("{field}.terms"), message: "missing".into() })?;
        let mut terms = Vec::new();
        for (m, term) in array(terms_value, &format!("{field}.terms"))?.iter().enumerate() {
            let tf = format!("{field}.terms[{m}]");
            let parts = array(term, &tf)?;
            if parts.len() != 3 {
                return Err(Error::Parse { field: tf, message: "expected [nu, mu, coeff]".into() });
            }
            let nu = exponent(&parts[0], &format!("{tf}[0]"))?;
            let mu = exponent(&parts[1], &format!("{tf}[1]"))?;
            let c = coefficient(&parts[2], &format!("{tf}[2]"))?;
            terms.push(((nu, mu), c));
        }
        kernels.push(BivariatePolynomial::new(terms));
    }

    let rhs = Polynomial::new(
        array(get("f")?, "f")?
            .iter()
            .enumerate()
            .map(|(k, c)| coefficient(c, &format!("f[{k}]")))
            .collect::<Result<Vec<_>>>()?,
    );

    ProblemSpec::new(horizon, boundaries, kernels, rhs)
}

/// Outcome of one hypothesis check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Point where the check failed, when it is a pointwise condition.
    pub witness: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, witness: Option<f64>) {
        self.checks.push(Check { name: name.into(), passed, witness });
    }
}

fn sub_digit(i: usize) -> String {
    const DIGITS: [char; 10] = ['₀', '₁', '₂', '₃', '₄', '₅', '₆', '₇', '₈', '₉'];
    i.to_string().chars().map(|c| DIGITS[c.to_digit(10).unwrap_or(0) as usize]).collect()
}

/// Checks the standing hypotheses on a grid of `grid_points` points in `(0, T]`.
pub fn validate(spec: &ProblemSpec, grid_points: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    let m = spec.boundaries().len();
    let slopes: Vec<Real> = spec.boundaries().iter().map(BoundaryFunction::slope_at_zero).collect();

    if let Some(first) = slopes.first() {
        report.push("α₁′(0) > 0", first.signum() > 0, None);
    }
    for i in 1..m {
        report.push(format!("α{}′(0) < α{}′(0)", sub_digit(i), sub_digit(i + 1)), slopes[i - 1] < slopes[i], None);
    }
    if let Some(last) = slopes.last() {
        report.push(format!("α{}′(0) < 1", sub_digit(m)), *last < Real::one(), None);
    }

    report.push("f(0) ≠ 0", !spec.rhs().coeff(0).is_zero(), None);
    report.push("K₁(0,0) ≠ 0", !spec.kernels()[0].at_origin().is_zero(), None);
    report.push("K_n(0,0) ≠ 0", !spec.diagonal().coeff(0).is_zero(), None);

    let grid = sample_grid(spec.horizon(), grid_points.max(1));
    let mut ordering_witness = None;
    let mut diagonal_witness = None;
    for &t in &grid {
        if ordering_witness.is_none() {
            let mut prev = 0.0;
            for b in spec.boundaries() {
                let a = b.eval(t);
                if !(a > prev) {
                    ordering_witness = Some(t);
                    break;
                }
                prev = a;
            }
            if ordering_witness.is_none() && !(prev < t) {
                ordering_witness = Some(t);
            }
        }
        if diagonal_witness.is_none() && spec.diagonal().eval(t) == 0.0 {
            diagonal_witness = Some(t);
        }
    }
    report.push("0 < α₁(t) < … < t", ordering_witness.is_none(), ordering_witness);
    report.push("K_n(t,t) ≠ 0", diagonal_witness.is_none(), diagonal_witness);
    report
}

/// `k·T/points` for `k = 1..=points`.
pub fn sample_grid(horizon: f64, points: usize) -> Vec<f64> {
    (1..=points).map(|k| horizon * k as f64 / points as f64).collect()
}

/// Piecewise kernel value at a point of the triangle `0 < s < t ≤ T`.
///
/// A point exactly on a boundary curve belongs to the lower-indexed piece.
pub fn kernel_value(spec: &ProblemSpec, t: f64, s: f64) -> Result<f64> {
    if !(t > 0.0 && t <= spec.horizon() && s > 0.0 && s < t) {
        return Err(Error::Domain(format!("(t, s) = ({t}, {s}) is outside 0 < s < t ≤ T")));
    }
    Ok(spec.kernels()[sector_index(spec, t, s)].eval(t, s))
}

/// Index of the sector containing `(t, s)`.
pub fn sector_index(spec: &ProblemSpec, t: f64, s: f64) -> usize {
    spec.boundaries().iter().position(|b| s <= b.eval(t)).unwrap_or(spec.pieces() - 1)
}

/// Analytic `∂Kᵢ/∂t` per piece.
pub fn kernel_time_derivative(spec: &ProblemSpec) -> Vec<BivariatePolynomial> {
    spec.kernel_dt().to_vec()
}

/// Signed weight `A(t) = Σ αᵢ′(t) K_n(t,t)⁻¹ (Kᵢ − K_{i+1})(t, αᵢ(t))`.
pub fn a_of_t(spec: &ProblemSpec, t: f64) -> Result<f64> {
    let diag = spec.diagonal().eval(t);
    if diag == 0.0 {
        return Err(Error::SingularDiagonal { t });
    }
    Ok(spec.jump_weights().iter().map(|w| w.eval(t)).sum::<f64>() / diag)
}

/// Constants certifying the contraction arguments.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConstants {
    /// Bound on `|A|` over the first interval, and target of the attenuated bound.
    pub q: f64,
    /// Sampled sup of `|K_n(t,t)⁻¹ ∂K/∂t(t,s)|`.
    pub c: f64,
    pub h1: f64,
    pub h: f64,
    pub eps: f64,
    pub eps_bound: f64,
    pub nstar: u32,
    pub t_prime: f64,
    /// `|A(0)|`
    pub a0: f64,
    /// Sampled sup of `|A|` on `(0, t_prime]`.
    pub sup_a: f64,
}

impl SolverConstants {
    /// The first-interval contraction is available.
    pub fn step_method_applicable(&self) -> bool {
        self.h > 0.0
    }
}

const CONTRACTION_SAFETY: f64 = 0.9;
const EPS_MARGIN: f64 = 0.9;
const NSTAR_CAP: u32 = 64;

/// Estimates the constants of the first-interval contraction and of the
/// attenuated condition from grid samples.
pub fn estimate_constants(spec: &ProblemSpec, target_q: f64, grid_points: usize) -> Result<SolverConstants> {
    if !(target_q > 0.0 && target_q < 1.0) {
        return Err(Error::Domain(format!("target q = {target_q} is not in (0, 1)")));
    }
    let horizon = spec.horizon();
    let points = grid_points.max(2);
    let grid: Vec<f64> = (0..=points).map(|k| horizon * k as f64 / points as f64).collect();
    let a_abs = |t: f64| a_of_t(spec, t).map(f64::abs);

    let a0 = a_abs(0.0)?;

    // h1: largest sampled prefix with sup|A| ≤ q, re-certified on a 10× finer grid.
    let mut h1 = 0.0;
    if a0 <= target_q {
        let mut last_ok = 0;
        for (k, &t) in grid.iter().enumerate().skip(1) {
            if a_abs(t)? > target_q {
                break;
            }
            last_ok = k;
        }
        let mut end = last_ok;
        while end > 0 {
            let fine = 10 * end;
            let step = grid[end] / fine as f64;
            let mut ok = true;
            for k in 0..=fine {
                if a_abs(k as f64 * step)? > target_q {
                    ok = false;
                    break;
                }
            }
            if ok {
                break;
            }
            end -= 1;
        }
        h1 = grid[end];
    }

    let mut c: f64 = 0.0;
    if spec.kernel_dt().iter().any(|k| !k.is_zero()) {
        for &t in grid.iter().skip(1) {
            let diag = spec.diagonal().eval(t);
            if diag == 0.0 {
                return Err(Error::SingularDiagonal { t });
            }
            for (i, dk) in spec.kernel_dt().iter().enumerate() {
                let (lo, hi) = spec.sector_bounds(i, t);
                for r in 0..=8 {
                    let s = lo + (hi - lo) * r as f64 / 8.0;
                    c = c.max((dk.eval(t, s) / diag).abs());
                }
            }
        }
    }
    let h = if h1 > 0.0 {
        let limit = if c > 0.0 { h1.min((1.0 - target_q) / c) } else { h1 };
        CONTRACTION_SAFETY * limit
    } else {
        0.0
    };

    let slope_sup = grid
        .iter()
        .flat_map(|&t| spec.boundaries().iter().map(move |b| b.eval_derivative(t).abs()))
        .fold(0.0, f64::max);
    let eps = if slope_sup == 0.0 {
        1.0
    } else if slope_sup < 1.0 {
        (EPS_MARGIN * (1.0 / slope_sup - 1.0)).min(1.0)
    } else {
        0.0
    };

    // Attenuation factor sup max(αᵢ(t)/t, |αᵢ′(t)|) over a prefix (0, T′].
    let ratio_at = |t: f64| {
        spec.boundaries()
            .iter()
            .map(|b| {
                let r = if t > 0.0 { b.eval(t) / t } else { b.slope_at_zero().to_f64() };
                r.max(b.eval_derivative(t).abs())
            })
            .fold(0.0, f64::max)
    };
    let eps0 = ratio_at(0.0);
    let whole = grid.iter().map(|&t| ratio_at(t)).fold(0.0, f64::max);
    let (eps_bound, t_prime) = if whole < 1.0 {
        (whole, horizon)
    } else if eps0 < 1.0 {
        let cap = 0.5 * (1.0 + eps0);
        let mut running = 0.0;
        let mut end = 0.0;
        for &t in &grid {
            let r = ratio_at(t);
            if r > cap {
                break;
            }
            running = f64::max(running, r);
            end = t;
        }
        (running, end)
    } else {
        (eps0, 0.0)
    };

    if a0 >= 1.0 && (eps_bound >= 1.0 || t_prime <= 0.0) {
        return Err(Error::NoValidConstants { a0, eps_bound });
    }

    let mut sup_a: f64 = 0.0;
    for &t in grid.iter().filter(|&&t| t <= t_prime) {
        sup_a = sup_a.max(a_abs(t)?);
    }
    let mut nstar = 0;
    while eps_bound.powi(nstar as i32) * sup_a >= target_q {
        nstar += 1;
        if nstar > NSTAR_CAP {
            return Err(Error::NoValidConstants { a0, eps_bound });
        }
    }

    Ok(SolverConstants { q: target_q, c, h1, h, eps, eps_bound, nstar, t_prime, a0, sup_a })
}

/// Default contraction target: 1/2 unless `|A(0)|` sits in `[1/2, 1)`, where
/// the midpoint between `|A(0)|` and 1 keeps the step method available.
pub fn default_target_q(spec: &ProblemSpec) -> Result<f64> {
    let a0 = a_of_t(spec, 0.0)?.abs();
    Ok(if (0.5..1.0).contains(&a0) { 0.5 * (1.0 + a0) } else { 0.5 })
}

//! Finite log-power polynomials `Σ c·tʲ·(ln t)ᵏ` truncated at a fixed order in `t`.
//!
//! Coefficients live in any [`Coeff`] ring: plain [`Real`] values or
//! [`AffineValue`](crate::scalar::AffineValue)s carrying free parameters.
//! Products are only formed against `Real`-coefficient polynomials (Taylor
//! data of the kernels), which is all the asymptotic construction needs.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{BoundaryFunction, Polynomial};
use crate::scalar::{Coeff, Real};

/// `Σ c_{jk} tʲ lnᵏ t` with every `j ≤ order`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogPowerPolynomial<C: Coeff = Real> {
    terms: BTreeMap<(u32, u32), C>,
    order: u32,
}

impl<C: Coeff> LogPowerPolynomial<C> {
    pub fn zero(order: u32) -> Self {
        LogPowerPolynomial { terms: BTreeMap::new(), order }
    }

    /// Collects `(j, k, c)` triples, summing duplicates and dropping `j > order`.
    pub fn from_terms(terms: impl IntoIterator<Item = ((u32, u32), C)>, order: u32) -> Self {
        let mut out = LogPowerPolynomial::zero(order);
        for (key, c) in terms {
            out.accumulate(key, &c);
        }
        out
    }

    pub fn monomial(j: u32, k: u32, c: C, order: u32) -> Self {
        LogPowerPolynomial::from_terms([((j, k), c)], order)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn terms(&self) -> &BTreeMap<(u32, u32), C> {
        &self.terms
    }

    pub fn coeff(&self, j: u32, k: u32) -> Option<&C> {
        self.terms.get(&(j, k))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest power of `ln t` present.
    pub fn log_degree(&self) -> u32 {
        self.terms.keys().map(|&(_, k)| k).max().unwrap_or(0)
    }

    /// Highest power of `t` present.
    pub fn max_power(&self) -> Option<u32> {
        self.terms.keys().map(|&(j, _)| j).max()
    }

    fn accumulate(&mut self, key: (u32, u32), c: &C) {
        if key.0 > self.order || c.is_zero() {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(existing) => {
                let sum = existing.add(c);
                if sum.is_zero() {
                    self.terms.remove(&key);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(key, c.clone());
            }
        }
    }

    /// Drops every term with `j > order`.
    pub fn truncate(&self, order: u32) -> Self {
        let order = order.min(self.order);
        LogPowerPolynomial {
            terms: self.terms.iter().filter(|(&(j, _), _)| j <= order).map(|(k, c)| (*k, c.clone())).collect(),
            order,
        }
    }

    /// Same terms with a different truncation order (terms above it are dropped).
    pub fn with_order(&self, order: u32) -> Self {
        LogPowerPolynomial {
            terms: self.terms.iter().filter(|(&(j, _), _)| j <= order).map(|(k, c)| (*k, c.clone())).collect(),
            order,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.truncate(self.order.min(other.order));
        for (key, c) in &other.terms {
            out.accumulate(*key, c);
        }
        out
    }

    pub fn neg(&self) -> Self {
        LogPowerPolynomial { terms: self.terms.iter().map(|(k, c)| (*k, c.neg())).collect(), order: self.order }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, factor: &Real) -> Self {
        LogPowerPolynomial::from_terms(self.terms.iter().map(|(k, c)| (*k, c.scale(factor))), self.order)
    }

    /// Product with a `Real`-coefficient polynomial, truncated to the smaller order.
    pub fn mul(&self, other: &LogPowerPolynomial<Real>) -> Self {
        let order = self.order.min(other.order);
        let mut out = LogPowerPolynomial::zero(order);
        for (&(j1, k1), c1) in &self.terms {
            for (&(j2, k2), c2) in &other.terms {
                if j1 + j2 <= order {
                    out.accumulate((j1 + j2, k1 + k2), &c1.scale(c2));
                }
            }
        }
        out
    }

    /// `∫₀ᵗ p(s) ds`, term by term with
    /// `∫ tʲ lnᵏ t dt = t^{j+1} Σₛ (−1)ˢ k!/(k−s)! /(j+1)^{s+1} ln^{k−s} t`.
    ///
    /// Terms pushed beyond the truncation order are dropped.
    pub fn integrate_from_zero(&self) -> Self {
        let mut out = LogPowerPolynomial::zero(self.order);
        for (&(j, k), c) in &self.terms {
            if j + 1 > self.order {
                continue;
            }
            let base = Real::from_i64(j as i64 + 1);
            let mut falling = Real::one();
            for s in 0..=k {
                if s > 0 {
                    falling = &falling * &Real::from_i64((k - s + 1) as i64);
                }
                let sign = if s % 2 == 0 { Real::one() } else { Real::from_i64(-1) };
                let factor = &(&sign * &falling) / &base.powi(s + 1);
                out.accumulate((j + 1, k - s), &c.scale(&factor));
            }
        }
        out
    }

    /// `d/dt`, keeping the truncation order.
    pub fn differentiate(&self) -> Result<Self> {
        let mut out = LogPowerPolynomial::zero(self.order);
        for (&(j, k), c) in &self.terms {
            if j == 0 {
                if k > 0 {
                    return Err(Error::NonPolynomialDerivative { k });
                }
                continue;
            }
            out.accumulate((j - 1, k), &c.scale(&Real::from_i64(j as i64)));
            if k > 0 {
                out.accumulate((j - 1, k - 1), &c.scale(&Real::from_i64(k as i64)));
            }
        }
        Ok(out)
    }

    /// `p(α(t))` expanded with `ln α(t) = ln t + ln α′(0) + ln(α(t)/(α′(0)t))`.
    pub fn substitute_boundary(&self, alpha: &BoundaryFunction, order: u32) -> Result<Self> {
        let order = order.min(self.order);
        let sub = BoundarySubstitution::new(alpha, order, self.log_degree())?;
        let mut out = LogPowerPolynomial::zero(order);
        for (&(j, k), c) in &self.terms {
            if j > order {
                continue;
            }
            let factor = sub.power(j).mul(sub.log_power(k));
            for (key, r) in &factor.terms {
                out.accumulate(*key, &c.scale(r));
            }
        }
        Ok(out)
    }

    /// Coefficient of `tʲ` as a polynomial in `z = ln t`.
    pub fn coefficient_of_power(&self, j: u32) -> ZPolynomial<C> {
        let degree = self.terms.keys().filter(|&&(jj, _)| jj == j).map(|&(_, k)| k as usize + 1).max().unwrap_or(0);
        let mut coeffs = vec![C::zero(); degree];
        for (&(jj, k), c) in &self.terms {
            if jj == j {
                coeffs[k as usize] = c.clone();
            }
        }
        ZPolynomial::new(coeffs)
    }

    /// `p(z)·tʲ` with `z = ln t`.
    pub fn from_z_polynomial(p: &ZPolynomial<C>, j: u32, order: u32) -> Self {
        LogPowerPolynomial::from_terms(p.coeffs().iter().enumerate().map(|(k, c)| ((j, k as u32), c.clone())), order)
    }

    /// Removes the `tʲ` terms.
    pub fn drop_power(&mut self, j: u32) {
        self.terms.retain(|&(jj, _), _| jj != j);
    }

    pub fn try_map<D: Coeff>(&self, mut f: impl FnMut(&C) -> Result<D>) -> Result<LogPowerPolynomial<D>> {
        let mut out = LogPowerPolynomial::zero(self.order);
        for (key, c) in &self.terms {
            out.accumulate(*key, &f(c)?);
        }
        Ok(out)
    }

    pub fn map<D: Coeff>(&self, mut f: impl FnMut(&C) -> D) -> LogPowerPolynomial<D> {
        let mut out = LogPowerPolynomial::zero(self.order);
        for (key, c) in &self.terms {
            out.accumulate(*key, &f(c));
        }
        out
    }
}

impl LogPowerPolynomial<Real> {
    pub fn from_polynomial(p: &Polynomial, order: u32) -> Self {
        LogPowerPolynomial::from_terms(p.coeffs().iter().enumerate().map(|(j, c)| ((j as u32, 0), c.clone())), order)
    }

    pub fn constant(c: Real, order: u32) -> Self {
        LogPowerPolynomial::monomial(0, 0, c, order)
    }

    /// `Σ c tʲ lnᵏ t` at `t > 0`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("log-power evaluation needs t > 0, got {t}")));
        }
        let ln = t.ln();
        Ok(self.terms.iter().map(|(&(j, k), c)| c.to_f64() * t.powi(j as i32) * ln.powi(k as i32)).sum())
    }

    pub fn is_exact(&self) -> bool {
        self.terms.values().all(Real::is_exact)
    }

    /// The polynomial part when no logarithms are present.
    pub fn as_polynomial(&self) -> Option<Polynomial> {
        if self.log_degree() > 0 {
            return None;
        }
        let len = self.max_power().map_or(0, |j| j as usize + 1);
        let mut coeffs = vec![Real::zero(); len];
        for (&(j, _), c) in &self.terms {
            coeffs[j as usize] = c.clone();
        }
        Some(Polynomial::new(coeffs))
    }
}

/// Cached pieces of `t ↦ α(t)` in log-power form.
struct BoundarySubstitution {
    powers: Vec<LogPowerPolynomial<Real>>,
    log_powers: Vec<LogPowerPolynomial<Real>>,
}

impl BoundarySubstitution {
    fn new(alpha: &BoundaryFunction, order: u32, max_log: u32) -> Result<Self> {
        let slope = alpha.slope_at_zero();
        if slope.signum() <= 0 {
            return Err(Error::InvalidBoundary(format!("α′(0) = {slope} must be positive")));
        }
        let alpha_lp = LogPowerPolynomial::from_polynomial(alpha.polynomial(), order);
        let mut powers = vec![LogPowerPolynomial::constant(Real::one(), order)];
        for _ in 0..order {
            let next = powers.last().expect("nonempty").mul(&alpha_lp);
            powers.push(next);
        }

        let mut log_powers = vec![LogPowerPolynomial::constant(Real::one(), order)];
        if max_log > 0 {
            // u(t) = α(t)/(α′(0) t) − 1, a polynomial without constant term.
            let u = LogPowerPolynomial::from_terms(
                alpha.polynomial().coeffs().iter().enumerate().skip(2).map(|(m, c)| (((m - 1) as u32, 0), c / &slope)),
                order,
            );
            let mut series = LogPowerPolynomial::zero(order);
            let mut u_pow = LogPowerPolynomial::constant(Real::one(), order);
            for r in 1..=order {
                u_pow = u_pow.mul(&u);
                if u_pow.is_zero() {
                    break;
                }
                let sign = if r % 2 == 1 { 1 } else { -1 };
                series = series.add(&u_pow.scale(&Real::ratio(sign, r as i64)));
            }
            let shift = slope.try_ln().expect("positive slope");
            let log_alpha =
                LogPowerPolynomial::from_terms([((0, 1), Real::one()), ((0, 0), shift)], order).add(&series);
            for _ in 0..max_log {
                let next = log_powers.last().expect("nonempty").mul(&log_alpha);
                log_powers.push(next);
            }
        }
        Ok(BoundarySubstitution { powers, log_powers })
    }

    fn power(&self, j: u32) -> &LogPowerPolynomial<Real> {
        &self.powers[j as usize]
    }

    fn log_power(&self, k: u32) -> &LogPowerPolynomial<Real> {
        &self.log_powers[k as usize]
    }
}

impl<C: Coeff + fmt::Display> fmt::Display for LogPowerPolynomial<C> {
    /// Stable `(j,k): coeff` listing sorted by `(j, k)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(|(&(j, k), c)| format!("({j},{k}): {c}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Polynomial in `z = ln t`, ascending powers.
#[derive(Clone, Debug, PartialEq)]
pub struct ZPolynomial<C: Coeff = Real> {
    coeffs: Vec<C>,
}

impl<C: Coeff> ZPolynomial<C> {
    pub fn new(mut coeffs: Vec<C>) -> Self {
        while coeffs.last().is_some_and(C::is_zero) {
            coeffs.pop();
        }
        ZPolynomial { coeffs }
    }

    pub fn zero() -> Self {
        ZPolynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: C) -> Self {
        ZPolynomial::new(vec![c])
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> C {
        self.coeffs.get(k).cloned().unwrap_or_else(C::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        ZPolynomial::new((0..len).map(|k| self.coeff(k).add(&other.coeff(k))).collect())
    }

    pub fn neg(&self) -> Self {
        ZPolynomial { coeffs: self.coeffs.iter().map(C::neg).collect() }
    }

    pub fn scale(&self, factor: &Real) -> Self {
        ZPolynomial::new(self.coeffs.iter().map(|c| c.scale(factor)).collect())
    }

    /// `p(z + a)`
    pub fn shift(&self, a: &Real) -> Self {
        let n = self.coeffs.len();
        let mut out = vec![C::zero(); n];
        for (k, c) in self.coeffs.iter().enumerate() {
            let mut binom = Real::one();
            let mut a_pow = Real::one();
            // z^k → Σ_r C(k,r) a^r z^{k−r}
            for r in 0..=k {
                if r > 0 {
                    binom = &(&binom * &Real::from_i64((k - r + 1) as i64)) / &Real::from_i64(r as i64);
                    a_pow = &a_pow * a;
                }
                out[k - r] = out[k - r].add(&c.scale(&(&binom * &a_pow)));
            }
        }
        ZPolynomial::new(out)
    }

    /// Largest coefficient magnitude.
    pub fn magnitude(&self) -> f64 {
        self.coeffs.iter().map(C::magnitude).fold(0.0, f64::max)
    }
}

impl ZPolynomial<Real> {
    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{AffineValue, ParamId};

    fn lp(terms: &[((u32, u32), i64)], order: u32) -> LogPowerPolynomial {
        LogPowerPolynomial::from_terms(terms.iter().map(|&(k, c)| (k, Real::from_i64(c))), order)
    }

    #[test]
    fn add_and_scale() {
        let a = lp(&[((1, 1), 1)], 4);
        assert!(a.add(&a.neg()).is_zero());
        assert_eq!(lp(&[((2, 0), 1)], 4).scale(&Real::from_i64(3)), lp(&[((2, 0), 3)], 4));
        let sum = lp(&[((0, 0), 1), ((1, 0), 1)], 4).add(&lp(&[((1, 1), 1)], 4));
        assert_eq!(sum.terms().len(), 3);
        assert_eq!(sum.to_string(), "{(0,0): 1, (1,0): 1, (1,1): 1}");
    }

    #[test]
    fn add_truncates_to_smaller_order() {
        let a = lp(&[((3, 0), 1)], 4);
        let b = lp(&[((1, 0), 1)], 2);
        assert_eq!(a.add(&b), lp(&[((1, 0), 1)], 2));
    }

    #[test]
    fn multiply_adds_exponents_and_truncates() {
        let a = lp(&[((1, 1), 1)], 4);
        assert_eq!(a.mul(&a), lp(&[((2, 2), 1)], 4));
        assert_eq!(a.mul(&LogPowerPolynomial::constant(Real::one(), 4)), a);
        let p = lp(&[((0, 0), 1), ((1, 0), 1)], 1);
        let q = lp(&[((0, 0), 1), ((1, 0), -1)], 1);
        assert_eq!(p.mul(&q), lp(&[((0, 0), 1)], 1));
    }

    #[test]
    fn integrates_log_powers() {
        assert_eq!(lp(&[((0, 0), 1)], 4).integrate_from_zero(), lp(&[((1, 0), 1)], 4));
        assert_eq!(lp(&[((0, 1), 1)], 4).integrate_from_zero(), lp(&[((1, 1), 1), ((1, 0), -1)], 4));
        // ∫ t ln²t = t²(ln²t/2 − ln t/2 + 1/4)
        let expected = LogPowerPolynomial::from_terms(
            [((2, 2), Real::ratio(1, 2)), ((2, 1), Real::ratio(-1, 2)), ((2, 0), Real::ratio(1, 4))],
            4,
        );
        let result = lp(&[((1, 2), 1)], 4).integrate_from_zero();
        assert_eq!(result, expected);
        assert_eq!(result.differentiate().unwrap(), lp(&[((1, 2), 1)], 4));
    }

    #[test]
    fn differentiates_term_by_term() {
        let p = lp(&[((1, 1), 1), ((1, 0), -1)], 4);
        assert_eq!(p.differentiate().unwrap(), lp(&[((0, 1), 1)], 4));
        assert_eq!(lp(&[((2, 0), 1)], 4).differentiate().unwrap(), lp(&[((1, 0), 2)], 4));
        assert_eq!(lp(&[((0, 1), 1)], 4).differentiate(), Err(Error::NonPolynomialDerivative { k: 1 }));
    }

    #[test]
    fn evaluates_and_rejects_nonpositive_time() {
        let ln = lp(&[((0, 1), 1)], 2);
        assert!((ln.evaluate((-1.0f64).exp()).unwrap() + 1.0).abs() < 1e-15);
        let two_thirds = LogPowerPolynomial::constant(Real::ratio(2, 3), 2);
        assert_eq!(two_thirds.evaluate(0.37).unwrap(), 2.0 / 3.0);
        let ex2 = LogPowerPolynomial::monomial(0, 1, Real::Float(-1.0 / std::f64::consts::LN_2), 2);
        assert!((ex2.evaluate(0.25).unwrap() - 2.0).abs() < 1e-15);
        assert!(ln.evaluate(0.0).is_err());
    }

    #[test]
    fn substitutes_linear_boundary() {
        let alpha = BoundaryFunction::from_coeffs(vec![Real::ratio(1, 2)]);
        let ln = lp(&[((0, 1), 1)], 3);
        let sub = ln.substitute_boundary(&alpha, 3).unwrap();
        assert_eq!(sub.coeff(0, 1), Some(&Real::one()));
        assert!((sub.coeff(0, 0).unwrap().to_f64() + std::f64::consts::LN_2).abs() < 1e-15);
        let t = lp(&[((1, 0), 1)], 3);
        assert_eq!(t.substitute_boundary(&alpha, 3).unwrap(), LogPowerPolynomial::monomial(1, 0, Real::ratio(1, 2), 3));
    }

    #[test]
    fn substitutes_nonlinear_boundary_to_order() {
        // p = t ln t, α = t/2 + t², compared with direct evaluation of p(α(t)).
        let alpha = BoundaryFunction::from_coeffs(vec![Real::ratio(1, 2), Real::one()]);
        let n = 2;
        let p = lp(&[((1, 1), 1)], n);
        let sub = p.substitute_boundary(&alpha, n).unwrap();
        let err = |t: f64| {
            let a = alpha.eval(t);
            ((a * a.ln()) - sub.evaluate(t).unwrap()).abs()
        };
        // remainder is O(t^{n+1} ln t)
        let (e3, e4) = (err(1e-3), err(1e-4));
        let slope = (e3 / e4).log10();
        assert!(slope > n as f64 + 1.0 - 0.2, "slope {slope}");
    }

    #[test]
    fn substitution_rejects_nonpositive_slope() {
        let alpha = BoundaryFunction::from_coeffs(vec![Real::zero(), Real::one()]);
        let p = lp(&[((1, 0), 1)], 2);
        assert!(matches!(p.substitute_boundary(&alpha, 2), Err(Error::InvalidBoundary(_))));
    }

    #[test]
    fn affine_coefficients_flow_through() {
        let c = AffineValue::parameter(ParamId(0));
        let p = LogPowerPolynomial::monomial(0, 0, c.clone(), 2);
        let q = p.mul(&lp(&[((1, 0), 2)], 2)).integrate_from_zero();
        assert_eq!(q.coeff(2, 0), Some(&c.scale(&Real::one())));
    }

    #[test]
    fn z_polynomial_shift() {
        // (z + 1)² = z² + 2z + 1
        let p = ZPolynomial::new(vec![Real::zero(), Real::zero(), Real::one()]);
        assert_eq!(p.shift(&Real::one()), ZPolynomial::new(vec![Real::one(), Real::from_i64(2), Real::one()]));
        assert_eq!(ZPolynomial::<Real>::zero().degree(), None);
    }
}

//! Strategies and property checks shared by the property suite and the
//! acceptance runner.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use pwvie::characteristic::{char_derivative, char_value};
use pwvie::logpower::LogPowerPolynomial;
use pwvie::model::{BivariatePolynomial, BoundaryFunction, Polynomial, ProblemSpec};
use pwvie::scalar::Real;

pub type Lp = LogPowerPolynomial<Real>;

pub const MAX_ORDER: u32 = 4;
pub const MAX_LOG: u32 = 3;

pub fn rational() -> impl Strategy<Value = Real> {
    (-9i64..=9, 1i64..=6).prop_map(|(n, d)| Real::ratio(n, d))
}

pub fn logpower_with(order: u32, max_power: u32) -> impl Strategy<Value = Lp> {
    prop::collection::vec(((0..=max_power), (0..=MAX_LOG), rational()), 0..6)
        .prop_map(move |terms| Lp::from_terms(terms.into_iter().map(|(j, k, c)| ((j, k), c)), order))
}

pub fn logpower() -> impl Strategy<Value = Lp> {
    (1..=MAX_ORDER).prop_flat_map(|order| logpower_with(order, order))
}

/// Three polynomials sharing one truncation order.
pub fn triple() -> impl Strategy<Value = (Lp, Lp, Lp)> {
    (1..=MAX_ORDER)
        .prop_flat_map(|order| (logpower_with(order, order), logpower_with(order, order), logpower_with(order, order)))
}

/// Polynomials whose powers stay below the truncation order.
pub fn integrable() -> impl Strategy<Value = Lp> {
    (1..=MAX_ORDER).prop_flat_map(|order| logpower_with(order, order - 1))
}

pub fn ring_laws((p, q, r): (Lp, Lp, Lp)) -> Result<(), TestCaseError> {
    prop_assert_eq!(p.add(&q), q.add(&p));
    prop_assert_eq!(p.add(&q).add(&r), p.add(&q.add(&r)));
    prop_assert!(p.sub(&p).is_zero());
    prop_assert_eq!(p.mul(&q), q.mul(&p));
    prop_assert_eq!(p.mul(&q).mul(&r), p.mul(&q.mul(&r)));
    prop_assert_eq!(p.mul(&q.add(&r)), p.mul(&q).add(&p.mul(&r)));
    prop_assert_eq!(p.mul(&Lp::constant(Real::one(), p.order())), p.clone());
    Ok(())
}

pub fn truncation_commutes((p, q, cut): (Lp, Lp, u32)) -> Result<(), TestCaseError> {
    let cut = cut.min(p.order());
    prop_assert_eq!(p.add(&q).truncate(cut), p.truncate(cut).add(&q.truncate(cut)));
    prop_assert_eq!(p.mul(&q).truncate(cut), p.truncate(cut).mul(&q.truncate(cut)));
    Ok(())
}

pub fn round_trip(p: Lp) -> Result<(), TestCaseError> {
    prop_assert_eq!(p.integrate_from_zero().differentiate().unwrap(), p);
    Ok(())
}

/// `∫ tʲ lnᵏ t dt` built from integration by parts,
/// `t^{j+1} lnᵏ t/(j+1) − k/(j+1) ∫ tʲ ln^{k−1} t dt`.
fn by_parts(j: u32, k: u32, order: u32) -> Lp {
    let head = Lp::monomial(j + 1, k, Real::ratio(1, j as i64 + 1), order);
    if k == 0 {
        head
    } else {
        head.sub(&by_parts(j, k - 1, order).scale(&Real::ratio(k as i64, j as i64 + 1)))
    }
}

pub fn integration_identity((j, k, c): (u32, u32, Real)) -> Result<(), TestCaseError> {
    let integral = Lp::monomial(j, k, c.clone(), MAX_ORDER).integrate_from_zero();
    prop_assert_eq!(integral, by_parts(j, k, MAX_ORDER).scale(&c));
    Ok(())
}

pub fn identity_input() -> impl Strategy<Value = (u32, u32, Real)> {
    (0u32..MAX_ORDER, 0..=MAX_LOG, rational())
}

pub fn linear_substitution_input() -> impl Strategy<Value = (Lp, Real, f64)> {
    (logpower(), (1i64..=7, 8i64..=16).prop_map(|(n, d)| Real::ratio(n, d)), 0.01f64..1.0)
}

pub fn linear_substitution((p, slope, t): (Lp, Real, f64)) -> Result<(), TestCaseError> {
    let alpha = BoundaryFunction::from_coeffs(vec![slope.clone()]);
    let substituted = p.substitute_boundary(&alpha, p.order()).unwrap().evaluate(t).unwrap();
    let direct = p.evaluate(slope.to_f64() * t).unwrap();
    let scale = substituted.abs().max(direct.abs()).max(1.0);
    prop_assert!((substituted - direct).abs() <= 1e-12 * scale, "{substituted} vs {direct}");
    Ok(())
}

pub fn curved_substitution_input() -> impl Strategy<Value = (Lp, i64)> {
    (logpower_with(2, 2).prop_filter("nonzero", |p| !p.is_zero()), (-4i64..=4).prop_filter("curved", |c| *c != 0))
}

/// For a curved boundary the truncated substitution differs from `p(α(t))`
/// by `O(t^{N+1} lnᴷ t)`, `K` the log degree of `p`.
pub fn curved_substitution((p, curvature): (Lp, i64)) -> Result<(), TestCaseError> {
    let order = 2u32;
    let alpha = BoundaryFunction::from_coeffs(vec![Real::ratio(1, 2), Real::ratio(curvature, 8)]);
    let substituted = p.substitute_boundary(&alpha, order).unwrap();
    let raw = |t: f64| (substituted.evaluate(t).unwrap() - p.evaluate(alpha.eval(t)).unwrap()).abs();
    // Dividing out the log factor leaves the pure power.
    let gap = |t: f64| raw(t) / t.ln().abs().powi(p.log_degree() as i32);
    // A gap is resolvable when it clears the rounding floor of evaluating `p`.
    let resolvable = |t: f64| raw(t) > 1e3 * f64::EPSILON * p.evaluate(t).unwrap().abs().max(1.0);
    let (near, far) = if resolvable(1e-4) { (1e-4, 1e-3) } else { (1e-3, 1e-2) };
    let max_j = p.max_power().unwrap_or(0) as f64;
    if resolvable(near) {
        let slope = (gap(far) / gap(near)).log10();
        prop_assert!(slope >= order as f64 + 1.0 - max_j - 0.1, "slope {slope}");
    } else {
        prop_assert!(raw(1e-2) <= 1e-6, "gap {} at t = 1e-2", raw(1e-2));
    }
    Ok(())
}

/// Specs with up to three linear boundaries and constant kernels, plus a
/// point `j` at which to differentiate `B`.
pub fn characteristic_input() -> impl Strategy<Value = (ProblemSpec, f64)> {
    (prop::collection::btree_set(1i64..=19, 1..=3), prop::collection::vec(-3i64..=3, 4), 0.0f64..4.0).prop_map(
        |(slopes, jumps, j)| {
            let boundaries: Vec<_> =
                slopes.iter().map(|&n| BoundaryFunction::from_coeffs(vec![Real::ratio(n, 20)])).collect();
            let kernels = (0..=boundaries.len())
                .map(|i| {
                    let value = if i == boundaries.len() { 1 + jumps[i].abs() } else { jumps[i] };
                    BivariatePolynomial::constant(Real::from_i64(value))
                })
                .collect();
            let spec = ProblemSpec::new(Real::one(), boundaries, kernels, Polynomial::from_ints(&[1])).unwrap();
            (spec, j)
        },
    )
}

pub fn characteristic_derivative((spec, j): (ProblemSpec, f64)) -> Result<(), TestCaseError> {
    let h = 1e-5;
    let numeric = (char_value(&spec, j + h) - char_value(&spec, j - h)) / (2.0 * h);
    let analytic = char_derivative(&spec, j, 1);
    prop_assert!((analytic - numeric).abs() <= 1e-6, "{analytic} vs {numeric}");
    Ok(())
}

/// Runs `check` on `cases` values drawn from `strategy` with a fixed seed.
pub fn run_cases<S: Strategy>(
    cases: u32,
    strategy: S,
    check: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, check).map_err(|e| e.to_string())
}

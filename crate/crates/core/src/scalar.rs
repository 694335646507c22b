//! Scalar types shared by the symbolic and numeric layers.
//!
//! [`Real`] keeps problem data exact (arbitrary precision rationals) for as
//! long as the algebra allows and falls back to `f64` the moment an
//! irrational quantity such as `ln α'(0)` enters. [`AffineValue`] carries the
//! free parameters of a parametric solution family through that algebra.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A real number that is exact while the inputs are.
#[derive(Clone, Debug)]
pub enum Real {
    Exact(BigRational),
    Float(f64),
}

impl Real {
    pub fn zero() -> Self {
        Real::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Real::Exact(BigRational::one())
    }

    pub fn from_i64(v: i64) -> Self {
        Real::Exact(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Real::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Exact binary value of a finite float.
    pub fn exact_from_f64(v: f64) -> Option<Self> {
        BigRational::from_float(v).map(Real::Exact)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Real::Exact(r) => r.is_zero(),
            Real::Float(f) => *f == 0.0,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(r) => rational_to_f64(r),
            Real::Float(f) => *f,
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Real::Exact(r) => Some(r),
            Real::Float(_) => None,
        }
    }

    pub fn abs(&self) -> Self {
        match self {
            Real::Exact(r) => Real::Exact(r.abs()),
            Real::Float(f) => Real::Float(f.abs()),
        }
    }

    pub fn signum(&self) -> i32 {
        match self {
            Real::Exact(r) if r.is_positive() => 1,
            Real::Exact(r) if r.is_negative() => -1,
            Real::Exact(_) => 0,
            Real::Float(f) if *f > 0.0 => 1,
            Real::Float(f) if *f < 0.0 => -1,
            Real::Float(_) => 0,
        }
    }

    pub fn powi(&self, exp: u32) -> Self {
        match self {
            Real::Exact(r) => Real::Exact(num_traits::pow(r.clone(), exp as usize)),
            Real::Float(f) => Real::Float(f.powi(exp as i32)),
        }
    }

    /// Natural logarithm; `ln 1` stays exact, everything else becomes a float.
    pub fn try_ln(&self) -> Option<Self> {
        match self.signum() {
            1 => {}
            _ => return None,
        }
        match self {
            Real::Exact(r) if r.is_one() => Some(Real::zero()),
            other => Some(Real::Float(ln_f64(other))),
        }
    }

    pub fn recip(&self) -> Self {
        Real::one() / self.clone()
    }
}

fn ln_f64(v: &Real) -> f64 {
    match v {
        Real::Exact(r) => {
            // ln(p/q) = ln p - ln q keeps precision for huge numerators/denominators.
            let p = r.numer().to_f64().unwrap_or(f64::INFINITY);
            let q = r.denom().to_f64().unwrap_or(f64::INFINITY);
            if p.is_finite() && q.is_finite() {
                p.ln() - q.ln()
            } else {
                rational_to_f64(r).ln()
            }
        }
        Real::Float(f) => f.ln(),
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(p), Some(q)) if p.is_finite() && q.is_finite() => p / q,
        _ => r.to_f64().unwrap_or(f64::NAN),
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => a == b,
            _ => self.to_f64() == other.to_f64(),
        }
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => a.partial_cmp(b),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real::Float(v)
    }
}

impl From<i64> for Real {
    fn from(v: i64) -> Self {
        Real::from_i64(v)
    }
}

impl From<BigRational> for Real {
    fn from(v: BigRational) -> Self {
        Real::Exact(v)
    }
}

macro_rules! real_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                match (self, rhs) {
                    (Real::Exact(a), Real::Exact(b)) => Real::Exact(a $op b),
                    (a, b) => Real::Float(a.to_f64() $op b.to_f64()),
                }
            }
        }
        impl<'a> $trait<&'a Real> for &'a Real {
            type Output = Real;
            fn $method(self, rhs: &'a Real) -> Real {
                match (self, rhs) {
                    (Real::Exact(a), Real::Exact(b)) => Real::Exact(a $op b),
                    (a, b) => Real::Float(a.to_f64() $op b.to_f64()),
                }
            }
        }
    };
}

real_binop!(Add, add, +);
real_binop!(Sub, sub, -);
real_binop!(Mul, mul, *);

impl Div for Real {
    type Output = Real;
    fn div(self, rhs: Real) -> Real {
        &self / &rhs
    }
}

impl<'a> Div<&'a Real> for &'a Real {
    type Output = Real;
    fn div(self, rhs: &'a Real) -> Real {
        match (self, rhs) {
            (Real::Exact(a), Real::Exact(b)) if !b.is_zero() => Real::Exact(a / b),
            (a, b) => Real::Float(a.to_f64() / b.to_f64()),
        }
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        match self {
            Real::Exact(a) => Real::Exact(-a),
            Real::Float(f) => Real::Float(-f),
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Real::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Real::Float(v) => write!(f, "{v}"),
        }
    }
}

/// Parses `"p/q"`, an integer, or a decimal literal (optionally with an
/// exponent) into an exact rational.
pub fn parse_exact(text: &str) -> Option<BigRational> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_decimal(p.trim())?;
        let q = parse_decimal(q.trim())?;
        if q.is_zero() {
            return None;
        }
        return Some(p / q);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer: BigInt = all_digits.parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Identifier of a free parameter of the solution family, shown as `c1, c2, …`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub u32);

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0 + 1)
    }
}

impl ParamId {
    /// Inverse of the `Display` form.
    pub fn parse(name: &str) -> Option<Self> {
        let idx: u32 = name.strip_prefix('c')?.parse().ok()?;
        idx.checked_sub(1).map(ParamId)
    }
}

/// `constant + Σ coeff·param`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineValue {
    pub constant: Real,
    pub linear: BTreeMap<ParamId, Real>,
}

impl AffineValue {
    pub fn constant(value: Real) -> Self {
        AffineValue { constant: value, linear: BTreeMap::new() }
    }

    pub fn parameter(id: ParamId) -> Self {
        let mut linear = BTreeMap::new();
        linear.insert(id, Real::one());
        AffineValue { constant: Real::zero(), linear }
    }

    pub fn is_constant(&self) -> bool {
        self.linear.is_empty()
    }

    pub fn parameters(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.linear.keys().copied()
    }

    /// Substitutes numeric values for every parameter.
    pub fn bind(&self, params: &BTreeMap<ParamId, Real>) -> Result<Real> {
        let mut acc = self.constant.clone();
        for (id, coeff) in &self.linear {
            let value = params.get(id).ok_or_else(|| Error::MissingParameter(id.to_string()))?;
            acc = acc + coeff * value;
        }
        Ok(acc)
    }

    /// Largest absolute value among the constant and linear coefficients.
    pub fn magnitude(&self) -> f64 {
        self.linear.values().map(|c| c.to_f64().abs()).fold(self.constant.to_f64().abs(), f64::max)
    }

    fn normalized(mut self) -> Self {
        self.linear.retain(|_, c| !c.is_zero());
        self
    }
}

impl fmt::Display for AffineValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        if !self.constant.is_zero() || self.linear.is_empty() {
            write!(f, "{}", self.constant)?;
            first = false;
        }
        for (id, c) in &self.linear {
            let neg = c.signum() < 0;
            let mag = c.abs();
            let sep = match (first, neg) {
                (true, true) => "-",
                (true, false) => "",
                (false, true) => " - ",
                (false, false) => " + ",
            };
            if mag == Real::one() {
                write!(f, "{sep}{id}")?;
            } else {
                write!(f, "{sep}{mag}·{id}")?;
            }
            first = false;
        }
        Ok(())
    }
}

/// Coefficient ring of log-power and z-polynomials: a module over [`Real`].
pub trait Coeff: Clone + PartialEq + fmt::Debug + Send + Sync {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, factor: &Real) -> Self;
    /// Absolute size used for noise thresholds in floating mode.
    fn magnitude(&self) -> f64;

    fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }
}

impl Coeff for Real {
    fn zero() -> Self {
        Real::zero()
    }
    fn is_zero(&self) -> bool {
        Real::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn neg(&self) -> Self {
        -self.clone()
    }
    fn scale(&self, factor: &Real) -> Self {
        self * factor
    }
    fn magnitude(&self) -> f64 {
        self.to_f64().abs()
    }
}

impl Coeff for AffineValue {
    fn zero() -> Self {
        AffineValue::constant(Real::zero())
    }
    fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.linear.is_empty()
    }
    fn add(&self, other: &Self) -> Self {
        let mut linear = self.linear.clone();
        for (id, c) in &other.linear {
            let entry = linear.entry(*id).or_insert_with(Real::zero);
            *entry = &*entry + c;
        }
        AffineValue { constant: &self.constant + &other.constant, linear }.normalized()
    }
    fn neg(&self) -> Self {
        AffineValue {
            constant: -self.constant.clone(),
            linear: self.linear.iter().map(|(k, v)| (*k, -v.clone())).collect(),
        }
    }
    fn scale(&self, factor: &Real) -> Self {
        AffineValue {
            constant: &self.constant * factor,
            linear: self.linear.iter().map(|(k, v)| (*k, v * factor)).collect(),
        }
        .normalized()
    }
    fn magnitude(&self) -> f64 {
        AffineValue::magnitude(self)
    }
}

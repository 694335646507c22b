//! Characteristic function `B(j) = K_n(0,0) + Σ αᵢ′(0)^{1+j} (Kᵢ(0,0) − K_{i+1}(0,0))`
//! and its integer roots.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json;
use crate::model::ProblemSpec;
use crate::scalar::Real;

/// Highest derivative order tried before declaring `B` degenerate at a root.
pub const MULTIPLICITY_CAP: u32 = 16;

/// Default tolerance for floating-point root tests.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// `(αᵢ′(0), Kᵢ(0,0) − K_{i+1}(0,0))` for each boundary.
pub(crate) fn shift_data(spec: &ProblemSpec) -> Vec<(Real, Real)> {
    let k = spec.kernels();
    spec.boundaries()
        .iter()
        .enumerate()
        .map(|(i, b)| (b.slope_at_zero(), &k[i].at_origin() - &k[i + 1].at_origin()))
        .collect()
}

/// `K_n(0,0)`
pub(crate) fn diagonal_at_origin(spec: &ProblemSpec) -> Real {
    spec.kernels().last().expect("at least one kernel").at_origin()
}

/// `B(j)` for real `j`.
pub fn char_value(spec: &ProblemSpec, j: f64) -> f64 {
    shift_data(spec).iter().map(|(slope, jump)| slope.to_f64().powf(1.0 + j) * jump.to_f64()).sum::<f64>()
        + diagonal_at_origin(spec).to_f64()
}

/// `B(j)` at an integer point, exact when the data are rational.
pub fn char_value_exact(spec: &ProblemSpec, j: u32) -> Real {
    shift_data(spec).iter().fold(diagonal_at_origin(spec), |acc, (slope, jump)| &acc + &(&slope.powi(1 + j) * jump))
}

/// `dᵏB/djᵏ = Σ αᵢ′(0)^{1+j} (ln αᵢ′(0))ᵏ (Kᵢ(0,0) − K_{i+1}(0,0))` for `k ≥ 1`.
pub fn char_derivative(spec: &ProblemSpec, j: f64, k: u32) -> f64 {
    assert!(k >= 1, "derivative order must be at least 1");
    shift_data(spec)
        .iter()
        .map(|(slope, jump)| {
            let s = slope.to_f64();
            s.powf(1.0 + j) * s.ln().powi(k as i32) * jump.to_f64()
        })
        .sum()
}

/// An integer zero of `B` with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Root {
    pub j: u32,
    pub multiplicity: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicReport {
    pub scan_bound: u32,
    pub values: Vec<Real>,
    pub roots: Vec<Root>,
    pub total_free_constants: u32,
}

impl CharacteristicReport {
    pub fn multiplicity(&self, j: u32) -> u32 {
        self.roots.iter().find(|r| r.j == j).map_or(0, |r| r.multiplicity)
    }

    pub fn is_regular(&self) -> bool {
        self.roots.is_empty()
    }

    /// Sum of multiplicities of roots `≤ j`.
    pub fn free_constants_through(&self, j: u32) -> u32 {
        self.roots.iter().filter(|r| r.j <= j).map(|r| r.multiplicity).sum()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "roots": self.roots.iter().map(|r| json!([r.j, r.multiplicity])).collect::<Vec<_>>(),
            "values": json::numbers(self.values.iter().map(Real::to_f64)),
            "free_constants": self.total_free_constants,
        })
    }
}

fn is_root(value: &Real, tol: f64) -> bool {
    match value {
        Real::Exact(_) => value.is_zero(),
        Real::Float(v) => v.abs() <= tol,
    }
}

/// Scans `j = 0..=n` for zeros of `B` and measures their multiplicities.
///
/// A root with `B = … = B^{(k)} = 0`, `B^{(k+1)} ≠ 0` has multiplicity `k + 1`.
pub fn find_integer_roots(spec: &ProblemSpec, n: u32, tol: f64) -> Result<CharacteristicReport> {
    let values: Vec<Real> = (0..=n).map(|j| char_value_exact(spec, j)).collect();
    let mut roots = Vec::new();
    for (j, value) in values.iter().enumerate() {
        if !is_root(value, tol) {
            continue;
        }
        let j = j as u32;
        let multiplicity = (1..=MULTIPLICITY_CAP)
            .find(|&k| char_derivative(spec, j as f64, k).abs() > tol)
            .ok_or(Error::DegenerateCharacteristic { j, cap: MULTIPLICITY_CAP })?;
        roots.push(Root { j, multiplicity });
    }
    let total_free_constants = roots.iter().map(|r| r.multiplicity).sum();
    Ok(CharacteristicReport { scan_bound: n, values, roots, total_free_constants })
}

/// Smallest `j` beyond which `B` cannot vanish because
/// `Σ αᵢ′(0)^{1+j}|ΔKᵢ| < |K_n(0,0)|`; `None` when `K_n(0,0) = 0`.
pub fn root_free_threshold(spec: &ProblemSpec) -> Option<u32> {
    let diag = diagonal_at_origin(spec).to_f64().abs();
    if diag == 0.0 {
        return None;
    }
    let data = shift_data(spec);
    (0..=4096u32)
        .find(|&j| data.iter().map(|(s, d)| s.to_f64().powf(1.0 + j as f64) * d.to_f64().abs()).sum::<f64>() < diag)
}

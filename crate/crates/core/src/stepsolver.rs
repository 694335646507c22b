//! Step method for the continuous regular part.
//!
//! On the first interval `[0, h]` the equation `x + Ax + Kx = f̄` is solved by
//! successive approximations. Each later interval
//! `Iₘ = [(1+(m−1)ε)h, (1+mε)h]` only looks back at the stitched history
//! through the functional operator, so there it becomes a second-kind
//! Volterra equation in `K` alone.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json;
use crate::model::{ProblemSpec, SolverConstants};
use crate::quadrature::GaussRule;

/// Anything that can be sampled on `[0, domain_end]`.
pub trait Evaluable {
    fn value(&self, t: f64) -> f64;
    fn domain_end(&self) -> f64;
    /// Points where the function is only piecewise smooth.
    fn breakpoints(&self) -> &[f64] {
        &[]
    }
    /// Which representation produced `value(t)`, for reports.
    fn representation(&self, _t: f64) -> &'static str {
        "function"
    }
}

/// A closure with a declared domain.
pub struct FnEval<F> {
    f: F,
    end: f64,
}

impl<F: Fn(f64) -> f64> FnEval<F> {
    pub fn new(f: F, end: f64) -> Self {
        FnEval { f, end }
    }
}

impl<F: Fn(f64) -> f64> Evaluable for FnEval<F> {
    fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }
    fn domain_end(&self) -> f64 {
        self.end
    }
}

/// Chebyshev–Lobatto points on `[a, b]` with exact endpoints.
pub fn lobatto_nodes(a: f64, b: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "an interval needs at least its two endpoints");
    let last = count - 1;
    (0..count)
        .map(|k| match k {
            0 => a,
            k if k == last => b,
            k => {
                let c = (std::f64::consts::PI * k as f64 / last as f64).cos();
                0.5 * (a + b) - 0.5 * (b - a) * c
            }
        })
        .collect()
}

/// Subintervals `[0,h]`, `I₁`, `I₂`, … covering `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    intervals: Vec<(f64, f64)>,
    nodes_per_interval: usize,
}

impl Mesh {
    pub fn new(h: f64, eps: f64, horizon: f64, nodes_per_interval: usize) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Domain(format!("first interval length h = {h} must be positive")));
        }
        if nodes_per_interval < 2 {
            return Err(Error::Domain("at least two nodes per interval are required".into()));
        }
        let snap = 1e-9 * horizon;
        let mut intervals = vec![(0.0, if h >= horizon - snap { horizon } else { h })];
        let mut m = 1;
        while intervals.last().unwrap().1 < horizon {
            if !(eps > 0.0) {
                return Err(Error::Domain(format!("ε = {eps} cannot extend the mesh beyond {h}")));
            }
            let start = intervals.last().unwrap().1;
            let mut end = (1.0 + m as f64 * eps) * h;
            if end >= horizon - snap {
                end = horizon;
            }
            intervals.push((start, end));
            m += 1;
        }
        Ok(Mesh { intervals, nodes_per_interval })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn nodes_per_interval(&self) -> usize {
        self.nodes_per_interval
    }

    pub fn interval_nodes(&self, m: usize) -> Vec<f64> {
        let (a, b) = self.intervals[m];
        lobatto_nodes(a, b, self.nodes_per_interval)
    }

    /// All nodes, each stitch point listed once.
    pub fn nodes(&self) -> Vec<f64> {
        let mut out = self.interval_nodes(0);
        for m in 1..self.intervals.len() {
            out.extend(self.interval_nodes(m).into_iter().skip(1));
        }
        out
    }
}

/// Node values with piecewise-cubic interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl MeshFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.is_empty() {
            return Err(Error::Domain(format!("{} nodes but {} values", nodes.len(), values.len())));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("mesh nodes must be strictly increasing".into()));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {}", nodes[bad])));
        }
        Ok(MeshFunction { nodes, values })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Appends another mesh function whose first node repeats this one's last.
    pub fn stitched(&self, next: &MeshFunction) -> Result<MeshFunction> {
        let mut nodes = self.nodes.clone();
        let mut values = self.values.clone();
        nodes.extend_from_slice(&next.nodes[1..]);
        values.extend_from_slice(&next.values[1..]);
        MeshFunction::new(nodes, values)
    }

    /// Cubic Lagrange interpolation on the four nodes around `t`; `t` is
    /// clamped to the node range.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.nodes.len();
        if n == 1 {
            return self.values[0];
        }
        let t = t.clamp(self.nodes[0], self.nodes[n - 1]);
        let cell = self.nodes.partition_point(|&x| x <= t).clamp(1, n - 1) - 1;
        let width = n.min(4);
        let start = cell.saturating_sub(1).min(n - width);
        let xs = &self.nodes[start..start + width];
        let ys = &self.values[start..start + width];
        if let Some(i) = xs.iter().position(|&x| x == t) {
            return ys[i];
        }
        let mut sum = 0.0;
        for i in 0..width {
            let mut basis = 1.0;
            for k in 0..width {
                if k != i {
                    basis *= (t - xs[k]) / (xs[i] - xs[k]);
                }
            }
            sum += basis * ys[i];
        }
        sum
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x\n");
        for (t, x) in self.nodes.iter().zip(&self.values) {
            out.push_str(&format!("{},{}\n", json::format_float(*t), json::format_float(*x)));
        }
        out
    }
}

impl Evaluable for MeshFunction {
    fn value(&self, t: f64) -> f64 {
        self.eval(t)
    }
    fn domain_end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
    fn breakpoints(&self) -> &[f64] {
        &self.nodes
    }
    fn representation(&self, _t: f64) -> &'static str {
        "mesh"
    }
}

/// `f̄(t)`
pub fn build_rhs_fbar(spec: &ProblemSpec, t: f64) -> Result<f64> {
    spec.fbar(t)
}

fn diagonal(spec: &ProblemSpec, t: f64) -> Result<f64> {
    let d = spec.diagonal().eval(t);
    if d == 0.0 {
        Err(Error::SingularDiagonal { t })
    } else {
        Ok(d)
    }
}

fn history_slack(t: f64) -> f64 {
    1e-12 * t.max(1.0)
}

/// `(Ax)(t) = K_n(t,t)⁻¹ Σ αᵢ′(t)(Kᵢ − Kᵢ₊₁)(t, αᵢ(t)) x(αᵢ(t))`.
pub fn apply_a<X: Evaluable + ?Sized>(spec: &ProblemSpec, x: &X, t: f64) -> Result<f64> {
    if spec.boundaries().is_empty() {
        return Ok(0.0);
    }
    let diag = diagonal(spec, t)?;
    let end = x.domain_end();
    let mut sum = 0.0;
    for (b, w) in spec.boundaries().iter().zip(spec.jump_weights()) {
        let alpha = b.eval(t);
        if alpha > end + history_slack(t) {
            return Err(Error::StepOrdering { t, alpha, history_end: end });
        }
        sum += w.eval(t) * x.value(alpha.min(end));
    }
    Ok(sum / diag)
}

/// `(Kx)(t) = K_n(t,t)⁻¹ Σ ∫_{αᵢ₋₁(t)}^{αᵢ(t)} ∂ₜKᵢ(t,s) x(s) ds`, one Gauss
/// panel between consecutive breakpoints of `x` inside each sector.
pub fn apply_k<X: Evaluable + ?Sized>(spec: &ProblemSpec, x: &X, t: f64, rule: &GaussRule) -> Result<f64> {
    if spec.kernel_dt().iter().all(|k| k.is_zero()) {
        return Ok(0.0);
    }
    let diag = diagonal(spec, t)?;
    let end = x.domain_end();
    if t > end + history_slack(t) {
        return Err(Error::StepOrdering { t, alpha: t, history_end: end });
    }
    let breaks = x.breakpoints();
    let mut sum = 0.0;
    for (i, dk) in spec.kernel_dt().iter().enumerate() {
        if dk.is_zero() {
            continue;
        }
        let (lo, hi) = spec.sector_bounds(i, t);
        let hi = hi.min(end);
        if hi <= lo {
            continue;
        }
        let mut panel = vec![lo];
        let first = breaks.partition_point(|&b| b <= lo);
        panel.extend(breaks[first..].iter().copied().take_while(|&b| b < hi));
        panel.push(hi);
        sum += rule.composite(|s| dk.eval(t, s) * x.value(s), &panel);
    }
    Ok(sum / diag)
}

/// Tunables of the fixed-point iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOptions {
    pub nodes: usize,
    pub tol: f64,
    pub max_iterations: usize,
    pub quadrature_order: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { nodes: 17, tol: 1e-10, max_iterations: 200, quadrature_order: 8 }
    }
}

/// Convergence record for one subinterval.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalReport {
    pub start: f64,
    pub end: f64,
    pub iterations: usize,
    /// Successive-change ratios while the change is above roundoff.
    pub ratios: Vec<f64>,
    /// `max |x + Ax + Kx − f̄|` over the interval's nodes.
    pub residual: f64,
}

impl IntervalReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// Initial guess for the first interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialGuess {
    Fbar,
    Zero,
}

/// Runs `v ← update(v)` until the sup change is at most `tol`.
fn fixed_point(
    start_value: Vec<f64>,
    opts: &StepOptions,
    span: (f64, f64),
    mut update: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<(Vec<f64>, IntervalReport)> {
    let mut current = start_value;
    let mut ratios = Vec::new();
    let mut previous_change: Option<f64> = None;
    let mut growing = 0;
    for iteration in 1..=opts.max_iterations {
        let next = update(&current)?;
        let change = next.iter().zip(&current).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = next.iter().map(|v| v.abs()).fold(1.0, f64::max);
        let failure =
            |ratio: f64| Error::ContractionFailure { start: span.0, end: span.1, ratio, iterations: iteration };
        if !change.is_finite() {
            return Err(failure(f64::INFINITY));
        }
        if let Some(prev) = previous_change {
            if prev > 1e3 * f64::EPSILON * scale {
                let ratio = change / prev;
                ratios.push(ratio);
                growing = if ratio >= 1.0 { growing + 1 } else { 0 };
                if growing >= 3 {
                    return Err(failure(ratio));
                }
            }
        }
        current = next;
        if change <= opts.tol {
            let residual = update(&current)?.iter().zip(&current).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let report = IntervalReport { start: span.0, end: span.1, iterations: iteration, ratios, residual };
            return Ok((current, report));
        }
        previous_change = Some(change);
    }
    Err(Error::ContractionFailure {
        start: span.0,
        end: span.1,
        ratio: ratios.last().copied().unwrap_or(f64::NAN),
        iterations: opts.max_iterations,
    })
}

fn require_certified(consts: &SolverConstants) -> Result<()> {
    if consts.step_method_applicable() {
        Ok(())
    } else {
        Err(Error::ConditionNotCertified { h1: consts.h1 })
    }
}

/// Fixed point of `x = −Ax − Kx + f̄` on `[0, h]`.
pub fn solve_first_interval(
    spec: &ProblemSpec,
    consts: &SolverConstants,
    opts: &StepOptions,
    guess: InitialGuess,
) -> Result<(MeshFunction, IntervalReport)> {
    require_certified(consts)?;
    let mesh = Mesh::new(consts.h, consts.eps, spec.horizon(), opts.nodes)?;
    let nodes = mesh.interval_nodes(0);
    let span = mesh.intervals()[0];
    let rule = GaussRule::new(opts.quadrature_order);
    let fbar: Vec<f64> = nodes.iter().map(|&t| spec.fbar(t)).collect::<Result<_>>()?;
    let start = match guess {
        InitialGuess::Fbar => fbar.clone(),
        InitialGuess::Zero => vec![0.0; nodes.len()],
    };
    let (values, report) = fixed_point(start, opts, span, |v| {
        let x = MeshFunction::new(nodes.clone(), v.to_vec())?;
        nodes.iter().zip(&fbar).map(|(&t, f)| Ok(f - apply_a(spec, &x, t)? - apply_k(spec, &x, t, &rule)?)).collect()
    })?;
    Ok((MeshFunction::new(nodes, values)?, report))
}

/// Solves on `interval` given the solution on `[0, interval.0]`.
///
/// The functional term only reads `history`; the integral term reads the
/// history stitched to the current iterate. The left node is the history's
/// last value.
pub fn extend_step(
    spec: &ProblemSpec,
    history: &MeshFunction,
    interval: (f64, f64),
    opts: &StepOptions,
) -> Result<(MeshFunction, IntervalReport)> {
    let history_end = history.domain_end();
    if (interval.0 - history_end).abs() > history_slack(history_end) {
        return Err(Error::Domain(format!("interval starts at {} but history ends at {history_end}", interval.0)));
    }
    let nodes = lobatto_nodes(history_end, interval.1, opts.nodes);
    let rule = GaussRule::new(opts.quadrature_order);
    let left = *history.values().last().unwrap();
    let known: Vec<f64> =
        nodes.iter().map(|&t| Ok(spec.fbar(t)? - apply_a(spec, history, t)?)).collect::<Result<_>>()?;
    let mut start = known.clone();
    start[0] = left;
    let (values, report) = fixed_point(start, opts, interval, |v| {
        let current = MeshFunction::new(nodes.clone(), v.to_vec())?;
        let combined = history.stitched(&current)?;
        let mut next = Vec::with_capacity(nodes.len());
        next.push(left);
        for (&t, k) in nodes.iter().zip(&known).skip(1) {
            next.push(k - apply_k(spec, &combined, t, &rule)?);
        }
        Ok(next)
    })?;
    Ok((MeshFunction::new(nodes, values)?, report))
}

/// Regular part on `[0, T]` with per-interval convergence records.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularSolution {
    pub mesh: Mesh,
    pub function: MeshFunction,
    pub reports: Vec<IntervalReport>,
    pub h: f64,
    pub eps: f64,
}

impl RegularSolution {
    pub fn final_residual(&self) -> f64 {
        self.reports.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn report_json(&self) -> Value {
        json!({
            "h": json::number(self.h),
            "eps": json::number(self.eps),
            "intervals": self.reports.iter().map(|r| json!({
                "start": json::number(r.start),
                "end": json::number(r.end),
                "iterations": r.iterations,
                "max_ratio": json::number(r.max_ratio()),
                "residual": json::number(r.residual),
            })).collect::<Vec<_>>(),
            "final_residual": json::number(self.final_residual()),
        })
    }
}

/// Step method over the whole horizon.
pub fn solve_regular(spec: &ProblemSpec, consts: &SolverConstants, opts: &StepOptions) -> Result<RegularSolution> {
    require_certified(consts)?;
    let mesh = Mesh::new(consts.h, consts.eps, spec.horizon(), opts.nodes)?;
    let (mut function, first) = solve_first_interval(spec, consts, opts, InitialGuess::Fbar)?;
    let mut reports = vec![first];
    for &interval in &mesh.intervals()[1..] {
        let (piece, report) = extend_step(spec, &function, interval, opts)?;
        function = function.stitched(&piece)?;
        reports.push(report);
    }
    Ok(RegularSolution { mesh, function, reports, h: consts.h, eps: consts.eps })
}

/// `max |x + Ax + Kx − f̄|` over the nodes of `x`.
pub fn fixed_point_residual(spec: &ProblemSpec, x: &MeshFunction, opts: &StepOptions) -> Result<f64> {
    let rule = GaussRule::new(opts.quadrature_order);
    let mut worst: f64 = 0.0;
    for (&t, &v) in x.nodes().iter().zip(x.values()) {
        let r = v + apply_a(spec, x, t)? + apply_k(spec, x, t, &rule)? - spec.fbar(t)?;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_target_q, estimate_constants, parse_problem};

    fn doc(boundaries: &str, kernels: &str, f: &str) -> ProblemSpec {
        parse_problem(&format!(r#"{{"T": 2, "boundaries": {boundaries}, "kernels": {kernels}, "f": {f}}}"#)).unwrap()
    }

    fn example1() -> ProblemSpec {
        doc("[[0.5]]", r#"[{"terms": [[0,0,1]]}, {"terms": [[0,0,2]]}]"#, "[2, 1]")
    }

    fn constants(spec: &ProblemSpec) -> SolverConstants {
        estimate_constants(spec, default_target_q(spec).unwrap(), 200).unwrap()
    }

    #[test]
    fn mesh_layout() {
        let mesh = Mesh::new(0.5, 1.0, 2.0, 5).unwrap();
        assert_eq!(mesh.intervals(), &[(0.0, 0.5), (0.5, 1.0), (1.0, 1.5), (1.5, 2.0)]);
        let nodes = mesh.nodes();
        assert_eq!(nodes.len(), 4 * 4 + 1);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        let clipped = Mesh::new(0.8, 0.5, 2.0, 3).unwrap();
        assert_eq!(clipped.intervals().last().unwrap().1, 2.0);
        assert_eq!(clipped.intervals()[1], (0.8, 1.2000000000000002));
        assert!(Mesh::new(0.5, 0.0, 2.0, 3).is_err());
        assert_eq!(Mesh::new(3.0, 0.0, 2.0, 3).unwrap().intervals(), &[(0.0, 2.0)]);
    }

    #[test]
    fn nested_lobatto_nodes_are_shared() {
        let coarse = lobatto_nodes(0.0, 1.8, 9);
        let fine = lobatto_nodes(0.0, 1.8, 17);
        for (k, t) in coarse.iter().enumerate() {
            assert!((fine[2 * k] - t).abs() < 1e-15);
        }
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let nodes = lobatto_nodes(0.0, 2.0, 9);
        let p = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let f = MeshFunction::new(nodes.clone(), nodes.iter().map(|&t| p(t)).collect()).unwrap();
        for t in [0.0, 0.013, 0.7, 1.234, 1.99, 2.0] {
            assert!((f.eval(t) - p(t)).abs() < 1e-13);
        }
        assert!(MeshFunction::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(MeshFunction::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn fbar_examples() {
        assert_eq!(build_rhs_fbar(&example1(), 1.3).unwrap(), 0.5);
        let ex2 = doc("[[0.5]]", r#"[{"terms": [[0,0,1]]}, {"terms": [[0,0,-1]]}]"#, "[1, 1]");
        assert_eq!(build_rhs_fbar(&ex2, 0.4).unwrap(), -1.0);
    }

    #[test]
    fn operator_examples() {
        let spec = example1();
        let x = FnEval::new(|_| 2.0 / 3.0, 2.0);
        assert!((apply_a(&spec, &x, 1.0).unwrap() + 1.0 / 6.0).abs() < 1e-16);
        assert_eq!(apply_k(&spec, &x, 1.0, &GaussRule::new(8)).unwrap(), 0.0);
        let single = doc("[]", r#"[{"terms": [[0,0,1],[1,0,1]]}]"#, "[1, 2, 1]");
        assert_eq!(apply_a(&single, &x, 1.0).unwrap(), 0.0);
        // K = 1 + t: (Kx)(t) = ∫₀ᵗ x / (1+t)
        let one = FnEval::new(|_| 1.0, 2.0);
        assert!((apply_k(&single, &one, 1.0, &GaussRule::new(8)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn history_escape_is_reported() {
        let spec = example1();
        let short = FnEval::new(|_| 1.0, 0.4);
        assert!(matches!(apply_a(&spec, &short, 1.0), Err(Error::StepOrdering { .. })));
    }

    #[test]
    fn example_one_is_constant() {
        let spec = example1();
        let consts = constants(&spec);
        let sol = solve_regular(&spec, &consts, &StepOptions::default()).unwrap();
        assert!(sol.function.values().iter().all(|v| (v - 2.0 / 3.0).abs() < 1e-8));
        assert!(sol.reports.len() >= 2);
        assert!(sol.final_residual() <= 1e-9);
        let first = &sol.reports[0];
        assert!(first.max_ratio() <= consts.q + consts.c * consts.h + 0.05);
    }

    #[test]
    fn trivial_spec_returns_fbar() {
        let spec = doc("[]", r#"[{"terms": [[0,0,1]]}]"#, "[1, 1]");
        let consts = constants(&spec);
        let sol = solve_regular(&spec, &consts, &StepOptions::default()).unwrap();
        assert!(sol.function.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        let quad = doc("[]", r#"[{"terms": [[0,0,1]]}]"#, "[1, 1, 1]");
        let sol = solve_regular(&quad, &constants(&quad), &StepOptions::default()).unwrap();
        for (t, v) in sol.function.nodes().iter().zip(sol.function.values()) {
            assert!((v - (1.0 + 2.0 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn time_dependent_kernel_uses_several_steps() {
        // K = 1 + t, f = (1+t)², a = 1, x ≡ 1.
        let spec = doc("[]", r#"[{"terms": [[0,0,1],[1,0,1]]}]"#, "[1, 2, 1]");
        let consts = constants(&spec);
        let opts = StepOptions::default();
        let sol = solve_regular(&spec, &consts, &opts).unwrap();
        assert!(sol.reports.len() > 2, "{:?}", sol.mesh.intervals());
        assert!(sol.function.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
        assert!(fixed_point_residual(&spec, &sol.function, &opts).unwrap() <= 10.0 * opts.tol);
    }

    #[test]
    fn initial_guesses_agree() {
        let spec = doc("[[0.5]]", r#"[{"terms": [[0,0,2],[0,1,1]]}, {"terms": [[0,0,3],[1,0,1]]}]"#, "[2, 1, 1]");
        let consts = constants(&spec);
        let opts = StepOptions::default();
        let (a, _) = solve_first_interval(&spec, &consts, &opts, InitialGuess::Fbar).unwrap();
        let (b, _) = solve_first_interval(&spec, &consts, &opts, InitialGuess::Zero).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 10.0 * opts.tol);
        }
    }

    #[test]
    fn refuses_uncertified_problems() {
        let ex2 = doc("[[0.5]]", r#"[{"terms": [[0,0,1]]}, {"terms": [[0,0,-1]]}]"#, "[1, 1]");
        let consts = constants(&ex2);
        assert_eq!(consts.h1, 0.0);
        assert!(matches!(
            solve_regular(&ex2, &consts, &StepOptions::default()),
            Err(Error::ConditionNotCertified { .. })
        ));
    }

    #[test]
    fn divergence_is_detected() {
        let ex2 = doc("[[0.5]]", r#"[{"terms": [[0,0,1]]}, {"terms": [[0,0,-1]]}]"#, "[1, 1]");
        let mut consts = constants(&ex2);
        consts.h = 1.0;
        consts.eps = 1.0;
        assert!(matches!(
            solve_first_interval(&ex2, &consts, &StepOptions::default(), InitialGuess::Fbar),
            Err(Error::ContractionFailure { .. })
        ));
    }
}

//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pwvie::asymptotics::compute_asymptotics;
use pwvie::characteristic::{find_integer_roots, ROOT_TOLERANCE};
use pwvie::model::{default_target_q, estimate_constants, parse_problem, ProblemSpec, SolverConstants};
use pwvie::refinement::{solve_step_method, solve_with_correction, GeneralizedSolution, RefineOptions};
use pwvie::scalar::Real;
use pwvie::stepsolver::{solve_first_interval, InitialGuess, StepOptions};
use pwvie::verifier::{decay_order, residual_eq3, residual_eq6, residual_operator_f_logpower, uniform_grid, Decay};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn load(name: &str) -> Result<ProblemSpec, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name);
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_problem(&text).map_err(|e| e.to_string())
}

fn constants(spec: &ProblemSpec) -> Result<SolverConstants, String> {
    let q = default_target_q(spec).map_err(|e| e.to_string())?;
    estimate_constants(spec, q, 200).map_err(|e| e.to_string())
}

fn sup_deviation(solution: &GeneralizedSolution, value: f64) -> f64 {
    solution.samples(401).iter().map(|(_, x)| (x - value).abs()).fold(0.0, f64::max)
}

fn max_abs(values: impl IntoIterator<Item = Result<f64, pwvie::Error>>) -> Result<f64, String> {
    values.into_iter().try_fold(0.0f64, |m, v| v.map(|v| m.max(v.abs())).map_err(|e| e.to_string()))
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn example_one() -> Outcome {
    let started = Instant::now();
    let spec = load("example1.json")?;
    let consts = constants(&spec)?;
    let solution = solve_step_method(&spec, &consts, &StepOptions::default()).map_err(|e| e.to_string())?;
    ensure(solution.a.is_exact() && solution.a == Real::from_i64(2), || format!("a = {}", solution.a))?;
    let deviation = sup_deviation(&solution, 2.0 / 3.0);
    ensure(deviation <= 1e-8, || format!("sup|x − 2/3| = {deviation:e}"))?;
    let eq3 = max_abs(uniform_grid(0.01, 2.0, 41).into_iter().map(|t| residual_eq3(&spec, 2.0, &solution, t)))?;
    ensure(eq3 <= 1e-8, || format!("max eq3 residual {eq3:e}"))?;
    let elapsed = started.elapsed();
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("a = {}, sup|x − 2/3| = {deviation:.1e}, max eq3 = {eq3:.1e}, {elapsed:.1?}", solution.a))
}

fn example_two() -> Outcome {
    let spec = load("example2.json")?;
    let consts = constants(&spec)?;
    let asym = compute_asymptotics(&spec, consts.nstar).map_err(|e| e.to_string())?;
    let log_coefficient = &asym.coefficients[0].coeffs()[1];
    ensure(log_coefficient.is_constant(), || format!("ln t coefficient {log_coefficient} depends on parameters"))?;
    let expected = -1.0 / std::f64::consts::LN_2;
    let ln_t = log_coefficient.bind(&BTreeMap::new()).map_err(|e| e.to_string())?.to_f64();
    ensure((ln_t - expected).abs() <= 1e-12, || format!("ln t coefficient {ln_t}"))?;
    let id = asym.free_parameters[0];
    let mut worst = (0.0f64, 0.0f64);
    let mut slowest = Duration::ZERO;
    for c in [-1, 0, 2] {
        let started = Instant::now();
        let params = BTreeMap::from([(id, Real::from_i64(c))]);
        let solution = solve_with_correction(&spec, &consts, &asym, &params, &RefineOptions::default())
            .map_err(|e| e.to_string())?;
        ensure(solution.a.is_exact() && solution.a == Real::one(), || format!("a = {}", solution.a))?;
        let eq6 = max_abs(uniform_grid(0.01, 1.0, 41).into_iter().map(|t| residual_eq6(&spec, &solution, t)))?;
        let eq3 = max_abs(uniform_grid(0.05, 1.0, 41).into_iter().map(|t| residual_eq3(&spec, 1.0, &solution, t)))?;
        ensure(eq6 <= 1e-8, || format!("c = {c}: max eq6 residual {eq6:e}"))?;
        ensure(eq3 <= 1e-6, || format!("c = {c}: max eq3 residual {eq3:e}"))?;
        let elapsed = started.elapsed();
        within(elapsed, Duration::from_secs(2))?;
        worst = (worst.0.max(eq6), worst.1.max(eq3));
        slowest = slowest.max(elapsed);
    }
    Ok(format!(
        "a = 1, ln t coefficient = {ln_t}, max eq6 = {:.1e}, max eq3 = {:.1e}, slowest {slowest:.1?}",
        worst.0, worst.1
    ))
}

fn classification() -> Outcome {
    let one = find_integer_roots(&load("example1.json")?, 6, ROOT_TOLERANCE).map_err(|e| e.to_string())?;
    ensure(one.roots.is_empty(), || format!("example1.json roots {:?}", one.roots))?;
    ensure(one.values.iter().all(|v| v.is_exact() && !v.is_zero()), || "example1.json values not exact".into())?;
    let spec = load("example2.json")?;
    let two = find_integer_roots(&spec, 6, ROOT_TOLERANCE).map_err(|e| e.to_string())?;
    let roots: Vec<(u32, u32)> = two.roots.iter().map(|r| (r.j, r.multiplicity)).collect();
    ensure(roots == [(0, 1)], || format!("example2.json roots {roots:?}"))?;
    ensure(two.values[0].is_exact() && two.values[0].is_zero(), || format!("B(0) = {}", two.values[0]))?;
    ensure(two.total_free_constants == 1, || format!("{} free constants", two.total_free_constants))?;
    let params = compute_asymptotics(&spec, 6).map_err(|e| e.to_string())?.free_parameters.len();
    ensure(params == 1, || format!("expansion carries {params} parameters"))?;
    Ok("example1.json: no roots in 0..=6; example2.json: root (0, 1), 1 free constant, 1 expansion parameter".into())
}

fn manufactured() -> Outcome {
    let spec = load("manufactured.json")?;
    let consts = constants(&spec)?;
    let solution = solve_step_method(&spec, &consts, &StepOptions::default()).map_err(|e| e.to_string())?;
    ensure(solution.a.is_exact() && solution.a == Real::one(), || format!("a = {}", solution.a))?;
    let deviation = sup_deviation(&solution, 2.0 / 3.0);
    ensure(deviation <= 1e-8, || format!("sup|x − 2/3| = {deviation:e}"))?;
    Ok(format!("path {}, a = 1, sup|x − 2/3| = {deviation:.1e}", solution.path()))
}

fn residual_order() -> Outcome {
    let spec = load("growing-kernel.json")?;
    let mut summary = Vec::new();
    for n in 1..=3u32 {
        let asym = compute_asymptotics(&spec, n).map_err(|e| e.to_string())?;
        let xhat = asym.bind(&BTreeMap::new()).map_err(|e| e.to_string())?;
        let samples = [1e-2, 1e-3, 1e-4]
            .into_iter()
            .map(|t| residual_operator_f_logpower(&spec, &xhat, t).map(|r| (t, r)).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        let decay = decay_order(&samples).map_err(|e| e.to_string())?;
        ensure(decay.at_least(n as f64 + 0.9), || format!("N = {n}: decay {decay:?}"))?;
        summary.push(match decay {
            Decay::Exact => format!("N = {n}: exact"),
            Decay::Slope(s) => format!("N = {n}: slope {s:.2}"),
        });
    }
    Ok(summary.join(", "))
}

fn contraction_certificates() -> Outcome {
    let mut runs = Vec::new();
    let perturbed = parse_problem(
        r#"{"T": 1, "boundaries": [["1/2"]], "kernels": [{"terms": [[0,0,1]]}, {"terms": [[0,0,-1]]}], "f": [1, 1, 0, 0, 1]}"#,
    )
    .map_err(|e| e.to_string())?;
    for (label, spec) in [("example2.json", load("example2.json")?), ("example2.json with t⁴ forcing", perturbed)] {
        let consts = constants(&spec)?;
        let asym = compute_asymptotics(&spec, consts.nstar).map_err(|e| e.to_string())?;
        for c in [-1, 0, 2] {
            let params: BTreeMap<_, _> = asym.free_parameters.iter().map(|&id| (id, Real::from_i64(c))).collect();
            let solution = solve_with_correction(&spec, &consts, &asym, &params, &RefineOptions::default())
                .map_err(|e| e.to_string())?;
            let report = solution.contraction.ok_or("no contraction report")?;
            let bound = report.q_m + report.q1;
            ensure(bound < 1.0, || format!("{label}, c = {c}: q + q1 = {bound}"))?;
            ensure(report.max_ratio() <= bound + 0.05, || {
                format!("{label}, c = {c}: ratio {} above {bound} + 0.05", report.max_ratio())
            })?;
            runs.push(report.max_ratio());
        }
    }
    let spec = load("example1.json")?;
    let consts = constants(&spec)?;
    let (_, first) =
        solve_first_interval(&spec, &consts, &StepOptions::default(), InitialGuess::Fbar).map_err(|e| e.to_string())?;
    let bound = consts.q + consts.c * consts.h + 0.05;
    ensure(first.max_ratio() <= bound, || format!("example1.json ratio {} above {bound}", first.max_ratio()))?;
    Ok(format!(
        "{} correction runs, worst ratio {:.3}; example1.json first interval ratio {:.3} ≤ {bound:.3}",
        runs.len(),
        runs.iter().copied().fold(0.0, f64::max),
        first.max_ratio()
    ))
}

fn algebra_suite() -> Outcome {
    use common::*;
    run_cases(200, triple(), ring_laws).map_err(|e| format!("ring laws: {e}"))?;
    run_cases(200, integrable(), round_trip).map_err(|e| format!("round trip: {e}"))?;
    run_cases(200, linear_substitution_input(), linear_substitution).map_err(|e| format!("substitution: {e}"))?;
    run_cases(200, curved_substitution_input(), curved_substitution)
        .map_err(|e| format!("curved substitution: {e}"))?;
    run_cases(200, identity_input(), integration_identity).map_err(|e| format!("integration identity: {e}"))?;
    run_cases(50, characteristic_input(), characteristic_derivative)
        .map_err(|e| format!("characteristic derivative: {e}"))?;
    Ok("ring laws, round trip, substitution and integration identity on 200 cases each; B′ on 50 specs".into())
}

fn uniqueness() -> Outcome {
    let opts = StepOptions::default();
    let mut gaps = Vec::new();
    for name in ["example1.json", "manufactured.json"] {
        let spec = load(name)?;
        let consts = constants(&spec)?;
        let solve = |guess| solve_first_interval(&spec, &consts, &opts, guess).map_err(|e| e.to_string());
        let (from_fbar, _) = solve(InitialGuess::Fbar)?;
        let (from_zero, _) = solve(InitialGuess::Zero)?;
        let gap = from_fbar.values().iter().zip(from_zero.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(gap <= 10.0 * opts.tol, || format!("{name}: guesses differ by {gap:e}"))?;
        gaps.push(format!("{name} {gap:.1e}"));
    }
    Ok(format!("node gaps {} (limit {:.0e})", gaps.join(", "), 10.0 * opts.tol))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("example1.json reproduction", example_one),
        ("example2.json reproduction", example_two),
        ("characteristic classification", classification),
        ("manufactured problem", manufactured),
        ("expansion residual order", residual_order),
        ("contraction certificates", contraction_certificates),
        ("algebra property suite", algebra_suite),
        ("uniqueness probe", uniqueness),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[PASS] {}. {name}: {detail}", k + 1),
            Err(reason) => {
                failures += 1;
                println!("[FAIL] {}. {name}: {reason}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

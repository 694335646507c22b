use std::collections::btree_map::{BTreeMap, Entry};
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use pwvie::asymptotics::{compute_asymptotics, AsymptoticSolution};
use pwvie::characteristic::{find_integer_roots, root_free_threshold, ROOT_TOLERANCE};
use pwvie::json::{self as pjson, format_float};
use pwvie::model::{
    a_of_t, default_target_q, estimate_constants, parse_problem, validate, ProblemSpec, SolverConstants,
};
use pwvie::refinement::{solve_step_method, solve_with_correction, GeneralizedSolution, RefineOptions};
use pwvie::scalar::{parse_exact, ParamId, Real};
use pwvie::stepsolver::StepOptions;
use pwvie::verifier::{residual_report, uniform_grid, ResidualReport};

use crate::exit::{self, Failure};

/// Smallest characteristic scan reported by `analyze`.
const MIN_SCAN: u32 = 6;

struct Problem {
    spec: ProblemSpec,
    hash: String,
}

fn load(path: &Path) -> Result<Problem, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::new(exit::INVALID_INPUT, format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::new(exit::INVALID_INPUT, format!("{} is not UTF-8", path.display())))?;
    let spec = parse_problem(&text)?;
    Ok(Problem { spec, hash: hex::encode(Sha256::digest(&bytes)) })
}

fn print_json(value: &Value) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn validation_json(spec: &ProblemSpec, grid_points: usize) -> (bool, Value, String) {
    let report = validate(spec, grid_points);
    let mut text = String::from("hypotheses:\n");
    let mut entries = Vec::new();
    for c in &report.checks {
        let tag = if c.passed { "ok" } else { "FAIL" };
        match c.witness {
            Some(t) => text.push_str(&format!("  [{tag}] {} (witness t = {t})\n", c.name)),
            None => text.push_str(&format!("  [{tag}] {}\n", c.name)),
        }
        entries.push(json!({
            "name": c.name,
            "passed": c.passed,
            "witness": c.witness.map(pjson::number),
        }));
    }
    (report.passed(), Value::Array(entries), text)
}

fn constants_json(c: &SolverConstants) -> Value {
    json!({
        "q": pjson::number(c.q),
        "c": pjson::number(c.c),
        "h1": pjson::number(c.h1),
        "h": pjson::number(c.h),
        "eps": pjson::number(c.eps),
        "eps_bound": pjson::number(c.eps_bound),
        "Nstar": c.nstar,
        "T_prime": pjson::number(c.t_prime),
        "a0": pjson::number(c.a0),
        "sup_a": pjson::number(c.sup_a),
    })
}

fn applicable_paths(c: &SolverConstants) -> Vec<&'static str> {
    let mut paths = Vec::new();
    if c.a0 < 1.0 && c.step_method_applicable() {
        paths.push("theorem-1");
    }
    if c.t_prime > 0.0 && c.eps_bound < 1.0 {
        paths.push("theorem-2");
    }
    paths
}

pub fn analyze(path: &Path, grid_points: usize, as_json: bool) -> Result<(), Failure> {
    let problem = load(path)?;
    let spec = &problem.spec;
    let (passed, checks, text) = validation_json(spec, grid_points);
    if !passed {
        if as_json {
            print_json(&json!({ "validation": checks, "passed": false }))?;
        } else {
            print!("{text}");
        }
        return Err(Failure::new(exit::INVALID_INPUT, "problem violates the hypotheses listed above"));
    }
    let a0 = a_of_t(spec, 0.0)?.abs();
    let consts = estimate_constants(spec, default_target_q(spec)?, grid_points)?;
    let scan = MIN_SCAN.max(root_free_threshold(spec).unwrap_or(0)).max(consts.nstar);
    let characteristic = find_integer_roots(spec, scan, ROOT_TOLERANCE)?;
    let paths = applicable_paths(&consts);
    let recommended = paths.first().copied().unwrap_or("none");

    if as_json {
        return print_json(&json!({
            "validation": checks,
            "passed": true,
            "a0": pjson::number(a0),
            "constants": constants_json(&consts),
            "characteristic": characteristic.to_json(),
            "path": recommended,
            "applicable": paths,
        }));
    }
    print!("{text}");
    println!("|A(0)| = {a0}");
    println!(
        "constants: q = {}, c = {}, h1 = {}, h = {}, eps = {}, eps_bound = {}, N* = {}, T' = {}",
        consts.q, consts.c, consts.h1, consts.h, consts.eps, consts.eps_bound, consts.nstar, consts.t_prime
    );
    let roots: Vec<String> = characteristic.roots.iter().map(|r| format!("({}, {})", r.j, r.multiplicity)).collect();
    println!(
        "characteristic roots in 0..={scan}: [{}], free constants {}",
        roots.join(", "),
        characteristic.total_free_constants
    );
    println!("path: {recommended} (applicable: {})", if paths.is_empty() { "none".into() } else { paths.join(", ") });
    Ok(())
}

fn require_valid(spec: &ProblemSpec, grid_points: usize) -> Result<(), Failure> {
    let (passed, _, text) = validation_json(spec, grid_points);
    if passed {
        Ok(())
    } else {
        eprint!("{text}");
        Err(Failure::new(exit::INVALID_INPUT, "problem violates the hypotheses listed above"))
    }
}

pub fn asympt(path: &Path, order: u32, as_json: bool) -> Result<(), Failure> {
    let problem = load(path)?;
    require_valid(&problem.spec, 200)?;
    let asym = compute_asymptotics(&problem.spec, order)?;
    for w in &asym.warnings {
        eprintln!("warning: {w}");
    }
    if as_json {
        print_json(&asym.to_json())
    } else {
        println!("{}", asym.pretty());
        Ok(())
    }
}

pub struct SolveConfig {
    pub file: PathBuf,
    pub tol: f64,
    pub nodes: usize,
    pub order: Option<u32>,
    pub params: Vec<String>,
    pub out: Option<PathBuf>,
    pub strict_params: bool,
    pub grid_points: usize,
    pub samples: usize,
    pub json: bool,
}

/// Reads `name=value` pairs against the declared parameters. `c` names the
/// only parameter when there is exactly one.
fn bind_parameters(
    raw: &[String],
    asym: Option<&AsymptoticSolution>,
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<BTreeMap<ParamId, Real>, Failure> {
    let declared: Vec<ParamId> = asym.map(|a| a.free_parameters.clone()).unwrap_or_default();
    let mut bound = BTreeMap::new();
    for entry in raw {
        let (name, value) = entry
            .split_once('=')
            .ok_or_else(|| Failure::new(exit::INVALID_INPUT, format!("--param `{entry}` is not NAME=VALUE")))?;
        let id = match (name.trim(), declared.as_slice()) {
            ("c", [only]) => Some(*only),
            (other, _) => ParamId::parse(other),
        }
        .filter(|id| declared.contains(id))
        .ok_or_else(|| {
            Failure::new(exit::INVALID_INPUT, format!("`{name}` is not a free parameter of this problem"))
        })?;
        let value = parse_exact(value.trim())
            .map(Real::Exact)
            .ok_or_else(|| Failure::new(exit::INVALID_INPUT, format!("`{value}` is not a number")))?;
        bound.insert(id, value);
    }
    for id in declared {
        if let Entry::Vacant(slot) = bound.entry(id) {
            if strict {
                return Err(Failure::new(exit::MISSING_PARAMS, format!("no binding for free parameter `{id}`")));
            }
            warnings.push(format!("free parameter `{id}` defaulted to 0"));
            slot.insert(Real::zero());
        }
    }
    Ok(bound)
}

/// Grid on which residuals are reported: `[0.01, T′]` or the upper half
/// when the horizon is shorter.
fn residual_grid(horizon: f64, points: usize) -> Vec<f64> {
    let lo = if horizon > 0.02 { 0.01 } else { 0.5 * horizon };
    uniform_grid(lo, horizon, points.max(2))
}

fn residual_summary(report: &ResidualReport) -> Value {
    json!({
        "max_eq3": pjson::number(report.max_eq3()),
        "max_eq6": pjson::number(report.max_eq6()),
        "max_abs": pjson::number(report.max_abs()),
        "points": report.grid.len(),
        "range": [pjson::number(report.grid[0]), pjson::number(*report.grid.last().unwrap())],
    })
}

pub fn solve(cfg: &SolveConfig) -> Result<(), Failure> {
    if !(cfg.tol > 0.0) {
        return Err(Failure::new(exit::INVALID_INPUT, "--tol must be positive"));
    }
    let problem = load(&cfg.file)?;
    let spec = &problem.spec;
    require_valid(spec, cfg.grid_points)?;
    let consts = estimate_constants(spec, default_target_q(spec)?, cfg.grid_points)?;
    let mut warnings = Vec::new();

    let solution = if consts.a0 < 1.0 && consts.step_method_applicable() {
        bind_parameters(&cfg.params, None, cfg.strict_params, &mut warnings)?;
        let opts = StepOptions { nodes: cfg.nodes, tol: cfg.tol, ..StepOptions::default() };
        solve_step_method(spec, &consts, &opts)?
    } else {
        if !(consts.t_prime > 0.0 && consts.eps_bound < 1.0) {
            return Err(Failure::new(exit::NO_CONSTANTS, "neither construction is certified for this problem"));
        }
        let order = cfg.order.unwrap_or(consts.nstar).max(consts.nstar);
        let asym = compute_asymptotics(spec, order)?;
        warnings.extend(asym.warnings.iter().cloned());
        let params = bind_parameters(&cfg.params, Some(&asym), cfg.strict_params, &mut warnings)?;
        let opts = RefineOptions { nodes_per_panel: cfg.nodes, tol: cfg.tol, ..RefineOptions::default() };
        solve_with_correction(spec, &consts, &asym, &params, &opts)?
    };

    let report = residual_report(spec, solution.a.to_f64(), &solution, &residual_grid(solution.horizon, 41))?;
    let mut doc = solution.to_json(cfg.samples);
    let fields = doc.as_object_mut().expect("solution JSON is an object");
    fields.insert("problem_sha256".into(), json!(problem.hash));
    fields.insert("parameter_count".into(), json!(solution.parameters.len()));
    fields.insert("residuals".into(), residual_summary(&report));
    fields.insert("warnings".into(), json!(warnings));

    let out = cfg.out.clone().unwrap_or_else(|| cfg.file.with_extension("solution.json"));
    let csv = out.with_extension("csv");
    fs::write(&out, serde_json::to_string_pretty(&doc)? + "\n")?;
    fs::write(&csv, solution.samples_csv(cfg.samples))?;

    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if cfg.json {
        return print_json(&json!({
            "path": solution.path(),
            "a": pjson::number(solution.a.to_f64()),
            "a_exact": solution.a.as_rational().map(|_| solution.a.to_string()),
            "parameter_count": solution.parameters.len(),
            "residuals": residual_summary(&report),
            "solution": out.display().to_string(),
            "samples": csv.display().to_string(),
            "warnings": warnings,
        }));
    }
    println!("path: {}", solution.path());
    println!("a = {}", solution.a);
    if solution.parameters.is_empty() {
        println!("parameters: none");
    } else {
        let list: Vec<String> = solution.parameters.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        println!("parameters: {}", list.join(", "));
    }
    if let Some(c) = &solution.contraction {
        println!("contraction: l = {}, q_M = {}, q1 = {}, max ratio = {}", c.l, c.q_m, c.q1, c.max_ratio());
    }
    println!(
        "max residual on [{}, {}]: eq3 = {}, eq6 = {}",
        report.grid[0],
        report.grid.last().unwrap(),
        format_float(report.max_eq3()),
        format_float(report.max_eq6())
    );
    println!("solution: {}", out.display());
    println!("samples: {}", csv.display());
    Ok(())
}

pub fn verify(path: &Path, solution_path: &Path, threshold: f64, points: usize, as_json: bool) -> Result<(), Failure> {
    let problem = load(path)?;
    let text = fs::read_to_string(solution_path)
        .map_err(|e| Failure::new(exit::INVALID_INPUT, format!("{}: {e}", solution_path.display())))?;
    let doc: Value = serde_json::from_str(&text)?;
    let recorded = doc.get("problem_sha256").and_then(Value::as_str).unwrap_or("");
    if recorded != problem.hash {
        return Err(Failure::new(
            exit::HASH_MISMATCH,
            format!("solution was computed for problem hash `{recorded}`, file hash is `{}`", problem.hash),
        ));
    }
    let solution = GeneralizedSolution::from_json(&doc)?;
    let grid = residual_grid(solution.horizon, points);
    let report = residual_report(&problem.spec, solution.a.to_f64(), &solution, &grid)?;
    let passed = report.max_abs() <= threshold;
    if as_json {
        let mut value = report.to_json();
        value["threshold"] = pjson::number(threshold);
        value["passed"] = json!(passed);
        print_json(&value)?;
    } else {
        println!("t, eq3, eq6, representation");
        for i in 0..report.grid.len() {
            println!(
                "{}, {}, {}, {}",
                format_float(report.grid[i]),
                format_float(report.eq3[i]),
                format_float(report.eq6[i]),
                report.representation[i]
            );
        }
        println!("max |residual| = {} (threshold {threshold})", format_float(report.max_abs()));
        println!("{}", if passed { "PASS" } else { "FAIL" });
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::new(
            exit::VERIFY_FAILED,
            format!("max residual {} exceeds {threshold}", format_float(report.max_abs())),
        ))
    }
}

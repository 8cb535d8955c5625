use std::fmt::Write as _;
use std::path::Path;

use amlkit::bench::{BenchConfig, Family};
use amlkit::solve::{
    branch_and_bound, cutting_plane_solve, generators_for, BranchOptions, CuttingPlaneOptions, SolveError, SolveResult,
    SolverSession, TraceEntry,
};
use amlkit::{Model, StandardForm};

use crate::args::{Method, SizeArgs, SolveArgs};
use crate::config::CliConfig;
use crate::error::{usage, CliError};
use crate::models;

const DEFAULT_TOL: f64 = 1e-6;

enum Source {
    Family(Family),
    File(Box<Model>),
}

fn is_file_target(t: &str) -> bool {
    t.ends_with(".json") || Path::new(t).is_file()
}

fn load_file(path: &str) -> Result<Model, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
    let sf = StandardForm::from_json(&text).map_err(|e| usage(format!("invalid standard form in {path}: {e}")))?;
    Model::from_standard_form(&sf).map_err(|e| usage(format!("invalid standard form in {path}: {e}")))
}

/// Errors that mean "this model is outside what the solvers handle" are usage
/// errors; anything else is a runtime failure.
fn solve_error(e: SolveError) -> CliError {
    match e {
        SolveError::QuadraticObjective | SolveError::NonlinearObjective => {
            usage(format!("{e}; the solvers handle linear objectives only"))
        }
        SolveError::QuadraticRow(_) | SolveError::NonconvexEquality(_) => usage(e.to_string()),
        other => CliError::Other(anyhow::Error::new(other).context("solve failed")),
    }
}

#[derive(Clone, Copy)]
struct Settings {
    method: Method,
    tol: f64,
    max_iterations: Option<usize>,
    trace: bool,
}

fn solve_model(model: &Model, s: &Settings) -> Result<SolveResult<f64>, CliError> {
    if !model.objective().is_affine() || model.nl_objective().is_some() {
        let e = if model.nl_objective().is_some() { SolveError::NonlinearObjective } else { SolveError::QuadraticObjective };
        return Err(solve_error(e));
    }
    let mut m = model.clone();
    let has_ints = m.integer_flags().iter().any(|&b| b);
    let gens = generators_for(&m).map_err(solve_error)?;
    let method = match s.method {
        Method::Auto if has_ints => Method::Bnb,
        Method::Auto if !gens.is_empty() => Method::CuttingPlane,
        Method::Auto => Method::Simplex,
        other => other,
    };
    match method {
        Method::Simplex | Method::CuttingPlane if has_ints => {
            Err(usage("model has integer variables; use --method bnb or auto"))
        }
        Method::Simplex if !gens.is_empty() => {
            Err(usage("model has cone or nonlinear constraints; use --method cutting-plane or auto"))
        }
        Method::Simplex => SolverSession::new(&m).and_then(|mut ses| ses.solve(&m)).map_err(solve_error),
        Method::CuttingPlane => {
            let mut ses = SolverSession::new(&m).map_err(solve_error)?;
            let opts = CuttingPlaneOptions { tol: s.tol, max_iterations: s.max_iterations, ..Default::default() };
            let mut trace: Vec<TraceEntry<f64>> = Vec::new();
            let r = cutting_plane_solve(&mut m, &mut ses, &gens, opts, s.trace.then_some(&mut trace))
                .map_err(solve_error)?;
            for t in &trace {
                eprintln!(
                    "iter={} objective={:.9} cuts={} max_violation={:.3e}",
                    t.iteration, t.objective, t.cuts, t.max_violation
                );
            }
            Ok(r)
        }
        Method::Bnb => {
            branch_and_bound(&mut m, BranchOptions { tol: s.tol, ..Default::default() }).map_err(solve_error)
        }
        Method::Auto => unreachable!("auto resolved above"),
    }
}

fn build(src: &Source, size: &SizeArgs, bench: &BenchConfig) -> Result<Model, CliError> {
    match src {
        Source::File(m) => Ok(m.as_ref().clone()),
        Source::Family(f) => {
            let (n, cfg) = models::resolve_size(*f, size, bench)?;
            models::build(*f, n, &cfg)
        }
    }
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<String>), CliError> {
    let (param, values) = spec.split_once('=').ok_or_else(|| usage("--sweep expects PARAM=V1,V2,..."))?;
    let param = param.trim().to_string();
    if !["n", "m", "g", "f", "d", "tol"].contains(&param.as_str()) {
        return Err(usage(format!("cannot sweep `{param}`; expected n, m, g, f, d or tol")));
    }
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(usage("--sweep needs at least one value"));
    }
    Ok((param, values))
}

fn sweep(a: &SolveArgs, src: &Source, bench: &BenchConfig, base: Settings, spec: &str) -> Result<String, CliError> {
    let (param, values) = parse_sweep(spec)?;
    if param != "tol" && matches!(src, Source::File(_)) {
        return Err(usage("only `tol` can be swept when solving a file"));
    }
    let mut csv = String::from("param,value,status,objective,pivots,cuts,nodes\n");
    for v in &values {
        let mut size = a.size.clone();
        let mut settings = base;
        if param == "tol" {
            settings.tol = v.parse().map_err(|_| usage(format!("bad tol value `{v}`")))?;
        } else {
            let k: u64 = v.parse().ok().filter(|&k| k >= 1).ok_or_else(|| usage(format!("bad {param} value `{v}`")))?;
            let slot = match param.as_str() {
                "n" => &mut size.n,
                "m" => &mut size.m,
                "g" => &mut size.g,
                "f" => &mut size.f,
                _ => &mut size.d,
            };
            *slot = Some(k);
        }
        let r = solve_model(&build(src, &size, bench)?, &settings)?;
        let _ = writeln!(csv, "{param},{v},{},{},{},{},{}", r.status, r.objective, r.pivots, r.cuts, r.nodes);
    }
    Ok(csv)
}

pub fn run(a: &SolveArgs, cfg: &CliConfig) -> Result<(), CliError> {
    let target = models::target(&a.target, &a.family)?;
    let src = if a.family.is_none() && is_file_target(target) {
        if a.size.any() || a.size.use_default {
            return Err(usage("size flags do not apply when solving a file"));
        }
        Source::File(Box::new(load_file(target)?))
    } else {
        Source::Family(models::parse_family(target)?)
    };
    let tol = a.tol.or(cfg.tol).unwrap_or(DEFAULT_TOL);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(usage("--tol must be a positive number"));
    }
    let settings = Settings { method: a.method, tol, max_iterations: cfg.max_iterations, trace: a.trace };
    let bench = cfg.bench();
    let mut text = match &a.sweep {
        Some(spec) => sweep(a, &src, &bench, settings, spec)?,
        None => solve_model(&build(&src, &a.size, &bench)?, &settings)?.to_json(),
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    crate::emit(a.out.as_deref(), &text)
}

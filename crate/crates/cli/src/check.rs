use amlkit::ad::{gradient, hessian_vector_accumulate, quad_graph, AdError, NlpEvaluator, NlpWorkspace, ReverseWorkspace};
use amlkit::bench::interior_point;
use amlkit::hessian::{color, recover, SparsityPattern};
use amlkit::{AffExpr, Constraint, Expr, ExprGraph, Model};
use anyhow::Context;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::CheckArgs;
use crate::config::CliConfig;
use crate::error::CliError;
use crate::models;

const GRADIENT_TOL: f64 = 1e-6;
const HVP_TOL: f64 = 1e-5;
const RECOVERY_TOL: f64 = 1e-8;
/// Above this many variables, finite differences and the dense Hessian oracle
/// run on a random sample of columns.
const DENSE_LIMIT: usize = 2000;
const SAMPLED_COLUMNS: usize = 100;

/// Function values and first/second derivatives of `[f, c_1, ..., c_m]`.
trait Oracle {
    fn n(&self) -> usize;
    fn values(&mut self, x: &[f64]) -> Result<Vec<f64>, AdError>;
    /// `(output, variable, value)` triplets; output 0 is the objective.
    fn jacobian(&mut self, x: &[f64]) -> Result<Vec<(usize, usize, f64)>, AdError>;
    /// `Σ w_o ∇²c_o(x) d`, or `None` when second derivatives are unavailable.
    fn hvp(&mut self, x: &[f64], w: &[f64], d: &[f64]) -> Result<Option<Vec<f64>>, AdError>;
}

struct EvaluatorOracle {
    ev: NlpEvaluator<f64>,
    ws: NlpWorkspace<f64>,
    second_order: bool,
}

impl Oracle for EvaluatorOracle {
    fn n(&self) -> usize {
        self.ev.dims().0
    }

    fn values(&mut self, x: &[f64]) -> Result<Vec<f64>, AdError> {
        let (_, mg, mh) = self.ev.dims();
        let (mut g, mut h) = (vec![0.0; mg], vec![0.0; mh]);
        let f = self.ev.eval_objective(x, &mut self.ws)?;
        self.ev.eval_constraints(x, &mut self.ws, &mut g, &mut h)?;
        Ok(std::iter::once(f).chain(g).chain(h).collect())
    }

    fn jacobian(&mut self, x: &[f64]) -> Result<Vec<(usize, usize, f64)>, AdError> {
        let mut grad = vec![0.0; self.n()];
        self.ev.eval_objective_gradient(x, &mut self.ws, &mut grad)?;
        let mut vals = vec![0.0; self.ev.jacobian_sparsity().len()];
        self.ev.eval_jacobian(x, &mut self.ws, &mut vals)?;
        let mut out: Vec<_> = grad.iter().enumerate().filter(|p| *p.1 != 0.0).map(|(j, &v)| (0, j, v)).collect();
        out.extend(self.ev.jacobian_sparsity().iter().zip(&vals).map(|(&(r, j), &v)| (r + 1, j, v)));
        Ok(out)
    }

    fn hvp(&mut self, x: &[f64], w: &[f64], d: &[f64]) -> Result<Option<Vec<f64>>, AdError> {
        if !self.second_order {
            return Ok(None);
        }
        let mut out = vec![0.0; self.n()];
        self.ev.hessian_lagrangian_product(x, w[0], &w[1..], d, &mut self.ws, &mut out)?;
        Ok(Some(out))
    }
}

/// Objective plus one `‖x‖ − t` residual per cone, for models the evaluator
/// does not accept.
struct GraphOracle {
    n: usize,
    graphs: Vec<ExprGraph>,
    model: Model,
    ws: ReverseWorkspace<f64>,
}

fn aff_expr(a: &AffExpr) -> Expr {
    let mut parts: Vec<Expr> = a.terms().iter().map(|&(c, v)| c * Expr::var(v)).collect();
    parts.push(Expr::lit(a.constant()));
    Expr::sum(parts)
}

impl GraphOracle {
    fn new(model: &Model) -> anyhow::Result<Self> {
        let mut graphs = vec![quad_graph(model.objective())?];
        for c in model.constraints() {
            if let Constraint::Cone { t, x } = c {
                let norm = Expr::sum(x.iter().map(|e| aff_expr(e).powi(2)).collect()).sqrt();
                graphs.push(model.graph(&(norm - aff_expr(t)))?);
            }
        }
        Ok(GraphOracle { n: model.num_vars(), graphs, model: model.clone(), ws: ReverseWorkspace::new() })
    }
}

impl Oracle for GraphOracle {
    fn n(&self) -> usize {
        self.n
    }

    fn values(&mut self, x: &[f64]) -> Result<Vec<f64>, AdError> {
        let (p, f) = (self.model.params(), self.model.functions());
        self.graphs.iter().map(|g| amlkit::ad::eval_with(g, x, p, f, &mut self.ws)).collect()
    }

    fn jacobian(&mut self, x: &[f64]) -> Result<Vec<(usize, usize, f64)>, AdError> {
        let (p, f) = (self.model.params(), self.model.functions());
        let mut grad = vec![0.0; self.n];
        let mut out = Vec::new();
        for (o, g) in self.graphs.iter().enumerate() {
            gradient(g, x, p, f, &mut self.ws, &mut grad)?;
            out.extend(grad.iter().enumerate().filter(|q| *q.1 != 0.0).map(|(j, &v)| (o, j, v)));
        }
        Ok(out)
    }

    fn hvp(&mut self, x: &[f64], w: &[f64], d: &[f64]) -> Result<Option<Vec<f64>>, AdError> {
        let (p, f) = (self.model.params(), self.model.functions());
        if self.graphs.iter().any(|g| g.has_user_calls()) {
            return Ok(None);
        }
        let mut out = vec![0.0; self.n];
        for (g, &wo) in self.graphs.iter().zip(w) {
            hessian_vector_accumulate(g, x, d, p, f, &mut self.ws, wo, &mut out)?;
        }
        Ok(Some(out))
    }
}

/// Wraps an oracle and skews every first derivative it reports.
struct Corrupted(Box<dyn Oracle>);

impl Oracle for Corrupted {
    fn n(&self) -> usize {
        self.0.n()
    }
    fn values(&mut self, x: &[f64]) -> Result<Vec<f64>, AdError> {
        self.0.values(x)
    }
    fn jacobian(&mut self, x: &[f64]) -> Result<Vec<(usize, usize, f64)>, AdError> {
        let mut j = self.0.jacobian(x)?;
        j.iter_mut().for_each(|e| e.2 = e.2 * 1.001 + 1e-3);
        Ok(j)
    }
    fn hvp(&mut self, x: &[f64], w: &[f64], d: &[f64]) -> Result<Option<Vec<f64>>, AdError> {
        self.0.hvp(x, w, d)
    }
}

fn random_point(model: &Model, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mid = interior_point(model);
    model
        .lower()
        .iter()
        .zip(model.upper())
        .zip(mid)
        .map(|((&lo, &hi), m)| match (lo.is_finite(), hi.is_finite()) {
            (true, true) if hi > lo => lo + rng.gen_range(0.1..0.9) * (hi - lo),
            (true, true) => m,
            (true, false) => lo + rng.gen_range(0.1..2.0),
            (false, true) => hi - rng.gen_range(0.1..2.0),
            (false, false) => rng.gen_range(-1.0..1.0),
        })
        .collect()
}

fn columns(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n <= DENSE_LIMIT {
        (0..n).collect()
    } else {
        let mut c = sample(rng, n, SAMPLED_COLUMNS).into_vec();
        c.sort_unstable();
        c
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Largest relative gap between reported Jacobian columns and central differences.
fn gradient_error(o: &mut dyn Oracle, x: &[f64], cols: &[usize]) -> Result<f64, AdError> {
    let jac = o.jacobian(x)?;
    let outputs = o.values(x)?.len();
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); o.n()];
    for &(r, j, v) in &jac {
        by_col[j].push((r, v));
    }
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    for &j in cols {
        let h = 1e-6 * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let up = o.values(&xp)?;
        xp[j] = x[j] - h;
        let down = o.values(&xp)?;
        xp[j] = x[j];
        let mut ad = vec![0.0; outputs];
        for &(r, v) in &by_col[j] {
            ad[r] += v;
        }
        for r in 0..outputs {
            worst = worst.max(rel(ad[r], (up[r] - down[r]) / (2.0 * h)));
        }
    }
    Ok(worst)
}

fn lagrangian_gradient(o: &mut dyn Oracle, x: &[f64], w: &[f64]) -> Result<Vec<f64>, AdError> {
    let mut g = vec![0.0; o.n()];
    for (r, j, v) in o.jacobian(x)? {
        g[j] += w[r] * v;
    }
    Ok(g)
}

/// Relative gap between the Hessian-vector product and a central difference
/// of the weighted gradient; `None` when second derivatives are unavailable.
fn hvp_error(o: &mut dyn Oracle, x: &[f64], w: &[f64], d: &[f64]) -> Result<Option<f64>, AdError> {
    let Some(hv) = o.hvp(x, w, d)? else { return Ok(None) };
    let eps = 1e-6;
    let shifted = |s: f64| x.iter().zip(d).map(|(a, b)| a + s * eps * b).collect::<Vec<_>>();
    let up = lagrangian_gradient(o, &shifted(1.0), w)?;
    let down = lagrangian_gradient(o, &shifted(-1.0), w)?;
    let fd: Vec<f64> = up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
    let scale = fd.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(Some(hv.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale))
}

/// Colored Hessian of the Lagrangian against one unit-vector product per
/// column, including entries outside the detected pattern.
fn recovery_error(
    ev: &NlpEvaluator<f64>,
    x: &[f64],
    w: &[f64],
    cols: &[usize],
) -> Result<f64, AdError> {
    let mut ws = ev.workspace();
    let lower = ev.hessian_sparsity();
    let mut vals = vec![0.0; lower.len()];
    ev.eval_hessian_lagrangian(x, w[0], &w[1..], &mut ws, &mut vals)?;
    let n = x.len();
    let (mut e, mut col) = (vec![0.0; n], vec![0.0; n]);
    let mut worst = 0.0f64;
    for &j in cols {
        e[j] = 1.0;
        ev.hessian_lagrangian_product(x, w[0], &w[1..], &e, &mut ws, &mut col)?;
        e[j] = 0.0;
        for (i, &exact) in col.iter().enumerate() {
            let key = (i.max(j), i.min(j));
            let got = lower.binary_search(&key).map(|k| vals[k]).unwrap_or(0.0);
            worst = worst.max(rel(got, exact));
        }
    }
    Ok(worst)
}

fn fmt_err(e: f64, limit: f64) -> String {
    if e < limit {
        format!("<{limit:e}")
    } else {
        format!("={e:.2e}")
    }
}

fn fig4(a: &CheckArgs, seed: u64) -> Result<(), CliError> {
    let p = SparsityPattern::new(5, [(0, 0), (0, 1), (0, 3), (1, 1), (1, 2), (2, 2), (3, 3), (4, 4)]);
    let c = color(&p);
    if a.dump_coloring {
        print!("{}", c.dump());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let vals: Vec<f64> = (0..p.len()).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let cols: Vec<Vec<f64>> = c
            .seeds::<f64>()
            .iter()
            .map(|s| {
                let mut y = vec![0.0; p.n()];
                for (&(i, j), &h) in p.entries().iter().zip(&vals) {
                    y[i] += h * s[j];
                    if i != j {
                        y[j] += h * s[i];
                    }
                }
                y
            })
            .collect();
        let rec = recover(&c, &cols).context("recovering the fig4 matrix")?;
        worst = rec.iter().zip(&vals).fold(worst, |m, (a, b)| m.max((a - b).abs()));
    }
    if c.num_colors() != 2 {
        return Err(CliError::Check(format!("coloring: expected 2 colors, got {}", c.num_colors())));
    }
    if worst > 1e-12 {
        return Err(CliError::Check(format!("recovery: error {worst:e}")));
    }
    println!("colors={}, recovery exact", c.num_colors());
    Ok(())
}

pub fn run(a: &CheckArgs, cfg: &CliConfig) -> Result<(), CliError> {
    let target = models::target(&a.target, &a.family)?;
    let seed = a.seed.or(cfg.seed).unwrap_or(1);
    if target == "fig4" {
        return fig4(a, seed);
    }
    let family = models::parse_family(target)?;
    let (size, bench) = models::resolve_size(family, &a.size, &cfg.bench())?;
    let model = models::build(family, size, &bench)?;
    let has_cones = model.constraints().iter().any(|c| matches!(c, Constraint::Cone { .. }));

    let evaluator = if has_cones { None } else { Some(NlpEvaluator::new(&model).context("compiling derivatives")?) };
    let base: Box<dyn Oracle> = match &evaluator {
        Some(ev) => {
            let second_order = !ev.objective_graph().has_user_calls() && !ev.constraint_graphs().any(|g| g.has_user_calls());
            Box::new(EvaluatorOracle { ev: ev.clone(), ws: ev.workspace(), second_order })
        }
        None => Box::new(GraphOracle::new(&model)?),
    };
    let mut oracle: Box<dyn Oracle> = if a.corrupt_derivative { Box::new(Corrupted(base)) } else { base };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = oracle.n();
    let (mut grad_err, mut hvp_err, mut rec_err) = (0.0f64, None::<f64>, 0.0f64);
    for _ in 0..a.points.max(1) {
        let x = random_point(&model, &mut rng);
        let cols = columns(n, &mut rng);
        let outputs = oracle.values(&x).context("evaluating at a sample point")?.len();
        let w: Vec<f64> = (0..outputs).map(|o| if o == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        grad_err = grad_err.max(gradient_error(oracle.as_mut(), &x, &cols).context("gradient check")?);
        if let Some(e) = hvp_error(oracle.as_mut(), &x, &w, &d).context("Hessian-vector check")? {
            hvp_err = Some(hvp_err.unwrap_or(0.0).max(e));
        }
        if let (Some(ev), true) = (&evaluator, hvp_err.is_some()) {
            rec_err = rec_err.max(recovery_error(ev, &x, &w, &cols).context("coloring check")?);
        }
    }

    println!("model: {} size={} vars={} outputs={}", family.name(), size, n, oracle.values(&interior_point(&model)).map(|v| v.len()).unwrap_or(0));
    println!("gradient: max_rel_err={grad_err:.2e}");
    match hvp_err {
        Some(e) => println!("hvp: max_rel_err={e:.2e}"),
        None => println!("hvp: skipped (user-defined functions have no second derivatives)"),
    }
    match (&evaluator, hvp_err) {
        (None, _) => println!("hessian: n/a (cone constraints)"),
        (Some(_), None) => println!("hessian: n/a (user-defined functions)"),
        (Some(ev), Some(e)) => {
            let pattern = ev.hessian_pattern();
            let shape = if pattern.is_empty() {
                "empty".to_string()
            } else if pattern.is_diagonal() {
                "diagonal".to_string()
            } else {
                format!("nnz={}", ev.hessian_sparsity().len())
            };
            println!("hessian: {shape}, colors={}, max_fd_err{}", ev.coloring().num_colors(), fmt_err(e, 1e-6));
            println!("coloring: max_recovery_err={rec_err:.2e}");
        }
    }
    if a.dump_coloring {
        match &evaluator {
            Some(ev) => print!("{}", ev.coloring().dump()),
            None => println!("colors=n/a"),
        }
    }

    if grad_err > GRADIENT_TOL {
        return Err(CliError::Check(format!("gradient: max relative error {grad_err:.2e} exceeds {GRADIENT_TOL:e}")));
    }
    if let Some(e) = hvp_err.filter(|&e| e > HVP_TOL) {
        return Err(CliError::Check(format!("hvp: max relative error {e:.2e} exceeds {HVP_TOL:e}")));
    }
    if rec_err > RECOVERY_TOL {
        return Err(CliError::Check(format!("coloring: max recovery error {rec_err:.2e} exceeds {RECOVERY_TOL:e}")));
    }
    Ok(())
}

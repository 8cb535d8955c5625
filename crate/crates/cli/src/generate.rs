use amlkit::ad::NlpEvaluator;
use amlkit::Model;
use anyhow::Context;
use serde_json::json;

use crate::args::GenerateArgs;
use crate::config::CliConfig;
use crate::error::CliError;
use crate::models;

/// Nonlinear models have no standard form; dump their derivative structure
/// instead: bounds, row counts, Jacobian and Hessian sparsity, coloring.
fn structure_json(model: &Model) -> Result<String, CliError> {
    let ev = NlpEvaluator::new(model).context("compiling derivative structure")?;
    let (n, mg, mh) = ev.dims();
    let pairs = |p: &[(usize, usize)]| p.iter().map(|&(i, j)| [i, j]).collect::<Vec<_>>();
    let v = json!({
        "num_vars": n,
        "lb": model.lower().iter().map(|&v| bound(v)).collect::<Vec<_>>(),
        "ub": model.upper().iter().map(|&v| bound(v)).collect::<Vec<_>>(),
        "num_ineq": mg,
        "num_eq": mh,
        "jacobian": pairs(ev.jacobian_sparsity()),
        "hessian": pairs(ev.hessian_sparsity()),
        "colors": ev.coloring().num_colors(),
    });
    Ok(serde_json::to_string_pretty(&v).expect("json values always serialize"))
}

fn bound(v: f64) -> serde_json::Value {
    if v == f64::INFINITY {
        json!("inf")
    } else if v == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!(v)
    }
}

pub fn run(a: &GenerateArgs, cfg: &CliConfig) -> Result<(), CliError> {
    let family = models::parse_family(models::target(&a.target, &a.family)?)?;
    let (size, bench) = models::resolve_size(family, &a.size, &cfg.bench())?;
    let model = models::build(family, size, &bench)?;
    let mut text = if family.is_nonlinear() {
        structure_json(&model)?
    } else {
        model.to_standard_form().context("extracting the standard form")?.to_json()
    };
    text.push('\n');
    crate::emit(a.out.as_deref(), &text)
}

//! The benchmark problems written out directly as formulas, independent of
//! the builders, and checks that compare the two.

use std::collections::BTreeMap;

use amlkit::ad::NlpEvaluator;
use amlkit::bench::{build_clnlbeam, build_fac, build_lqcp, ClnlbeamParams, FacParams, LqcpParams};
use amlkit::model::Constraint;

use super::{random_point, rng};

/// Objective and row residuals (`body − rhs`) in builder row order.
pub fn lqcp(p: &LqcpParams, x: &[f64]) -> (f64, Vec<f64>) {
    let (m, n) = (p.m, p.n);
    let dx = 1.0 / n as f64;
    let dt = 1.0 / m as f64;
    let h2 = dx * dx;
    let y = |i: usize, j: usize| x[i * (n + 1) + j];
    let u = |i: usize| x[(m + 1) * (n + 1) + i];
    let yt = |j: usize| 0.5 * (1.0 - (j as f64 * dx).powi(2));

    let mut state = (y(m, 0) - yt(0)).powi(2) + (y(m, n) - yt(n)).powi(2);
    for j in 1..n {
        state += 2.0 * (y(m, j) - yt(j)).powi(2);
    }
    let mut control = u(m).powi(2);
    for i in 1..m {
        control += 2.0 * u(i).powi(2);
    }
    let obj = 0.25 * dx * state + 0.25 * p.a * dt * control;

    let mut rows = Vec::new();
    for i in 0..m {
        for j in 1..n {
            let lap_now = y(i, j - 1) - 2.0 * y(i, j) + y(i, j + 1);
            let lap_next = y(i + 1, j - 1) - 2.0 * y(i + 1, j) + y(i + 1, j + 1);
            rows.push((y(i + 1, j) - y(i, j)) / dt - 0.5 * (lap_now + lap_next) / h2);
        }
    }
    for j in 0..=n {
        rows.push(y(0, j));
    }
    for i in 0..=m {
        rows.push(y(i, 2) - 4.0 * y(i, 1) + 3.0 * y(i, 0));
    }
    for i in 0..=m {
        rows.push((y(i, n - 2) - 4.0 * y(i, n - 1) + 3.0 * y(i, n)) / (2.0 * dx) - u(i) + y(i, n));
    }
    (obj, rows)
}

/// Objective, then assignment residuals, then `‖x_c − y_f‖ − d − M(1 − z_cf)`.
pub fn fac(g: usize, nf: usize, x: &[f64]) -> (f64, Vec<f64>) {
    let big_m = 2f64.sqrt();
    let nc = (g + 1) * (g + 1);
    let d = x[0];
    let y = |f: usize, k: usize| x[1 + 2 * f + k];
    let z = |c: usize, f: usize| x[1 + 2 * nf + c * nf + f];
    let mut rows: Vec<f64> = (0..nc).map(|c| (0..nf).map(|f| z(c, f)).sum::<f64>() - 1.0).collect();
    for c in 0..nc {
        let xc = [(c / (g + 1)) as f64 / g as f64, (c % (g + 1)) as f64 / g as f64];
        for f in 0..nf {
            let dist = ((xc[0] - y(f, 0)).powi(2) + (xc[1] - y(f, 1)).powi(2)).sqrt();
            rows.push(dist - d - big_m * (1.0 - z(c, f)));
        }
    }
    (d, rows)
}

/// Objective and the `2n` equality residuals.
pub fn clnlbeam(n: usize, alpha: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let t = |i: usize| x[i];
    let xs = |i: usize| x[n + 1 + i];
    let u = |i: usize| x[2 * (n + 1) + i];
    let h = 1.0 / n as f64;
    let obj = (0..n)
        .map(|i| h / 2.0 * (u(i + 1).powi(2) + u(i).powi(2)) + alpha * h / 2.0 * (t(i + 1).cos() + t(i).cos()))
        .sum();
    let mut rows: Vec<f64> =
        (0..n).map(|i| xs(i + 1) - xs(i) - (t(i + 1).sin() + t(i).sin()) / (2.0 * n as f64)).collect();
    rows.extend((0..n).map(|i| t(i + 1) - t(i) - (u(i + 1) + u(i)) / (2.0 * n as f64)));
    (obj, rows)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn scalar_residuals(cs: &[Constraint<f64>], x: &[f64]) -> Vec<f64> {
    cs.iter()
        .map(|c| match c {
            Constraint::Scalar { body, rhs, .. } => body.evaluate(x) - rhs,
            Constraint::Cone { t, x: xs } => {
                xs.iter().map(|e| e.evaluate(x).powi(2)).sum::<f64>().sqrt() - t.evaluate(x)
            }
        })
        .collect()
}

fn compare(label: &str, got: (f64, Vec<f64>), want: (f64, Vec<f64>)) -> Result<f64, String> {
    if got.1.len() != want.1.len() {
        return Err(format!("{label}: {} rows, formula has {}", got.1.len(), want.1.len()));
    }
    let worst = got.1.iter().zip(&want.1).map(|(a, b)| rel(*a, *b)).fold(rel(got.0, want.0), f64::max);
    Ok(worst)
}

/// Largest relative deviation between each model and its formula over
/// `points` random points, checked through the model, its standard form
/// (linear families) and the NLP evaluator (nonlinear family).
pub fn max_deviation(seed: u64, points: usize) -> Result<f64, String> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;

    let p = LqcpParams::new(5, 7);
    let model = build_lqcp::<f64>(&p).map_err(|e| e.to_string())?;
    let sf = model.to_standard_form().map_err(|e| e.to_string())?;
    for _ in 0..points {
        let x = random_point(&mut r, model.lower(), model.upper());
        let want = lqcp(&p, &x);
        worst = worst.max(compare("lqcp", (model.objective_value(&x), scalar_residuals(model.constraints(), &x)), want.clone())?);
        let act: Vec<f64> = sf.row_activity(&x).iter().zip(&sf.b).map(|(a, b)| a - b).collect();
        worst = worst.max(compare("lqcp standard form", (sf.objective(&x), act), want)?);
    }

    let (g, nf) = (2, 3);
    let model = build_fac::<f64>(&FacParams { g, f: nf }).map_err(|e| e.to_string())?;
    let ones = vec![1.0; model.num_vars()];
    for _ in 0..points {
        let x = random_point(&mut r, &vec![0.0; model.num_vars()], &ones);
        let got = (model.objective_value(&x), scalar_residuals(model.constraints(), &x));
        worst = worst.max(compare("fac", got, fac(g, nf, &x))?);
    }

    let p = ClnlbeamParams::new(9);
    let model = build_clnlbeam::<f64>(&p).map_err(|e| e.to_string())?;
    let ev = NlpEvaluator::new(&model).map_err(|e| e.to_string())?;
    let mut ws = ev.workspace();
    let (_, mg, mh) = ev.dims();
    for _ in 0..points {
        let x = random_point(&mut r, model.lower(), model.upper());
        let f = ev.eval_objective(&x, &mut ws).map_err(|e| e.to_string())?;
        let (mut gv, mut hv) = (vec![0.0; mg], vec![0.0; mh]);
        ev.eval_constraints(&x, &mut ws, &mut gv, &mut hv).map_err(|e| e.to_string())?;
        gv.extend(hv);
        worst = worst.max(compare("clnlbeam", (f, gv), clnlbeam(p.n, p.alpha, &x))?);
    }
    Ok(worst)
}

/// Expands `1 + Σ_i Σ_j |j − i| (1 − x_ij) x_1j` by hand into merged
/// quadratic `(col, col) → coef` and linear `col → coef` maps plus the constant.
pub fn quadexample(d: usize) -> (BTreeMap<(usize, usize), f64>, BTreeMap<usize, f64>, f64) {
    let col = |i: usize, j: usize| (i - 1) * d + (j - 1);
    let mut quad = BTreeMap::new();
    let mut lin = BTreeMap::new();
    for i in 1..=d {
        for j in 1..=d {
            let w = (j as f64 - i as f64).abs();
            *lin.entry(col(1, j)).or_insert(0.0) += w;
            let (a, b) = (col(i, j).min(col(1, j)), col(i, j).max(col(1, j)));
            *quad.entry((a, b)).or_insert(0.0) -= w;
        }
    }
    quad.retain(|_, v| *v != 0.0);
    lin.retain(|_, v| *v != 0.0);
    (quad, lin, 1.0)
}

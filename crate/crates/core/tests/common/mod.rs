//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod formulas;

use amlkit::ad::NlpEvaluator;
use amlkit::bench::{BenchConfig, Edge, Family, MinCostFlowData};
use amlkit::model::{AffExpr, Constraint, Model};
use amlkit::nlexpr::{Expr, ExprGraph};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Uniform point inside the bounds, with infinite sides replaced by ±2.
pub fn random_point(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&l, &h)| {
            let (l, h) = (l.max(-2.0), h.min(2.0));
            if l == h {
                l
            } else {
                rng.gen_range(l..h)
            }
        })
        .collect()
}

/// Central differences with step `1e-6·(1 + |xᵢ|)`.
pub fn fd_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + x[i].abs());
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖a − b‖∞ / (1 + ‖a‖∞)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    inf_norm(&d) / (1.0 + inf_norm(a))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn covers(c: [f64; 2], r: f64, pts: &[[f64; 2]]) -> bool {
    pts.iter().all(|&p| dist(c, p) <= r + 1e-12)
}

/// Radius of the smallest circle enclosing `pts`, by trying every circle
/// through two or three of them.
pub fn enclosing_radius(pts: &[[f64; 2]]) -> f64 {
    if pts.len() <= 1 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (a, b) = (pts[i], pts[j]);
            let c = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let r = dist(a, b) / 2.0;
            if r < best && covers(c, r, pts) {
                best = r;
            }
            for &p in &pts[j + 1..] {
                let d = 2.0 * (a[0] * (b[1] - p[1]) + b[0] * (p[1] - a[1]) + p[0] * (a[1] - b[1]));
                if d.abs() < 1e-14 {
                    continue;
                }
                let sq = |q: [f64; 2]| q[0] * q[0] + q[1] * q[1];
                let ux = (sq(a) * (b[1] - p[1]) + sq(b) * (p[1] - a[1]) + sq(p) * (a[1] - b[1])) / d;
                let uy = (sq(a) * (p[0] - b[0]) + sq(b) * (a[0] - p[0]) + sq(p) * (b[0] - a[0])) / d;
                let c = [ux, uy];
                let r = dist(c, a);
                if r < best && covers(c, r, pts) {
                    best = r;
                }
            }
        }
    }
    best
}

/// Min-max facility distance by enumerating every customer-to-facility
/// assignment; each facility sits at the center of its group's enclosing circle.
pub fn fac_bruteforce(g: usize, f: usize) -> f64 {
    let gf = g as f64;
    let pts: Vec<[f64; 2]> = (0..=g).flat_map(|i| (0..=g).map(move |j| [i as f64 / gf, j as f64 / gf])).collect();
    let total = f.pow(pts.len() as u32);
    let mut best = f64::INFINITY;
    for code in 0..total {
        let mut groups = vec![Vec::new(); f];
        let mut k = code;
        for &p in &pts {
            groups[k % f].push(p);
            k /= f;
        }
        let d = groups.iter().map(|gr| enclosing_radius(gr)).fold(0.0, f64::max);
        best = best.min(d);
    }
    best
}

/// Every simple source-to-sink path as a list of edge indices.
pub fn simple_paths(data: &MinCostFlowData) -> Vec<Vec<usize>> {
    fn walk(data: &MinCostFlowData, node: usize, seen: &mut Vec<usize>, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if node == data.n {
            out.push(path.clone());
            return;
        }
        for (k, e) in data.edges.iter().enumerate() {
            if e.from == node && !seen.contains(&e.to) {
                seen.push(e.to);
                path.push(k);
                walk(data, e.to, seen, path, out);
                path.pop();
                seen.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(data, 1, &mut vec![1], &mut Vec::new(), &mut out);
    out
}

/// Unit flow over edge-disjoint paths, filled cheapest path first. Exact when
/// the paths share no edge, which the caller asserts.
pub fn path_enumeration_flow(data: &MinCostFlowData) -> (f64, Vec<f64>) {
    let mut paths = simple_paths(data);
    let mut used = vec![false; data.edges.len()];
    for p in &paths {
        for &k in p {
            assert!(!used[k], "paths must be edge-disjoint");
            used[k] = true;
        }
    }
    let cost = |p: &Vec<usize>| p.iter().map(|&k| data.edges[k].cost).sum::<f64>();
    paths.sort_by(|a, b| cost(a).total_cmp(&cost(b)));
    let mut flow = vec![0.0; data.edges.len()];
    let (mut left, mut total) = (1.0f64, 0.0);
    for p in &paths {
        let cap = p.iter().map(|&k| data.edges[k].capacity).fold(f64::INFINITY, f64::min);
        let amt = cap.min(left);
        for &k in p {
            flow[k] += amt;
        }
        total += amt * cost(p);
        left -= amt;
    }
    assert!(left.abs() < 1e-12, "network cannot carry a unit of flow");
    (total, flow)
}

pub fn edge(from: usize, to: usize, cost: f64, capacity: f64) -> Edge {
    Edge { from, to, cost, capacity }
}

pub struct GraphCase {
    pub name: String,
    pub model: Model<f64>,
    pub graphs: Vec<ExprGraph<f64>>,
}

fn aff_to_expr(a: &AffExpr<f64>) -> Expr<f64> {
    let mut parts: Vec<Expr<f64>> = a.terms().iter().map(|&(c, v)| c * Expr::var(v)).collect();
    parts.push(Expr::lit(a.constant()));
    Expr::sum(parts)
}

/// Expression graphs of every benchmark family at small size: evaluator
/// objective and row graphs, plus `‖x‖ − t` graphs for each cone.
pub fn benchmark_graphs() -> Vec<GraphCase> {
    let cfg = BenchConfig::default();
    let sizes = [
        (Family::MinCostFlow, 5),
        (Family::Lqcp, 4),
        (Family::Fac, 2),
        (Family::Clnlbeam, 6),
        (Family::QuadExample, 4),
        (Family::L2Ball, 5),
        (Family::Sqrt, 0),
    ];
    sizes
        .iter()
        .map(|&(family, size)| {
            let model = cfg.build(family, size).unwrap();
            let mut graphs = Vec::new();
            let has_cones = model.constraints().iter().any(|c| matches!(c, Constraint::Cone { .. }));
            if has_cones {
                for c in model.constraints() {
                    if let Constraint::Cone { t, x } = c {
                        let sq = Expr::sum(x.iter().map(|e| aff_to_expr(e).powi(2)).collect());
                        graphs.push(model.graph(&(sq.sqrt() - aff_to_expr(t))).unwrap());
                    }
                }
            } else {
                let ev = NlpEvaluator::new(&model).unwrap();
                graphs.push(ev.objective_graph().clone());
                graphs.extend(ev.constraint_graphs().cloned());
            }
            GraphCase { name: format!("{}-{}", family.name(), size), model, graphs }
        })
        .collect()
}

//! Linear, quadratic and conic benchmark families.

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::model::{AffExpr, Constraint, Model, ObjectiveSense, QuadExpr, Term, VarId};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
    pub capacity: f64,
}

/// A network with source node 1 and sink node `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinCostFlowData {
    pub n: usize,
    pub edges: Vec<Edge>,
}

impl Default for MinCostFlowData {
    /// The five-node, six-edge example network.
    fn default() -> Self {
        let e = |from, to, cost, capacity| Edge { from, to, cost, capacity };
        MinCostFlowData {
            n: 5,
            edges: vec![
                e(1, 2, 1.0, 0.5),
                e(1, 3, 2.0, 0.4),
                e(1, 4, 3.0, 0.6),
                e(2, 5, 2.0, 0.3),
                e(3, 5, 2.0, 0.6),
                e(4, 5, 2.0, 0.5),
            ],
        }
    }
}

impl MinCostFlowData {
    /// Scalable network on nodes `1..=n`: hops `i→i+1` and skips `i→i+2`.
    pub fn ladder(n: usize) -> Self {
        let mut edges = Vec::with_capacity(2 * n);
        for i in 1..n {
            edges.push(Edge { from: i, to: i + 1, cost: 1.0 + (i % 3) as f64, capacity: 0.6 });
            if i + 2 <= n {
                edges.push(Edge { from: i, to: i + 2, cost: 2.5, capacity: 0.5 });
            }
        }
        MinCostFlowData { n, edges }
    }
}

/// One flow variable per edge in `[0, capacity]`, the unit sink-inflow row,
/// then one conservation row per interior node `2..n−1`.
pub fn build_mincostflow<T: Real>(data: &MinCostFlowData) -> Result<Model<T>, BenchError> {
    let n = data.n;
    for (k, e) in data.edges.iter().enumerate() {
        for node in [e.from, e.to] {
            if node == 0 || node > n {
                return Err(BenchError::EdgeNode { edge: k, node, n });
            }
        }
        if e.capacity < 0.0 || e.capacity.is_nan() {
            return Err(BenchError::Param(format!("edge {k} has negative capacity")));
        }
    }
    let mut m = Model::new();
    let flow: Vec<VarId> =
        data.edges.iter().map(|e| m.add_variable(T::zero(), T::of(e.capacity), false)).collect::<Result<_, _>>()?;

    let into = |node: usize| data.edges.iter().zip(&flow).filter(move |(e, _)| e.to == node).map(|(_, &v)| v);
    let out_of = |node: usize| data.edges.iter().zip(&flow).filter(move |(e, _)| e.from == node).map(|(_, &v)| v);

    let sink = AffExpr::from_terms(into(n).map(|v| (T::one(), v)).collect(), T::zero());
    m.add_constraint(Constraint::eq(sink, T::one()))?;
    for node in 2..n {
        let mut e = AffExpr::new();
        into(node).for_each(|v| e.push(T::one(), v));
        out_of(node).for_each(|v| e.push(-T::one(), v));
        m.add_constraint(Constraint::eq(e, T::zero()))?;
    }
    let cost = AffExpr::from_terms(data.edges.iter().zip(&flow).map(|(e, &v)| (T::of(e.cost), v)).collect(), T::zero());
    m.set_objective(ObjectiveSense::Min, cost)?;
    Ok(m)
}

/// `1 + Σ_i Σ_j |c_j − i| (1 − x_ij) x_1j` over `x` indexed by `1..=d` squared,
/// accumulated into one expression with `2d² + 1` appends. `x[(i−1)·d + (j−1)]`
/// holds `x_ij`.
pub fn quadexample_expr<T: Real>(x: &[VarId], c: &[f64]) -> QuadExpr<T> {
    let d = c.len();
    assert_eq!(x.len(), d * d, "x must hold d² variables");
    let at = |i: usize, j: usize| x[(i - 1) * d + (j - 1)];
    let terms = (1..=d).flat_map(|i| {
        (1..=d).flat_map(move |j| {
            let w = T::of((c[j - 1] - i as f64).abs());
            [Term::Linear(w, at(1, j)), Term::Quad(-w, at(i, j), at(1, j))]
        })
    });
    let mut e = QuadExpr::sum(terms, d * d);
    e.add_constant(T::one());
    e
}

/// Model whose objective is [`quadexample_expr`] with `c_j = j`, over `x ∈ [0,1]^{d×d}`.
pub fn build_quadexample<T: Real>(d: usize) -> Result<Model<T>, BenchError> {
    if d == 0 {
        return Err(BenchError::Param("d must be positive".into()));
    }
    let mut m = Model::new();
    m.reserve_variables(d * d);
    let x: Vec<VarId> = (0..d * d).map(|_| m.add_variable(T::zero(), T::one(), false)).collect::<Result<_, _>>()?;
    let c: Vec<f64> = (1..=d).map(|j| j as f64).collect();
    m.set_objective(ObjectiveSense::Min, quadexample_expr(&x, &c))?;
    Ok(m)
}

/// Linear-quadratic boundary control on an `(m+1)×(n+1)` grid. Unset
/// discretization constants default to `Δx = 1/n`, `Δt = 1/m`, `h₂ = Δx²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqcpParams {
    pub m: usize,
    pub n: usize,
    #[serde(default = "LqcpParams::default_a")]
    pub a: f64,
    #[serde(default)]
    pub dx: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub h2: Option<f64>,
}

impl LqcpParams {
    fn default_a() -> f64 {
        0.001
    }

    pub fn new(m: usize, n: usize) -> Self {
        LqcpParams { m, n, a: Self::default_a(), dx: None, dt: None, h2: None }
    }

    pub fn dx(&self) -> f64 {
        self.dx.unwrap_or(1.0 / self.n as f64)
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(1.0 / self.m as f64)
    }

    pub fn h2(&self) -> f64 {
        self.h2.unwrap_or(self.dx() * self.dx())
    }

    /// Target profile `½(1 − (jΔx)²)`.
    pub fn target(&self, j: usize) -> f64 {
        let s = j as f64 * self.dx();
        0.5 * (1.0 - s * s)
    }

    /// Column of `y_ij`; the `y` block is row-major over `i`.
    pub fn y_index(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    /// Column of `u_i`, after all `y`.
    pub fn u_index(&self, i: usize) -> usize {
        (self.m + 1) * (self.n + 1) + i
    }

    pub fn num_vars(&self) -> usize {
        (self.m + 1) * (self.n + 2)
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.m < 2 || self.n < 2 {
            return Err(BenchError::Param(format!("lqcp needs m, n ≥ 2 (got m={}, n={})", self.m, self.n)));
        }
        for (name, v) in [("dx", self.dx()), ("dt", self.dt()), ("h2", self.h2())] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BenchError::Param(format!("lqcp {name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Rows in order: heat-equation rows for `i < m, 0 < j < n`, then `y_0j = 0`,
/// the three-point rows at `j = 0` and the Neumann rows at `j = n`.
pub fn build_lqcp<T: Real>(p: &LqcpParams) -> Result<Model<T>, BenchError> {
    p.validate()?;
    let (m, n) = (p.m, p.n);
    let (dx, dt, h2, a) = (p.dx(), p.dt(), p.h2(), p.a);
    let mut model = Model::new();
    for _ in 0..(m + 1) * (n + 1) {
        model.add_variable(T::zero(), T::one(), false)?;
    }
    for _ in 0..=m {
        model.add_variable(-T::one(), T::one(), false)?;
    }
    let y = |i: usize, j: usize| model.var(p.y_index(i, j));
    let u = |i: usize| model.var(p.u_index(i));

    let mut obj = QuadExpr::with_capacity(n + m + 1, n + 1);
    // w (y − t)² expanded as w y² − 2wt y + w t².
    for j in 0..=n {
        let w = 0.25 * dx * if j == 0 || j == n { 1.0 } else { 2.0 };
        let t = p.target(j);
        obj.push_quad(T::of(w), y(m, j), y(m, j));
        obj.push_linear(T::of(-2.0 * w * t), y(m, j));
        obj.add_constant(T::of(w * t * t));
    }
    for i in 1..=m {
        let w = 0.25 * a * dt * if i == m { 1.0 } else { 2.0 };
        obj.push_quad(T::of(w), u(i), u(i));
    }

    let mut rows = Vec::with_capacity(m * (n - 1) + 3 * (m + 1) + n - 2);
    let k = 1.0 / (2.0 * h2);
    for i in 0..m {
        for j in 1..n {
            let mut e = AffExpr::with_capacity(8);
            e.push(T::of(1.0 / dt), y(i + 1, j));
            e.push(T::of(-1.0 / dt), y(i, j));
            for (c, v) in [
                (1.0, y(i, j - 1)),
                (-2.0, y(i, j)),
                (1.0, y(i, j + 1)),
                (1.0, y(i + 1, j - 1)),
                (-2.0, y(i + 1, j)),
                (1.0, y(i + 1, j + 1)),
            ] {
                e.push(T::of(-k * c), v);
            }
            rows.push(e);
        }
    }
    for j in 0..=n {
        rows.push(AffExpr::from(y(0, j)));
    }
    for i in 0..=m {
        rows.push(AffExpr::from_terms(vec![(T::one(), y(i, 2)), (T::of(-4.0), y(i, 1)), (T::of(3.0), y(i, 0))], T::zero()));
    }
    let r = 1.0 / (2.0 * dx);
    for i in 0..=m {
        rows.push(AffExpr::from_terms(
            vec![
                (T::of(r), y(i, n - 2)),
                (T::of(-4.0 * r), y(i, n - 1)),
                (T::of(3.0 * r), y(i, n)),
                (-T::one(), u(i)),
                (T::one(), y(i, n)),
            ],
            T::zero(),
        ));
    }
    for e in rows {
        model.add_constraint(Constraint::eq(e, T::zero()))?;
    }
    model.set_objective(ObjectiveSense::Min, obj)?;
    Ok(model)
}

/// Min-max facility location: customers on the `(G+1)²` grid `(i/G, j/G)`,
/// `F` facilities in the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacParams {
    pub g: usize,
    pub f: usize,
}

impl FacParams {
    pub fn customers(&self) -> Vec<[f64; 2]> {
        let g = self.g as f64;
        (0..=self.g).flat_map(|i| (0..=self.g).map(move |j| [i as f64 / g, j as f64 / g])).collect()
    }

    /// Largest customer distance. Customers span the unit square, so this is
    /// the diagonal between opposite corners.
    pub fn big_m(&self) -> f64 {
        std::f64::consts::SQRT_2
    }

    pub fn d_index(&self) -> usize {
        0
    }

    pub fn y_index(&self, f: usize, k: usize) -> usize {
        1 + 2 * f + k
    }

    pub fn z_index(&self, c: usize, f: usize) -> usize {
        1 + 2 * self.f + c * self.f + f
    }
}

/// Variables `d ≥ 0`, `y_f ∈ [0,1]²`, binary `z_cf`. Each customer has an
/// assignment row `Σ_f z_cf = 1`; each pair `(c, f)` a cone
/// `‖x_c − y_f‖ ≤ d + M − M z_cf`.
pub fn build_fac<T: Real>(p: &FacParams) -> Result<Model<T>, BenchError> {
    if p.g == 0 || p.f == 0 {
        return Err(BenchError::Param("fac needs G ≥ 1 and F ≥ 1".into()));
    }
    let pts = p.customers();
    let big_m = T::of(p.big_m());
    let mut m = Model::new();
    let d = m.add_variable(T::zero(), T::infinity(), false)?;
    m.set_objective(ObjectiveSense::Min, d)?;
    let y: Vec<[VarId; 2]> = (0..p.f)
        .map(|_| Ok([m.add_variable(T::zero(), T::one(), false)?, m.add_variable(T::zero(), T::one(), false)?]))
        .collect::<Result<_, BenchError>>()?;
    let z: Vec<Vec<VarId>> = (0..pts.len()).map(|_| (0..p.f).map(|_| m.add_binary()).collect()).collect();
    for zc in &z {
        m.add_constraint(Constraint::eq(AffExpr::from_terms(zc.iter().map(|&v| (T::one(), v)).collect(), T::zero()), T::one()))?;
    }
    for (c, xc) in pts.iter().enumerate() {
        for f in 0..p.f {
            let t = AffExpr::from_terms(vec![(T::one(), d), (-big_m, z[c][f])], big_m);
            let diff = (0..2).map(|k| AffExpr::from_terms(vec![(-T::one(), y[f][k])], T::of(xc[k]))).collect();
            m.add_constraint(Constraint::cone(t, diff))?;
        }
    }
    Ok(m)
}

/// `max Σx` over `x ∈ [−1,1]^n` with `‖x‖₂ ≤ 1`.
pub fn build_l2ball<T: Real>(n: usize) -> Result<Model<T>, BenchError> {
    if n == 0 {
        return Err(BenchError::Param("n must be positive".into()));
    }
    let mut m = Model::new();
    let x: Vec<VarId> = (0..n).map(|_| m.add_variable(-T::one(), T::one(), false)).collect::<Result<_, _>>()?;
    m.set_objective(ObjectiveSense::Max, AffExpr::from_terms(x.iter().map(|&v| (T::one(), v)).collect(), T::zero()))?;
    m.add_constraint(Constraint::cone(AffExpr::constant_expr(T::one()), x.iter().map(|&v| v.into()).collect()))?;
    Ok(m)
}

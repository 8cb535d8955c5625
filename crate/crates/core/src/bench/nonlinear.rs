//! Nonlinear benchmark families and the user-function example model.

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::model::{AffExpr, Model, ObjectiveSense, RowSense, VarId};
use crate::nlexpr::{Expr, GenericFunction, UserFnError};
use crate::scalar::{Real, Scalar};

/// Elastic-beam control problem with `n` intervals. `h = 1/n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClnlbeamParams {
    pub n: usize,
    #[serde(default = "ClnlbeamParams::default_alpha")]
    pub alpha: f64,
}

impl ClnlbeamParams {
    fn default_alpha() -> f64 {
        350.0
    }

    pub fn new(n: usize) -> Self {
        ClnlbeamParams { n, alpha: Self::default_alpha() }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Columns are laid out as `t_0..t_n`, `x_0..x_n`, `u_0..u_n`.
    pub fn t_index(&self, i: usize) -> usize {
        i
    }

    pub fn x_index(&self, i: usize) -> usize {
        self.n + 1 + i
    }

    pub fn u_index(&self, i: usize) -> usize {
        2 * (self.n + 1) + i
    }
}

/// Objective `Σ h/2 (u²ᵢ₊₁ + u²ᵢ) + αh/2 (cos tᵢ₊₁ + cos tᵢ)`, then the `n`
/// rows `xᵢ₊₁ − xᵢ − h/2 (sin tᵢ₊₁ + sin tᵢ) = 0` followed by the `n` rows
/// `tᵢ₊₁ − tᵢ − h/2 (uᵢ₊₁ + uᵢ) = 0`. End points of `t` and `x` are fixed
/// through their bounds.
pub fn build_clnlbeam<T: Real>(p: &ClnlbeamParams) -> Result<Model<T>, BenchError> {
    let n = p.n;
    if n < 2 {
        return Err(BenchError::Param(format!("clnlbeam needs n ≥ 2 (got {n})")));
    }
    if !p.alpha.is_finite() {
        return Err(BenchError::Param("clnlbeam alpha must be finite".into()));
    }
    let (h, alpha) = (p.h(), p.alpha);
    let mut m = Model::new();
    let fixed = |i: usize| i == 0 || i == n;
    let mut add = |lo: f64, hi: f64, i: usize| {
        let (lo, hi) = if fixed(i) { (0.0, 0.0) } else { (lo, hi) };
        m.add_variable(T::of(lo), T::of(hi), false)
    };
    let t: Vec<VarId> = (0..=n).map(|i| add(-1.0, 1.0, i)).collect::<Result<_, _>>()?;
    let x: Vec<VarId> = (0..=n).map(|i| add(-0.05, 0.05, i)).collect::<Result<_, _>>()?;
    let u: Vec<VarId> = (0..=n).map(|_| Ok(m.add_free_variable())).collect::<Result<_, BenchError>>()?;
    let v = |id: VarId| Expr::<T>::var(id);

    let obj = Expr::sum(
        (0..n)
            .flat_map(|i| {
                [
                    (0.5 * h) * (v(u[i + 1]).powi(2) + v(u[i]).powi(2)),
                    (0.5 * alpha * h) * (v(t[i + 1]).cos() + v(t[i]).cos()),
                ]
            })
            .collect(),
    );
    m.set_nl_objective(ObjectiveSense::Min, &obj)?;
    for i in 0..n {
        let row = v(x[i + 1]) - v(x[i]) - (0.5 * h) * (v(t[i + 1]).sin() + v(t[i]).sin());
        m.add_nl_constraint(&row, RowSense::Eq, T::zero())?;
    }
    for i in 0..n {
        let row = v(t[i + 1]) - v(t[i]) - (0.5 * h) * (v(u[i + 1]) + v(u[i]));
        m.add_nl_constraint(&row, RowSense::Eq, T::zero())?;
    }
    Ok(m)
}

/// Square root by Newton's method, iterating until `|z² − x|` drops below
/// `1e-13·max(1, |x|)`. Differentiated by running the loop on dual numbers.
#[derive(Clone, Copy, Debug)]
pub struct NewtonSqrt {
    pub max_iter: usize,
}

impl Default for NewtonSqrt {
    fn default() -> Self {
        NewtonSqrt { max_iter: 100 }
    }
}

impl GenericFunction for NewtonSqrt {
    fn call<S: Scalar>(&self, args: &[S]) -> Result<S, UserFnError> {
        let x = args[0];
        let xv = x.primal().as_f64();
        if xv < 0.0 || xv.is_nan() {
            return Err(UserFnError::Domain(format!("square root of {xv}")));
        }
        let tol = 1e-13 * xv.abs().max(1.0);
        let mut z = if xv < 1.0 { S::lit(1.0) } else { x };
        for _ in 0..self.max_iter {
            if (z * z - x).primal().as_f64().abs() <= tol {
                return Ok(z);
            }
            z = z - (z * z - x) / (S::lit(2.0) * z);
        }
        Err(UserFnError::IterationLimit(self.max_iter))
    }
}

/// `max x₁ + x₂` subject to `squareroot(x₁² + x₂²) ≤ 1`, with both variables
/// free and started at 0.5.
pub fn build_sqrt_model<T: Real>() -> Result<Model<T>, BenchError> {
    let mut m = Model::new();
    let x1 = m.add_free_variable();
    let x2 = m.add_free_variable();
    m.set_start(x1, T::of(0.5))?;
    m.set_start(x2, T::of(0.5))?;
    m.register_function("squareroot", 1, NewtonSqrt::default())?;
    m.set_objective(ObjectiveSense::Max, AffExpr::from_terms(vec![(T::one(), x1), (T::one(), x2)], T::zero()))?;
    let body = Expr::user("squareroot", vec![Expr::var(x1).powi(2) + Expr::var(x2).powi(2)]);
    m.add_nl_constraint(&body, RowSense::Le, T::one())?;
    Ok(m)
}

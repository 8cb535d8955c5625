use num_traits::{One, Zero};
use thiserror::Error;

use crate::nlexpr::{
    check_dimension, forward_sweep, integer_exponent, Builtin, EvalError, EvalErrorKind, ExprGraph, FunctionRegistry,
    NodeKind, Sweep,
};
use crate::scalar::{Dual, Plain, Real, Scalar};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AdError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("constraint {index}: {source}")]
    Constraint { index: usize, source: EvalError },
    #[error("second-order derivatives through user-defined functions are not supported")]
    UnsupportedSecondOrder,
    #[error("expected length {expected}, got {got}")]
    Length { expected: usize, got: usize },
}

pub(crate) struct Buffers<S> {
    vals: Vec<S>,
    adj: Vec<S>,
    args: Vec<S>,
    parts: Vec<S>,
}

impl<S: Scalar> Buffers<S> {
    fn new() -> Self {
        Buffers { vals: Vec::new(), adj: Vec::new(), args: Vec::new(), parts: Vec::new() }
    }

    fn fit(&mut self, len: usize) {
        let z = S::lit(0.0);
        self.vals.clear();
        self.vals.resize(len, z);
        self.adj.clear();
        self.adj.resize(len, z);
    }
}

/// Per-node scratch for the sweeps: values and adjoints on plain reals, and
/// their dual counterparts for Hessian-vector products. Reusable across calls
/// and graphs; one per concurrent caller.
pub struct ReverseWorkspace<T: Real> {
    pub(crate) plain: Buffers<Plain<T>>,
    pub(crate) dual: Buffers<Dual<T>>,
}

impl<T: Real> Default for ReverseWorkspace<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ReverseWorkspace<T> {
    pub fn new() -> Self {
        ReverseWorkspace { plain: Buffers::new(), dual: Buffers::new() }
    }

    pub fn for_graph(g: &ExprGraph<T>) -> Self {
        let mut ws = Self::new();
        ws.plain.fit(g.len());
        ws.dual.fit(g.len());
        ws
    }
}

/// Reverse sweep after a forward sweep has filled `b.vals`. Adjoint of the
/// root is `seed`; each variable leaf's adjoint goes to `sink(index, adjoint)`.
fn reverse_sweep<S: Sweep>(
    g: &ExprGraph<S::Real>,
    reg: &FunctionRegistry<S::Real>,
    b: &mut Buffers<S>,
    seed: S,
    mut sink: impl FnMut(usize, S),
) -> Result<(), EvalError> {
    let zero = S::lit(0.0);
    let one = S::lit(1.0);
    for a in b.adj.iter_mut() {
        *a = zero;
    }
    b.adj[g.root()] = seed;
    let vals = &b.vals;
    for i in (0..g.len()).rev() {
        let kids = g.children(i);
        let a = b.adj[i];
        let err = |kind| EvalError { node: i, kind };
        match g.node(i).kind {
            NodeKind::Constant(_) | NodeKind::Parameter(_) => {}
            NodeKind::Variable(v) => sink(v.index(), a),
            NodeKind::Sum => {
                for &c in kids {
                    b.adj[c as usize] += a;
                }
            }
            NodeKind::Neg => b.adj[kids[0] as usize] -= a,
            NodeKind::Prod => {
                // Partial w.r.t. child k is the product of the others
                // (prefix times suffix, valid with zero factors).
                let k = kids.len();
                b.parts.clear();
                b.parts.resize(k, one);
                let mut acc = one;
                for (j, &c) in kids.iter().enumerate() {
                    b.parts[j] = acc;
                    acc *= vals[c as usize];
                }
                acc = one;
                for j in (0..k).rev() {
                    b.parts[j] *= acc;
                    acc *= vals[kids[j] as usize];
                }
                for (&c, &p) in kids.iter().zip(&b.parts[..k]) {
                    b.adj[c as usize] += a * p;
                }
            }
            NodeKind::Pow(e) => {
                let x = vals[kids[0] as usize];
                let d = match integer_exponent(e) {
                    Some(0) => zero,
                    Some(1) => one,
                    Some(n) => S::constant(e) * x.powi(n - 1),
                    None => S::constant(e) * x.powf(e - S::Real::one()),
                };
                b.adj[kids[0] as usize] += a * d;
            }
            NodeKind::Div => {
                let (num, den) = (vals[kids[0] as usize], vals[kids[1] as usize]);
                let inv = one / den;
                b.adj[kids[0] as usize] += a * inv;
                b.adj[kids[1] as usize] -= a * num * inv * inv;
            }
            NodeKind::Call(f) => {
                let c0 = kids[0] as usize;
                let x = vals[c0];
                let d = match f {
                    Builtin::Abs => {
                        let p = x.primal();
                        if p > S::Real::zero() {
                            one
                        } else if p < S::Real::zero() {
                            -one
                        } else {
                            zero
                        }
                    }
                    Builtin::Exp => vals[i],
                    Builtin::Log => one / x,
                    Builtin::Sqrt => {
                        if vals[i].primal() == S::Real::zero() {
                            return Err(err(EvalErrorKind::DivisionByZero));
                        }
                        S::lit(0.5) / vals[i]
                    }
                    Builtin::Sin => x.cos(),
                    Builtin::Cos => -x.sin(),
                    Builtin::Tan => one + vals[i] * vals[i],
                    Builtin::Erf => S::lit(std::f64::consts::FRAC_2_SQRT_PI) * (-(x * x)).exp(),
                    Builtin::Min | Builtin::Max => {
                        // Forward picked the second child only when it was strictly better.
                        let second = vals[kids[1] as usize];
                        let pick_second = if f == Builtin::Min { second < x } else { second > x };
                        let target = if pick_second { kids[1] } else { kids[0] };
                        b.adj[target as usize] += a;
                        continue;
                    }
                };
                b.adj[c0] += a * d;
            }
            NodeKind::UserCall(f) => {
                b.args.clear();
                b.args.extend(kids.iter().map(|&c| vals[c as usize]));
                b.parts.clear();
                b.parts.resize(kids.len(), zero);
                S::user_partials(reg.get(f).body(), &b.args, &mut b.parts).map_err(|e| err(EvalErrorKind::User(e)))?;
                for (j, &c) in kids.iter().enumerate() {
                    let p = b.parts[j];
                    b.adj[c as usize] += a * p;
                }
            }
        }
    }
    Ok(())
}

fn forward_plain<T: Real>(
    g: &ExprGraph<T>,
    x: &[T],
    params: &[T],
    reg: &FunctionRegistry<T>,
    b: &mut Buffers<Plain<T>>,
) -> Result<T, EvalError> {
    check_dimension(g, x.len())?;
    b.fit(g.len());
    forward_sweep(g, |i| Plain(x[i]), params, reg, &mut b.vals, &mut b.args).map(|v| v.0)
}

/// Value of `g` at `x`, reusing the workspace.
pub fn eval_with<T: Real>(
    g: &ExprGraph<T>,
    x: &[T],
    params: &[T],
    reg: &FunctionRegistry<T>,
    ws: &mut ReverseWorkspace<T>,
) -> Result<T, AdError> {
    Ok(forward_plain(g, x, params, reg, &mut ws.plain)?)
}

/// Adds `weight · ∇g(x)` into `grad` (indexed by variable) and returns `g(x)`.
pub fn gradient_accumulate<T: Real>(
    g: &ExprGraph<T>,
    x: &[T],
    params: &[T],
    reg: &FunctionRegistry<T>,
    ws: &mut ReverseWorkspace<T>,
    weight: T,
    grad: &mut [T],
) -> Result<T, AdError> {
    let f = forward_plain(g, x, params, reg, &mut ws.plain)?;
    reverse_sweep(g, reg, &mut ws.plain, Plain(weight), |j, a| grad[j] += a.0)?;
    Ok(f)
}

/// Dense gradient over all `x.len()` variables; returns `g(x)`.
pub fn gradient<T: Real>(
    g: &ExprGraph<T>,
    x: &[T],
    params: &[T],
    reg: &FunctionRegistry<T>,
    ws: &mut ReverseWorkspace<T>,
    grad: &mut [T],
) -> Result<T, AdError> {
    if grad.len() != x.len() {
        return Err(AdError::Length { expected: x.len(), got: grad.len() });
    }
    grad.iter_mut().for_each(|v| *v = T::zero());
    gradient_accumulate(g, x, params, reg, ws, T::one(), grad)
}

/// Value and directional derivative `∇g(x)ᵀd` in one dual-number sweep.
pub fn forward_dual<T: Real>(
    g: &ExprGraph<T>,
    x: &[T],
    d: &[T],
    params: &[T],
    reg: &FunctionRegistry<T>,
    ws: &mut ReverseWorkspace<T>,
) -> Result<(T, T), AdError> {
    if d.len() != x.len() {
        return Err(AdError::Length { expected: x.len(), got: d.len() });
    }
    check_dimension(g, x.len())?;
    let b = &mut ws.dual;
    b.fit(g.len());
    let r = forward_sweep(g, |i| Dual::new(x[i], d[i]), params, reg, &mut b.vals, &mut b.args)?;
    Ok((r.value, r.deriv))
}

/// Adds `weight · ∇²g(x) d` into `out`, by forward-mode differentiation of
/// the reverse sweep.
#[allow(clippy::too_many_arguments)]
pub fn hessian_vector_accumulate<T: Real>(
    g: &ExprGraph<T>,
    x: &[T],
    d: &[T],
    params: &[T],
    reg: &FunctionRegistry<T>,
    ws: &mut ReverseWorkspace<T>,
    weight: T,
    out: &mut [T],
) -> Result<(), AdError> {
    if g.has_user_calls() {
        return Err(AdError::UnsupportedSecondOrder);
    }
    forward_dual(g, x, d, params, reg, ws)?;
    reverse_sweep(g, reg, &mut ws.dual, Dual::constant(weight), |j, a| out[j] += a.deriv)?;
    Ok(())
}

/// `∇²g(x) · d` as a dense vector.
pub fn hessian_vector_product<T: Real>(
    g: &ExprGraph<T>,
    x: &[T],
    d: &[T],
    params: &[T],
    reg: &FunctionRegistry<T>,
    ws: &mut ReverseWorkspace<T>,
    out: &mut [T],
) -> Result<(), AdError> {
    if out.len() != x.len() {
        return Err(AdError::Length { expected: x.len(), got: out.len() });
    }
    out.iter_mut().for_each(|v| *v = T::zero());
    hessian_vector_accumulate(g, x, d, params, reg, ws, T::one(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VarId;
    use crate::nlexpr::{Expr, GenericFunction, UserFnError};

    fn v(i: usize) -> Expr<f64> {
        Expr::var(VarId::new(i, 0))
    }

    fn graph(e: Expr<f64>, r: &FunctionRegistry<f64>) -> ExprGraph<f64> {
        ExprGraph::from_expr(&e, r).unwrap()
    }

    fn fig3() -> Expr<f64> {
        (v(0).powi(2) + v(1).powi(2)).exp()
    }

    #[test]
    fn fig3_gradient() {
        let r = FunctionRegistry::new();
        let g = graph(fig3(), &r);
        let mut ws = ReverseWorkspace::new();
        let mut grad = [0.0; 2];
        gradient(&g, &[1.0, 1.0], &[], &r, &mut ws, &mut grad).unwrap();
        let e2 = 2f64.exp();
        assert!((grad[0] - 2.0 * e2).abs() < 1e-12 && (grad[1] - 2.0 * e2).abs() < 1e-12);
        gradient(&g, &[0.0, 0.0], &[], &r, &mut ws, &mut grad).unwrap();
        assert_eq!(grad, [0.0, 0.0]);
    }

    #[test]
    fn constant_graph_zero_gradient() {
        let r = FunctionRegistry::new();
        let g = graph(Expr::lit(3.0), &r);
        let mut grad = [7.0; 3];
        let f = gradient(&g, &[1.0, 2.0, 3.0], &[], &r, &mut ReverseWorkspace::new(), &mut grad).unwrap();
        assert_eq!((f, grad), (3.0, [0.0; 3]));
    }

    #[test]
    fn directional_derivatives() {
        let r = FunctionRegistry::new();
        let g = graph(v(0).powi(2), &r);
        let mut ws = ReverseWorkspace::new();
        assert_eq!(forward_dual(&g, &[3.0], &[2.0], &[], &r, &mut ws).unwrap(), (9.0, 12.0));
        let g = graph(fig3(), &r);
        assert_eq!(forward_dual(&g, &[0.4, -1.2], &[0.0, 0.0], &[], &r, &mut ws).unwrap().1, 0.0);
    }

    #[test]
    fn fig3_hessian_column() {
        let r = FunctionRegistry::new();
        let g = graph(fig3(), &r);
        let mut out = [0.0; 2];
        hessian_vector_product(&g, &[1.0, 1.0], &[1.0, 0.0], &[], &r, &mut ReverseWorkspace::new(), &mut out).unwrap();
        let e2 = 2f64.exp();
        assert!((out[0] - 6.0 * e2).abs() < 1e-10 && (out[1] - 4.0 * e2).abs() < 1e-10);
        let g = graph(v(0).powi(2) + v(1).powi(2), &r);
        hessian_vector_product(&g, &[0.3, 0.9], &[1.0, 1.0], &[], &r, &mut ReverseWorkspace::new(), &mut out).unwrap();
        assert_eq!(out, [2.0, 2.0]);
        hessian_vector_product(&g, &[0.3, 0.9], &[0.0, 0.0], &[], &r, &mut ReverseWorkspace::new(), &mut out).unwrap();
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn products_with_zero_factor() {
        let r = FunctionRegistry::new();
        let g = graph(v(0) * v(1) * v(2), &r);
        let mut grad = [0.0; 3];
        gradient(&g, &[0.0, 2.0, 3.0], &[], &r, &mut ReverseWorkspace::new(), &mut grad).unwrap();
        assert_eq!(grad, [6.0, 0.0, 0.0]);
    }

    #[test]
    fn builtins_match_finite_differences() {
        let r = FunctionRegistry::new();
        let es = vec![
            v(0).abs() * v(1),
            v(0).ln() + v(1).sqrt(),
            v(0).sin() * v(1).cos(),
            v(0).tan() - v(1).erf(),
            v(0).min(v(1)) + v(0).max(v(1)).powi(3),
            v(0) / (v(1) + 2.0),
            v(0).pow(1.5) * v(1),
            -v(0) * v(1).exp(),
        ];
        let x = [0.7, 0.4];
        let mut ws = ReverseWorkspace::new();
        for e in es {
            let g = graph(e, &r);
            let mut grad = [0.0; 2];
            gradient(&g, &x, &[], &r, &mut ws, &mut grad).unwrap();
            for j in 0..2 {
                let h = 1e-6 * (1.0 + x[j].abs());
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let fd = (crate::nlexpr::eval_graph(&g, &xp, &[], &r).unwrap()
                    - crate::nlexpr::eval_graph(&g, &xm, &[], &r).unwrap())
                    / (2.0 * h);
                assert!((grad[j] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{}: {} vs {fd}", g.dump(), grad[j]);
            }
        }
    }

    struct Cube;
    impl GenericFunction for Cube {
        fn call<S: Scalar>(&self, a: &[S]) -> Result<S, UserFnError> {
            Ok(a[0] * a[0] * a[0])
        }
    }

    #[test]
    fn user_calls_first_order_only() {
        let mut r = FunctionRegistry::new();
        r.register_autodiff("cube", 1, Cube).unwrap();
        let g = graph(Expr::user("cube", vec![v(0) * 2.0]), &r);
        let mut ws = ReverseWorkspace::new();
        let mut grad = [0.0];
        gradient(&g, &[1.0], &[], &r, &mut ws, &mut grad).unwrap();
        assert_eq!(grad[0], 24.0);
        assert_eq!(forward_dual(&g, &[1.0], &[1.0], &[], &r, &mut ws).unwrap(), (8.0, 24.0));
        let mut out = [0.0];
        assert_eq!(
            hessian_vector_product(&g, &[1.0], &[1.0], &[], &r, &mut ws, &mut out),
            Err(AdError::UnsupportedSecondOrder)
        );
    }
}

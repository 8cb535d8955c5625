use thiserror::Error;

use super::functions::{FunctionRegistry, UserFnError, UserFunctionBody};
use super::graph::{Builtin, ExprGraph, NodeKind};
use crate::scalar::{Dual, Plain, Real, Scalar};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalErrorKind {
    #[error("log of non-positive value")]
    LogNonPositive,
    #[error("sqrt of negative value")]
    SqrtNegative,
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-integer power of negative base")]
    PowNegativeBase,
    #[error("point has {got} entries, graph references variable {needed}")]
    Dimension { needed: usize, got: usize },
    #[error("parameter {0} out of range")]
    Parameter(usize),
    #[error(transparent)]
    User(#[from] UserFnError),
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("evaluation failed at node {node}: {kind}")]
pub struct EvalError {
    pub node: usize,
    pub kind: EvalErrorKind,
}

/// Scalars the graph sweeps run on: plain reals and dual numbers.
pub(crate) trait Sweep: Scalar {
    fn user_eval(body: &dyn UserFunctionBody<Self::Real>, args: &[Self]) -> Result<Self, UserFnError>;
    fn user_partials(
        body: &dyn UserFunctionBody<Self::Real>,
        args: &[Self],
        out: &mut [Self],
    ) -> Result<(), UserFnError>;
}

impl<T: Real> Sweep for Plain<T> {
    fn user_eval(body: &dyn UserFunctionBody<T>, args: &[Plain<T>]) -> Result<Plain<T>, UserFnError> {
        let raw: Vec<T> = args.iter().map(|a| a.0).collect();
        body.eval(&raw).map(Plain)
    }

    fn user_partials(
        body: &dyn UserFunctionBody<T>,
        args: &[Plain<T>],
        out: &mut [Plain<T>],
    ) -> Result<(), UserFnError> {
        let raw: Vec<T> = args.iter().map(|a| a.0).collect();
        let mut g = vec![T::zero(); raw.len()];
        body.gradient(&raw, &mut g)?;
        for (o, gi) in out.iter_mut().zip(g) {
            *o = Plain(gi);
        }
        Ok(())
    }
}

impl<T: Real> Sweep for Dual<T> {
    fn user_eval(body: &dyn UserFunctionBody<T>, args: &[Dual<T>]) -> Result<Dual<T>, UserFnError> {
        body.eval_dual(args)
    }

    fn user_partials(
        _body: &dyn UserFunctionBody<T>,
        _args: &[Dual<T>],
        _out: &mut [Dual<T>],
    ) -> Result<(), UserFnError> {
        Err(UserFnError::SecondOrderUnsupported)
    }
}

#[inline]
pub(crate) fn integer_exponent<T: Real>(e: T) -> Option<i32> {
    if e.fract() == T::zero() && e.abs() < T::of(i32::MAX as f64) {
        e.to_i32()
    } else {
        None
    }
}

/// Forward sweep in topological order. `leaf(i)` supplies variable `i`.
/// Fills `vals` (one slot per node) and returns the root value.
pub(crate) fn forward_sweep<S: Sweep>(
    g: &ExprGraph<S::Real>,
    leaf: impl Fn(usize) -> S,
    params: &[S::Real],
    reg: &FunctionRegistry<S::Real>,
    vals: &mut [S],
    args: &mut Vec<S>,
) -> Result<S, EvalError> {
    let zero = <S::Real as num_traits::Zero>::zero();
    for i in 0..g.len() {
        let kids = g.children(i);
        let err = |kind| EvalError { node: i, kind };
        let v = match g.node(i).kind {
            NodeKind::Constant(c) => S::constant(c),
            NodeKind::Variable(var) => leaf(var.index()),
            NodeKind::Parameter(p) => {
                S::constant(*params.get(p.index()).ok_or_else(|| err(EvalErrorKind::Parameter(p.index())))?)
            }
            NodeKind::Sum => {
                let mut acc = vals[kids[0] as usize];
                for &c in &kids[1..] {
                    acc += vals[c as usize];
                }
                acc
            }
            NodeKind::Prod => {
                let mut acc = vals[kids[0] as usize];
                for &c in &kids[1..] {
                    acc *= vals[c as usize];
                }
                acc
            }
            NodeKind::Pow(e) => {
                let base = vals[kids[0] as usize];
                match integer_exponent(e) {
                    Some(k) => {
                        if k < 0 && base.primal() == zero {
                            return Err(err(EvalErrorKind::DivisionByZero));
                        }
                        base.powi(k)
                    }
                    None => {
                        if base.primal() < zero {
                            return Err(err(EvalErrorKind::PowNegativeBase));
                        }
                        base.powf(e)
                    }
                }
            }
            NodeKind::Neg => -vals[kids[0] as usize],
            NodeKind::Div => {
                let den = vals[kids[1] as usize];
                if den.primal() == zero {
                    return Err(err(EvalErrorKind::DivisionByZero));
                }
                vals[kids[0] as usize] / den
            }
            NodeKind::Call(b) => {
                let a = vals[kids[0] as usize];
                match b {
                    Builtin::Abs => a.abs(),
                    Builtin::Exp => a.exp(),
                    Builtin::Log => {
                        if a.primal() <= zero {
                            return Err(err(EvalErrorKind::LogNonPositive));
                        }
                        a.ln()
                    }
                    Builtin::Sqrt => {
                        if a.primal() < zero {
                            return Err(err(EvalErrorKind::SqrtNegative));
                        }
                        a.sqrt()
                    }
                    Builtin::Sin => a.sin(),
                    Builtin::Cos => a.cos(),
                    Builtin::Tan => a.tan(),
                    Builtin::Erf => a.erf(),
                    Builtin::Min => {
                        let b2 = vals[kids[1] as usize];
                        if b2 < a {
                            b2
                        } else {
                            a
                        }
                    }
                    Builtin::Max => {
                        let b2 = vals[kids[1] as usize];
                        if b2 > a {
                            b2
                        } else {
                            a
                        }
                    }
                }
            }
            NodeKind::UserCall(f) => {
                args.clear();
                args.extend(kids.iter().map(|&c| vals[c as usize]));
                S::user_eval(reg.get(f).body(), args).map_err(|e| err(EvalErrorKind::User(e)))?
            }
        };
        vals[i] = v;
    }
    Ok(vals[g.root()])
}

pub(crate) fn check_dimension<T: Real>(g: &ExprGraph<T>, n: usize) -> Result<(), EvalError> {
    match g.variables().last() {
        Some(&needed) if needed >= n => Err(EvalError {
            node: g.nodes().iter().position(|nd| matches!(nd.kind, NodeKind::Variable(v) if v.index() == needed)).unwrap_or(0),
            kind: EvalErrorKind::Dimension { needed, got: n },
        }),
        _ => Ok(()),
    }
}

/// Evaluates the graph at `x`.
pub fn eval_graph<T: Real>(
    g: &ExprGraph<T>,
    x: &[T],
    params: &[T],
    reg: &FunctionRegistry<T>,
) -> Result<T, EvalError> {
    check_dimension(g, x.len())?;
    let mut vals = vec![Plain(T::zero()); g.len()];
    forward_sweep(g, |i| Plain(x[i]), params, reg, &mut vals, &mut Vec::new()).map(|v| v.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VarId;
    use crate::nlexpr::{Expr, GenericFunction};

    fn v(i: usize) -> VarId {
        VarId::new(i, 0)
    }

    fn fig3() -> ExprGraph<f64> {
        let e = (Expr::var(v(0)).powi(2) + Expr::var(v(1)).powi(2)).exp();
        ExprGraph::from_expr(&e, &FunctionRegistry::new()).unwrap()
    }

    #[test]
    fn fig3_values() {
        let r = FunctionRegistry::new();
        assert_eq!(eval_graph(&fig3(), &[0.0, 0.0], &[], &r).unwrap(), 1.0);
        let e2 = eval_graph(&fig3(), &[1.0, 1.0], &[], &r).unwrap();
        assert!((e2 - 2f64.exp()).abs() < 1e-12);
        assert!((e2 - 7.389056).abs() < 1e-6);
    }

    #[test]
    fn log_domain_error_names_node() {
        let r = FunctionRegistry::new();
        let g = ExprGraph::from_expr(&Expr::var(v(0)).ln(), &r).unwrap();
        let err = eval_graph(&g, &[-1.0], &[], &r).unwrap_err();
        assert_eq!(err.node, 1);
        assert_eq!(err.kind, EvalErrorKind::LogNonPositive);
    }

    #[test]
    fn division_and_pow_domain() {
        let r = FunctionRegistry::new();
        let g = ExprGraph::from_expr(&(Expr::lit(1.0) / Expr::var(v(0))), &r).unwrap();
        assert_eq!(eval_graph(&g, &[0.0], &[], &r).unwrap_err().kind, EvalErrorKind::DivisionByZero);
        let g = ExprGraph::from_expr(&Expr::var(v(0)).pow(0.5), &r).unwrap();
        assert_eq!(eval_graph(&g, &[-4.0], &[], &r).unwrap_err().kind, EvalErrorKind::PowNegativeBase);
        let g = ExprGraph::from_expr(&Expr::var(v(0)).powi(3), &r).unwrap();
        assert_eq!(eval_graph(&g, &[-2.0], &[], &r).unwrap(), -8.0);
    }

    #[test]
    fn short_point_rejected() {
        let r = FunctionRegistry::new();
        let err = eval_graph(&fig3(), &[1.0], &[], &r).unwrap_err();
        assert!(matches!(err.kind, EvalErrorKind::Dimension { needed: 1, got: 1 }));
    }

    #[test]
    fn parameters_read_at_eval_time() {
        let r = FunctionRegistry::new();
        let e = Expr::var(v(0)) * Expr::Param(crate::nlexpr::ParamId(0));
        let g = ExprGraph::from_expr(&e, &r).unwrap();
        assert_eq!(eval_graph(&g, &[3.0], &[2.0], &r).unwrap(), 6.0);
        assert_eq!(eval_graph(&g, &[3.0], &[5.0], &r).unwrap(), 15.0);
    }

    struct Looping;
    impl GenericFunction for Looping {
        fn call<S: Scalar>(&self, _a: &[S]) -> Result<S, UserFnError> {
            Err(UserFnError::IterationLimit(100))
        }
    }

    #[test]
    fn user_errors_carry_node() {
        let mut r = FunctionRegistry::new();
        r.register_autodiff("loop", 1, Looping).unwrap();
        let g = ExprGraph::from_expr(&Expr::user("loop", vec![Expr::var(v(0))]), &r).unwrap();
        let err = eval_graph(&g, &[1.0], &[], &r).unwrap_err();
        assert_eq!(err.node, 1);
        assert_eq!(err.kind, EvalErrorKind::User(UserFnError::IterationLimit(100)));
    }
}

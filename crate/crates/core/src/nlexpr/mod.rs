//! Nonlinear expressions as flat operation graphs, plus the user-defined
//! function registry.

mod eval;
mod functions;
mod graph;

pub use eval::{eval_graph, EvalError, EvalErrorKind};
pub(crate) use eval::{check_dimension, forward_sweep, integer_exponent, Sweep};
pub use functions::{
    Autodiff, FnId, FunctionError, FunctionRegistry, GenericFunction, HandCoded, UserFnError, UserFunction,
    UserFunctionBody,
};
pub use graph::{Builtin, Expr, ExprGraph, GraphBuilder, GraphError, Node, NodeKind, ParamId};

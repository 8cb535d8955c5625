//! Derivative oracles on expression graphs: reverse-mode gradients,
//! dual-number directional derivatives, forward-over-reverse Hessian-vector
//! products, and the solver-facing NLP evaluator.

mod evaluator;
mod reverse;

pub use evaluator::{quad_graph, EvaluatorError, NlpEvaluator, NlpWorkspace};
pub use reverse::{
    eval_with, forward_dual, gradient, gradient_accumulate, hessian_vector_accumulate, hessian_vector_product, AdError,
    ReverseWorkspace,
};

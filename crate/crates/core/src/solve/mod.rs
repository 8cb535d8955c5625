//! LP solving with warm-started re-solves, Kelley cutting planes for cones
//! and convex nonlinear constraints, and depth-first branch-and-bound.

mod bnb;
mod cuts;
mod session;
mod simplex;

pub use bnb::{branch_and_bound, BranchOptions};
pub use cuts::{
    cutting_plane_solve, generators_for, ConeCut, CutGenerator, CuttingPlaneOptions, NlCut, TraceEntry,
};
pub use session::{SessionCounters, SolverSession};

use crate::ad::AdError;
use crate::model::{Constraint, ConstraintId, Model, ModelError};
use crate::scalar::Real;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration_limit",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult<T> {
    pub status: SolveStatus,
    /// In the model's own sense. NaN when infeasible, ±inf when unbounded.
    pub objective: T,
    /// Empty unless a point is available.
    pub x: Vec<T>,
    pub pivots: usize,
    pub cuts: usize,
    /// Branch-and-bound nodes processed, excluding the root.
    pub nodes: usize,
}

fn json_number(v: f64) -> Value {
    if v.is_nan() {
        Value::Null
    } else if v == f64::INFINITY {
        json!("inf")
    } else if v == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!(v)
    }
}

impl<T: Real> SolveResult<T> {
    pub fn to_json_value(&self) -> Value {
        json!({
            "status": self.status.as_str(),
            "objective": json_number(self.objective.as_f64()),
            "x": self.x.iter().map(|v| json_number(v.as_f64())).collect::<Vec<_>>(),
            "pivots": self.pivots,
            "cuts": self.cuts,
            "nodes": self.nodes,
        })
    }

    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("quadratic objectives are not supported by the LP solver")]
    QuadraticObjective,
    #[error("nonlinear objectives are not supported; move them into a constraint with an epigraph variable")]
    NonlinearObjective,
    #[error("constraint {0} has quadratic terms")]
    QuadraticRow(usize),
    #[error("nonlinear constraint {0} is an equality and cannot be outer-approximated")]
    NonconvexEquality(usize),
    #[error(transparent)]
    Ad(#[from] AdError),
}

/// One-shot solve of a linear model.
pub fn lp_solve<T: Real>(model: &Model<T>) -> Result<SolveResult<T>, SolveError> {
    SolverSession::new(model)?.solve(model)
}

/// Appends `c` to `model` and re-solves from the session's last basis.
pub fn resolve_after_row_add<T: Real>(
    model: &mut Model<T>,
    session: &mut SolverSession<T>,
    c: Constraint<T>,
) -> Result<(ConstraintId, SolveResult<T>), SolveError> {
    let id = session.add_constraint(model, c)?;
    let r = session.solve(model)?;
    Ok((id, r))
}

/// Solves any supported model: LP, cutting planes when cones or nonlinear
/// constraints are present, branch-and-bound when variables are integer.
pub fn solve<T: Real>(model: &Model<T>, tol: T) -> Result<SolveResult<T>, SolveError> {
    let mut m = model.clone();
    if m.integer_flags().iter().any(|&b| b) {
        return branch_and_bound(&mut m, BranchOptions { tol, ..Default::default() });
    }
    let mut s = SolverSession::new(&m)?;
    let gens = generators_for(&m)?;
    if gens.is_empty() {
        return s.solve(&m);
    }
    cutting_plane_solve(&mut m, &mut s, &gens, CuttingPlaneOptions { tol, ..Default::default() }, None)
}

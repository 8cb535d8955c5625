use super::cuts::{cutting_plane_solve, generators_for, CutGenerator, CuttingPlaneOptions};
use super::session::SolverSession;
use super::{SolveError, SolveResult, SolveStatus};
use crate::model::{Constraint, Model};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchOptions<T> {
    /// Cutting-plane feasibility tolerance at every node.
    pub tol: T,
    /// Distance from an integer below which a value counts as integral.
    pub int_tol: T,
    pub max_nodes: usize,
}

impl<T: Real> Default for BranchOptions<T> {
    fn default() -> Self {
        BranchOptions { tol: T::of(1e-6), int_tol: T::of(1e-6), max_nodes: 100_000 }
    }
}

struct Node<T: Real> {
    model: Model<T>,
    session: SolverSession<T>,
    root: bool,
}

fn relax<T: Real>(
    node: &mut Node<T>,
    gens: &[Box<dyn CutGenerator<T>>],
    tol: T,
) -> Result<SolveResult<T>, SolveError> {
    if gens.is_empty() {
        return node.session.solve(&node.model);
    }
    let opts = CuttingPlaneOptions { tol, max_iterations: None, initial_cuts: node.root };
    cutting_plane_solve(&mut node.model, &mut node.session, gens, opts, None)
}

/// Depth-first branch-and-bound on the integer variables of `model`, using
/// the LP or cutting-plane relaxation at each node. Branches are appended as
/// rows to a copy of the parent's model and session, so children re-solve
/// from the parent's basis.
pub fn branch_and_bound<T: Real>(model: &mut Model<T>, opts: BranchOptions<T>) -> Result<SolveResult<T>, SolveError> {
    let gens = generators_for(model)?;
    let ints: Vec<usize> = (0..model.num_vars()).filter(|&j| model.integer_flags()[j]).collect();
    let session = SolverSession::new(model)?;
    let mut stack = vec![Node { model: model.clone(), session, root: true }];
    let maximize = model.sense() == crate::model::ObjectiveSense::Max;
    let to_min = |v: T| if maximize { -v } else { v };

    let mut best: Option<(T, Vec<T>)> = None;
    let (mut nodes, mut pivots, mut cuts) = (0usize, 0usize, 0usize);
    let mut truncated = false;

    while let Some(mut node) = stack.pop() {
        if !node.root {
            if nodes >= opts.max_nodes {
                truncated = true;
                break;
            }
            nodes += 1;
        }
        let r = relax(&mut node, &gens, opts.tol)?;
        pivots += r.pivots;
        cuts += r.cuts;
        match r.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded if node.root => {
                return Ok(SolveResult { nodes, pivots, cuts, ..r });
            }
            SolveStatus::Unbounded | SolveStatus::IterationLimit => {
                truncated = true;
                continue;
            }
        }
        let bound = to_min(r.objective);
        if let Some((inc, _)) = &best {
            if bound >= *inc - T::of(1e-9) {
                continue;
            }
        }
        let mut pick: Option<(usize, T)> = None;
        for &j in &ints {
            let v = r.x[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > opts.int_tol && pick.is_none_or(|(_, f)| frac > f) {
                pick = Some((j, frac));
            }
        }
        let Some((j, _)) = pick else {
            best = Some((bound, r.x));
            continue;
        };
        let v = r.x[j];
        let var = node.model.var(j);
        let mut down = Node { model: node.model.clone(), session: node.session.clone(), root: false };
        down.session.add_constraint(&mut down.model, Constraint::le(var, v.floor()))?;
        let mut up = node;
        up.root = false;
        up.session.add_constraint(&mut up.model, Constraint::ge(var, v.ceil()))?;
        // The side nearer to the relaxed value is explored first.
        if v - v.floor() < T::of(0.5) {
            stack.push(up);
            stack.push(down);
        } else {
            stack.push(down);
            stack.push(up);
        }
    }

    Ok(match best {
        Some((obj, x)) => SolveResult {
            status: if truncated { SolveStatus::IterationLimit } else { SolveStatus::Optimal },
            objective: to_min(obj),
            x,
            pivots,
            cuts,
            nodes,
        },
        None => SolveResult {
            status: if truncated { SolveStatus::IterationLimit } else { SolveStatus::Infeasible },
            objective: T::nan(),
            x: Vec::new(),
            pivots,
            cuts,
            nodes,
        },
    })
}

use super::session::SolverSession;
use super::{SolveError, SolveResult, SolveStatus};
use crate::ad::{gradient, ReverseWorkspace};
use crate::model::{AffExpr, Constraint, ConstraintId, Model, RowSense};
use crate::nlexpr::eval_graph;
use crate::scalar::Real;

/// A convex constraint `c(x) ≤ 0` that can produce tangent cuts
/// `c(v) + ∇c(v)ᵀ(x − v) ≤ 0`. Convexity is the caller's responsibility.
pub trait CutGenerator<T: Real> {
    fn name(&self) -> String;
    /// `c(x)`; positive values are violations.
    fn value(&self, model: &Model<T>, x: &[T]) -> Result<T, SolveError>;
    /// Linearization at `v`, as a model constraint.
    fn cut(&self, model: &Model<T>, v: &[T]) -> Result<Constraint<T>, SolveError>;
}

/// `‖X(x)‖₂ − t(x) ≤ 0` for a model cone constraint with affine `X`, `t`.
#[derive(Clone, Copy, Debug)]
pub struct ConeCut {
    pub constraint: ConstraintId,
}

impl ConeCut {
    fn parts<'m, T: Real>(&self, model: &'m Model<T>) -> (&'m AffExpr<T>, &'m [AffExpr<T>]) {
        match model.constraint(self.constraint) {
            Constraint::Cone { t, x } => (t, x),
            Constraint::Scalar { .. } => panic!("constraint {} is not a cone", self.constraint.0),
        }
    }
}

impl<T: Real> CutGenerator<T> for ConeCut {
    fn name(&self) -> String {
        format!("cone[{}]", self.constraint.0)
    }

    fn value(&self, model: &Model<T>, x: &[T]) -> Result<T, SolveError> {
        let (t, xs) = self.parts(model);
        let norm = xs.iter().map(|e| e.evaluate(x).powi(2)).sum::<T>().sqrt();
        Ok(norm - t.evaluate(x))
    }

    fn cut(&self, model: &Model<T>, v: &[T]) -> Result<Constraint<T>, SolveError> {
        // ‖X‖ is linearized at v by u·X with u = X(v)/‖X(v)‖ (0 at the apex).
        let (t, xs) = self.parts(model);
        let vals: Vec<T> = xs.iter().map(|e| e.evaluate(v)).collect();
        let norm = vals.iter().map(|&a| a * a).sum::<T>().sqrt();
        let mut e = -t.clone();
        if norm > T::zero() {
            for (xk, &a) in xs.iter().zip(&vals) {
                e = e + xk.clone() * (a / norm);
            }
        }
        Ok(Constraint::le(e, T::zero()))
    }
}

/// A nonlinear model constraint `s·(g(x) − rhs) ≤ 0`, differentiated with
/// reverse-mode AD.
#[derive(Clone, Copy, Debug)]
pub struct NlCut {
    pub index: usize,
}

impl NlCut {
    fn sign<T: Real>(&self, model: &Model<T>) -> T {
        if model.nl_constraints()[self.index].sense == RowSense::Ge {
            -T::one()
        } else {
            T::one()
        }
    }
}

impl<T: Real> CutGenerator<T> for NlCut {
    fn name(&self) -> String {
        format!("nl[{}]", self.index)
    }

    fn value(&self, model: &Model<T>, x: &[T]) -> Result<T, SolveError> {
        let c = &model.nl_constraints()[self.index];
        let g = eval_graph(&c.graph, x, model.params(), model.functions()).map_err(crate::ad::AdError::from)?;
        Ok(self.sign(model) * (g - c.rhs))
    }

    fn cut(&self, model: &Model<T>, v: &[T]) -> Result<Constraint<T>, SolveError> {
        let c = &model.nl_constraints()[self.index];
        let s = self.sign(model);
        let mut grad = vec![T::zero(); v.len()];
        let g = gradient(&c.graph, v, model.params(), model.functions(), &mut ReverseWorkspace::new(), &mut grad)?;
        let cv = s * (g - c.rhs);
        let mut e = AffExpr::with_capacity(c.graph.variables().len());
        let mut gv = T::zero();
        for &j in c.graph.variables() {
            let gj = s * grad[j];
            e.push(gj, model.var(j));
            gv += gj * v[j];
        }
        Ok(Constraint::le(e, gv - cv))
    }
}

/// Generators for every cone and nonlinear constraint of `model`.
pub fn generators_for<T: Real>(model: &Model<T>) -> Result<Vec<Box<dyn CutGenerator<T>>>, SolveError> {
    let mut out: Vec<Box<dyn CutGenerator<T>>> = Vec::new();
    for (i, c) in model.constraints().iter().enumerate() {
        if let Constraint::Cone { .. } = c {
            out.push(Box::new(ConeCut { constraint: ConstraintId(i) }));
        }
    }
    for (i, c) in model.nl_constraints().iter().enumerate() {
        if c.sense == RowSense::Eq {
            return Err(SolveError::NonconvexEquality(i));
        }
        out.push(Box::new(NlCut { index: i }));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry<T> {
    pub iteration: usize,
    pub objective: T,
    /// Cuts added so far in this call.
    pub cuts: usize,
    pub max_violation: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CuttingPlaneOptions<T> {
    pub tol: T,
    /// Defaults to `10·n + 100`.
    pub max_iterations: Option<usize>,
    /// Cut every generator at the model's start values before the first solve.
    pub initial_cuts: bool,
}

impl<T: Real> Default for CuttingPlaneOptions<T> {
    fn default() -> Self {
        CuttingPlaneOptions { tol: T::of(1e-6), max_iterations: None, initial_cuts: true }
    }
}

/// Point used for initial cuts: start values, 0 elsewhere, clamped to bounds.
fn start_point<T: Real>(model: &Model<T>) -> Option<Vec<T>> {
    if model.start().iter().all(Option::is_none) {
        return None;
    }
    Some(
        (0..model.num_vars())
            .map(|j| model.start()[j].unwrap_or(T::zero()).max(model.lower()[j]).min(model.upper()[j]))
            .collect(),
    )
}

/// Kelley's outer approximation: solve the LP relaxation, add a tangent cut
/// for every generator violated by more than `tol`, re-solve from the
/// previous basis, and stop once no generator is violated.
pub fn cutting_plane_solve<T: Real>(
    model: &mut Model<T>,
    session: &mut SolverSession<T>,
    generators: &[Box<dyn CutGenerator<T>>],
    opts: CuttingPlaneOptions<T>,
    mut trace: Option<&mut Vec<TraceEntry<T>>>,
) -> Result<SolveResult<T>, SolveError> {
    let cap = opts.max_iterations.unwrap_or(10 * model.num_vars() + 100);
    let mut cuts = 0;
    let mut pivots = 0;
    if let Some(v) = start_point(model).filter(|_| opts.initial_cuts) {
        for g in generators {
            let c = g.cut(model, &v)?;
            session.add_constraint(model, c)?;
            cuts += 1;
        }
    }
    let mut iteration = 0;
    loop {
        let mut res = session.solve(model)?;
        pivots += res.pivots;
        res.pivots = pivots;
        res.cuts = cuts;
        if res.status != SolveStatus::Optimal {
            return Ok(res);
        }
        let mut violated = Vec::new();
        let mut worst = T::zero();
        for g in generators {
            let c = g.value(model, &res.x)?;
            worst = worst.max(c);
            if c > opts.tol {
                violated.push(g);
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceEntry { iteration, objective: res.objective, cuts, max_violation: worst });
        }
        if violated.is_empty() {
            return Ok(res);
        }
        if iteration >= cap {
            res.status = SolveStatus::IterationLimit;
            return Ok(res);
        }
        for g in violated {
            let c = g.cut(model, &res.x)?;
            session.add_constraint(model, c)?;
            cuts += 1;
        }
        iteration += 1;
    }
}

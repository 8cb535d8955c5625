use super::simplex::{LpOutcome, LpRow, Tableau};
use super::{SolveError, SolveResult, SolveStatus};
use crate::model::{Constraint, ConstraintId, Model, ObjectiveSense};
use crate::scalar::Real;

/// Instrumentation counters of a [`SolverSession`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SessionCounters {
    /// Model constraints pushed into a loaded tableau.
    pub rows_added: usize,
    /// Full regenerations caused by variable, bound or objective changes.
    pub rebuilds: usize,
    /// Simplex pivots over the session's lifetime.
    pub pivots: usize,
    pub solves: usize,
}

/// LP state attached to a [`Model`]. Appended constraints are pushed as new
/// tableau rows and re-optimized with the dual simplex from the previous
/// basis; other model changes trigger a rebuild.
#[derive(Clone, Debug)]
pub struct SolverSession<T: Real> {
    lo: Vec<T>,
    hi: Vec<T>,
    cost: Vec<T>,
    cost_offset: T,
    maximize: bool,
    rows: Vec<LpRow<T>>,
    tableau: Option<Tableau<T>>,
    /// Whether `tableau` holds an optimal basis that new rows can extend.
    warm_ready: bool,
    last: Option<LpOutcome>,
    synced: usize,
    epoch: u64,
    warm_start: bool,
    counters: SessionCounters,
}

impl<T: Real> SolverSession<T> {
    pub fn new(model: &Model<T>) -> Result<Self, SolveError> {
        let mut s = SolverSession {
            lo: Vec::new(),
            hi: Vec::new(),
            cost: Vec::new(),
            cost_offset: T::zero(),
            maximize: false,
            rows: Vec::new(),
            tableau: None,
            warm_ready: false,
            last: None,
            synced: 0,
            epoch: model.layout_epoch(),
            warm_start: true,
            counters: SessionCounters::default(),
        };
        s.load(model)?;
        Ok(s)
    }

    /// With `false`, every solve starts from scratch on the loaded rows.
    pub fn set_warm_start(&mut self, on: bool) {
        self.warm_start = on;
    }

    pub fn counters(&self) -> SessionCounters {
        self.counters
    }

    /// Rows currently loaded.
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn load(&mut self, model: &Model<T>) -> Result<(), SolveError> {
        self.rows.clear();
        self.lo = model.lower().to_vec();
        self.hi = model.upper().to_vec();
        let n = model.num_vars();

        let obj = model.objective().canonicalize();
        if !obj.quad_terms().is_empty() {
            return Err(SolveError::QuadraticObjective);
        }
        if model.nl_objective().is_some() {
            return Err(SolveError::NonlinearObjective);
        }
        self.maximize = model.sense() == ObjectiveSense::Max;
        let sign = if self.maximize { -T::one() } else { T::one() };
        self.cost = vec![T::zero(); n];
        for &(a, v) in obj.affine().terms() {
            self.cost[v.index()] += sign * a;
        }
        self.cost_offset = sign * obj.constant();

        for (i, c) in model.constraints().iter().enumerate() {
            if let Some(r) = self.lp_row(i, c)? {
                self.rows.push(r);
            }
        }
        self.synced = model.constraints().len();
        self.epoch = model.layout_epoch();
        self.tableau = None;
        self.warm_ready = false;
        self.last = None;
        Ok(())
    }

    fn lp_row(&self, index: usize, c: &Constraint<T>) -> Result<Option<LpRow<T>>, SolveError> {
        match c {
            Constraint::Scalar { body, sense, rhs } => {
                let canon = body.canonicalize();
                if !canon.quad_terms().is_empty() {
                    return Err(SolveError::QuadraticRow(index));
                }
                let coefs = canon.affine().terms().iter().map(|&(a, v)| (v.index(), a)).collect();
                Ok(Some(LpRow { coefs, sense: *sense, rhs: *rhs - canon.constant() }))
            }
            Constraint::Cone { .. } => Ok(None),
        }
    }

    /// Brings the session up to date with `model`.
    pub fn sync(&mut self, model: &Model<T>) -> Result<(), SolveError> {
        if model.layout_epoch() != self.epoch || model.num_vars() != self.lo.len() {
            self.counters.rebuilds += 1;
            return self.load(model);
        }
        let pending = model.constraints().len().saturating_sub(self.synced);
        for i in self.synced..model.constraints().len() {
            if let Some(r) = self.lp_row(i, &model.constraints()[i])? {
                if let (Some(t), true) = (self.tableau.as_mut(), self.warm_ready && self.warm_start) {
                    t.add_row(&r.coefs, r.sense, r.rhs);
                }
                self.rows.push(r);
                self.counters.rows_added += 1;
            }
        }
        if pending > 0 && !(self.warm_ready && self.warm_start) {
            self.tableau = None;
        }
        self.synced = model.constraints().len();
        Ok(())
    }

    /// Adds `c` to the model and pushes it into the loaded problem.
    pub fn add_constraint(&mut self, model: &mut Model<T>, c: Constraint<T>) -> Result<ConstraintId, SolveError> {
        let id = model.add_constraint(c)?;
        self.sync(model)?;
        Ok(id)
    }

    /// Syncs with `model`, then solves.
    pub fn solve(&mut self, model: &Model<T>) -> Result<SolveResult<T>, SolveError> {
        self.sync(model)?;
        Ok(self.solve_loaded())
    }

    /// Solves the loaded rows: dual simplex from the previous optimal basis
    /// when rows were appended, otherwise two-phase primal from scratch.
    pub fn solve_loaded(&mut self) -> SolveResult<T> {
        let before = self.tableau.as_ref().map_or(0, |t| t.pivots);
        let (outcome, pivots) = match (self.tableau.as_mut(), self.warm_start && self.warm_ready) {
            (Some(t), true) => {
                let out = t.resolve_dual();
                (out, t.pivots - before)
            }
            _ => {
                let (t, out) = Tableau::solve_cold(&self.lo, &self.hi, &self.cost, &self.rows);
                let p = t.pivots;
                self.tableau = Some(t);
                (out, p)
            }
        };
        self.counters.pivots += pivots;
        self.counters.solves += 1;
        self.warm_ready = outcome == LpOutcome::Optimal;
        self.last = Some(outcome);
        let status = match outcome {
            LpOutcome::Optimal => SolveStatus::Optimal,
            LpOutcome::Infeasible => SolveStatus::Infeasible,
            LpOutcome::Unbounded => SolveStatus::Unbounded,
            LpOutcome::IterationLimit => SolveStatus::IterationLimit,
        };
        let t = self.tableau.as_ref().expect("tableau present after solve");
        let x = if matches!(outcome, LpOutcome::Optimal | LpOutcome::IterationLimit) {
            t.primal_solution()
        } else {
            Vec::new()
        };
        let objective = match status {
            SolveStatus::Optimal | SolveStatus::IterationLimit => {
                let z = t.objective() + self.cost_offset;
                if self.maximize {
                    -z
                } else {
                    z
                }
            }
            SolveStatus::Infeasible => T::nan(),
            SolveStatus::Unbounded => {
                if self.maximize {
                    T::infinity()
                } else {
                    T::neg_infinity()
                }
            }
        };
        SolveResult { status, objective, x, pivots, cuts: 0, nodes: 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AffExpr;
    use crate::model::Model;

    #[test]
    fn max_x_bounded() {
        let mut m = Model::<f64>::new();
        let x = m.add_variable(0.0, f64::INFINITY, false).unwrap();
        m.add_constraint(Constraint::le(x, 1.0)).unwrap();
        m.set_objective(ObjectiveSense::Max, x).unwrap();
        let r = SolverSession::new(&m).unwrap().solve(&m).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_below() {
        let mut m = Model::<f64>::new();
        let x = m.add_variable(0.0, f64::INFINITY, false).unwrap();
        m.set_objective(ObjectiveSense::Min, AffExpr::from(x) * -1.0).unwrap();
        let r = SolverSession::new(&m).unwrap().solve(&m).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
    }

    #[test]
    fn free_and_reflected_variables() {
        // max x + y s.t. x ≤ 2 (x free), y ≤ 3 (y ≤ 3 as bound, unbounded below)
        let mut m = Model::<f64>::new();
        let x = m.add_free_variable();
        let y = m.add_variable(f64::NEG_INFINITY, 3.0, false).unwrap();
        m.add_constraint(Constraint::le(x, 2.0)).unwrap();
        m.set_objective(ObjectiveSense::Max, AffExpr::from(x) + AffExpr::from(y)).unwrap();
        let r = SolverSession::new(&m).unwrap().solve(&m).unwrap();
        assert!((r.objective - 5.0).abs() < 1e-12);
        assert!((r.x[0] - 2.0).abs() < 1e-12 && (r.x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn incremental_rows_without_rebuild() {
        let mut m = Model::<f64>::new();
        let x = m.add_variable(-1.0, 1.0, false).unwrap();
        let y = m.add_variable(-1.0, 1.0, false).unwrap();
        m.set_objective(ObjectiveSense::Max, AffExpr::from(x) + AffExpr::from(y)).unwrap();
        let mut s = SolverSession::new(&m).unwrap();
        assert_eq!(s.solve(&m).unwrap().objective, 2.0);
        let rows = s.num_rows();
        // Redundant row: no pivots.
        s.add_constraint(&mut m, Constraint::le(AffExpr::from(x) + AffExpr::from(y), 3.0)).unwrap();
        assert_eq!(s.num_rows(), rows + 1);
        assert_eq!(s.solve(&m).unwrap().pivots, 0);
        // Violated cut: dual simplex from the previous basis.
        s.add_constraint(&mut m, Constraint::le(AffExpr::from(x) + AffExpr::from(y), 1.0)).unwrap();
        let r = s.solve(&m).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-12);
        let c = s.counters();
        assert_eq!((c.rows_added, c.rebuilds), (2, 0));
        // Equality added incrementally.
        s.add_constraint(&mut m, Constraint::eq(x, 0.25)).unwrap();
        let r = s.solve(&m).unwrap();
        assert!((r.x[0] - 0.25).abs() < 1e-12 && (r.objective - 1.0).abs() < 1e-12);
        // Bound change forces a rebuild.
        m.set_bounds(y, 0.0, 0.5).unwrap();
        let r = s.solve(&m).unwrap();
        assert!((r.objective - 0.75).abs() < 1e-12);
        assert_eq!(s.counters().rebuilds, 1);
    }

    #[test]
    fn quadratic_objective_rejected() {
        let mut m = Model::<f64>::new();
        let x = m.add_free_variable();
        let mut q = crate::model::QuadExpr::new();
        q.push_quad(1.0, x, x);
        m.set_objective(ObjectiveSense::Min, q).unwrap();
        assert!(matches!(SolverSession::new(&m), Err(SolveError::QuadraticObjective)));
    }
}

//! Incremental model building and standard-form extraction.

mod expr;
mod standard_form;

use std::sync::atomic::{AtomicU32, Ordering};

use thiserror::Error;

pub use expr::{AffExpr, QuadExpr, Term, VarId};
pub use standard_form::{ConeRef, QuadScaling, RowSense, StandardForm, StandardFormError, Triplets};

use crate::nlexpr::{
    Expr, ExprGraph, FnId, FunctionError, FunctionRegistry, GenericFunction, GraphError, NodeKind, ParamId,
};
use crate::scalar::Real;

static NEXT_MODEL_TAG: AtomicU32 = AtomicU32::new(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ObjectiveSense {
    #[default]
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub enum Constraint<T> {
    /// `body sense rhs`
    Scalar { body: QuadExpr<T>, sense: RowSense, rhs: T },
    /// `‖x‖₂ ≤ t`
    Cone { t: AffExpr<T>, x: Vec<AffExpr<T>> },
}

impl<T: Real> Constraint<T> {
    pub fn le(body: impl Into<QuadExpr<T>>, rhs: T) -> Self {
        Constraint::Scalar { body: body.into(), sense: RowSense::Le, rhs }
    }

    pub fn eq(body: impl Into<QuadExpr<T>>, rhs: T) -> Self {
        Constraint::Scalar { body: body.into(), sense: RowSense::Eq, rhs }
    }

    pub fn ge(body: impl Into<QuadExpr<T>>, rhs: T) -> Self {
        Constraint::Scalar { body: body.into(), sense: RowSense::Ge, rhs }
    }

    pub fn cone(t: AffExpr<T>, x: Vec<AffExpr<T>>) -> Self {
        Constraint::Cone { t, x }
    }

    fn vars(&self) -> Box<dyn Iterator<Item = VarId> + '_> {
        match self {
            Constraint::Scalar { body, .. } => Box::new(body.vars()),
            Constraint::Cone { t, x } => Box::new(t.vars().chain(x.iter().flat_map(|e| e.vars()))),
        }
    }

    /// Violation at `x`: positive amount by which the constraint fails.
    pub fn violation(&self, x: &[T]) -> T {
        match self {
            Constraint::Scalar { body, sense, rhs } => {
                let lhs = body.evaluate(x);
                match sense {
                    RowSense::Le => (lhs - *rhs).max(T::zero()),
                    RowSense::Ge => (*rhs - lhs).max(T::zero()),
                    RowSense::Eq => (lhs - *rhs).abs(),
                }
            }
            Constraint::Cone { t, x: xs } => {
                let norm = xs.iter().map(|e| e.evaluate(x).powi(2)).sum::<T>().sqrt();
                (norm - t.evaluate(x)).max(T::zero())
            }
        }
    }
}

/// A nonlinear constraint `graph sense rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct NlConstraint<T> {
    pub graph: ExprGraph<T>,
    pub sense: RowSense,
    pub rhs: T,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("lower bound {lb} exceeds upper bound {ub}")]
    BoundOrder { lb: f64, ub: f64 },
    #[error("variable {index} does not belong to this model")]
    ForeignVariable { index: usize },
    #[error("parameter {0} does not exist")]
    UnknownParameter(usize),
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Mutable registry of variables, bounds, constraints and objective.
#[derive(Clone, Debug)]
pub struct Model<T> {
    tag: u32,
    lower: Vec<T>,
    upper: Vec<T>,
    integer: Vec<bool>,
    start: Vec<Option<T>>,
    constraints: Vec<Constraint<T>>,
    objective: QuadExpr<T>,
    sense: ObjectiveSense,
    nl_objective: Option<ExprGraph<T>>,
    nl_constraints: Vec<NlConstraint<T>>,
    params: Vec<T>,
    functions: FunctionRegistry<T>,
    revision: u64,
    layout_epoch: u64,
}

impl<T: Real> Default for Model<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Model<T> {
    pub fn new() -> Self {
        Model {
            tag: NEXT_MODEL_TAG.fetch_add(1, Ordering::Relaxed),
            lower: Vec::new(),
            upper: Vec::new(),
            integer: Vec::new(),
            start: Vec::new(),
            constraints: Vec::new(),
            objective: QuadExpr::new(),
            sense: ObjectiveSense::Min,
            nl_objective: None,
            nl_constraints: Vec::new(),
            params: Vec::new(),
            functions: FunctionRegistry::new(),
            revision: 0,
            layout_epoch: 0,
        }
    }

    fn bump(&mut self) {
        self.revision += 1;
    }

    /// Marks a change that an attached solver session cannot apply row-wise.
    fn bump_layout(&mut self) {
        self.revision += 1;
        self.layout_epoch += 1;
    }

    pub fn add_variable(&mut self, lb: T, ub: T, integer: bool) -> Result<VarId, ModelError> {
        if lb > ub || lb.is_nan() || ub.is_nan() {
            return Err(ModelError::BoundOrder { lb: lb.as_f64(), ub: ub.as_f64() });
        }
        let id = VarId::new(self.lower.len(), self.tag);
        self.lower.push(lb);
        self.upper.push(ub);
        self.integer.push(integer);
        self.start.push(None);
        self.bump_layout();
        Ok(id)
    }

    /// Pre-sizes variable storage for `additional` more variables.
    pub fn reserve_variables(&mut self, additional: usize) {
        self.lower.reserve(additional);
        self.upper.reserve(additional);
        self.integer.reserve(additional);
        self.start.reserve(additional);
    }

    pub fn add_free_variable(&mut self) -> VarId {
        self.add_variable(T::neg_infinity(), T::infinity(), false).expect("free bounds are ordered")
    }

    pub fn add_binary(&mut self) -> VarId {
        self.add_variable(T::zero(), T::one(), true).expect("binary bounds are ordered")
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn var(&self, index: usize) -> VarId {
        assert!(index < self.num_vars(), "variable index {index} out of range");
        VarId::new(index, self.tag)
    }

    pub fn check_var(&self, v: VarId) -> Result<(), ModelError> {
        if v.owner() != self.tag || v.index() >= self.num_vars() {
            Err(ModelError::ForeignVariable { index: v.index() })
        } else {
            Ok(())
        }
    }

    pub fn set_bounds(&mut self, v: VarId, lb: T, ub: T) -> Result<(), ModelError> {
        self.check_var(v)?;
        if lb > ub || lb.is_nan() || ub.is_nan() {
            return Err(ModelError::BoundOrder { lb: lb.as_f64(), ub: ub.as_f64() });
        }
        self.lower[v.index()] = lb;
        self.upper[v.index()] = ub;
        self.bump_layout();
        Ok(())
    }

    pub fn set_start(&mut self, v: VarId, value: T) -> Result<(), ModelError> {
        self.check_var(v)?;
        self.start[v.index()] = Some(value);
        self.bump();
        Ok(())
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn is_integer(&self, v: VarId) -> bool {
        self.integer[v.index()]
    }

    pub fn integer_flags(&self) -> &[bool] {
        &self.integer
    }

    pub fn start(&self) -> &[Option<T>] {
        &self.start
    }

    fn check_vars(&self, mut vars: impl Iterator<Item = VarId>) -> Result<(), ModelError> {
        vars.try_for_each(|v| self.check_var(v))
    }

    /// Appends a constraint; ids are insertion indices and never reused.
    pub fn add_constraint(&mut self, c: Constraint<T>) -> Result<ConstraintId, ModelError> {
        self.check_vars(c.vars())?;
        self.constraints.push(c);
        self.bump();
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn constraint(&self, id: ConstraintId) -> &Constraint<T> {
        &self.constraints[id.0]
    }

    /// Number of scalar (non-cone) rows.
    pub fn num_rows(&self) -> usize {
        self.constraints.iter().filter(|c| matches!(c, Constraint::Scalar { .. })).count()
    }

    pub fn set_objective(&mut self, sense: ObjectiveSense, expr: impl Into<QuadExpr<T>>) -> Result<(), ModelError> {
        let expr = expr.into();
        self.check_vars(expr.vars())?;
        self.objective = expr;
        self.sense = sense;
        self.nl_objective = None;
        self.bump_layout();
        Ok(())
    }

    pub fn objective(&self) -> &QuadExpr<T> {
        &self.objective
    }

    pub fn sense(&self) -> ObjectiveSense {
        self.sense
    }

    fn check_graph(&self, g: &ExprGraph<T>) -> Result<(), ModelError> {
        for n in g.nodes() {
            match n.kind {
                NodeKind::Variable(v) => self.check_var(v)?,
                NodeKind::Parameter(p) if p.index() >= self.params.len() => {
                    return Err(ModelError::UnknownParameter(p.index()))
                }
                NodeKind::UserCall(f) if f.index() >= self.functions.len() => {
                    return Err(FunctionError::Unknown(format!("#{}", f.index())).into())
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Flattens an algebraic expression against this model's function registry.
    pub fn graph(&self, e: &Expr<T>) -> Result<ExprGraph<T>, ModelError> {
        let g = ExprGraph::from_expr(e, &self.functions)?;
        self.check_graph(&g)?;
        Ok(g)
    }

    pub fn set_nl_objective(&mut self, sense: ObjectiveSense, e: &Expr<T>) -> Result<(), ModelError> {
        let g = self.graph(e)?;
        self.nl_objective = Some(g);
        self.objective = QuadExpr::new();
        self.sense = sense;
        self.bump_layout();
        Ok(())
    }

    pub fn add_nl_constraint(&mut self, e: &Expr<T>, sense: RowSense, rhs: T) -> Result<usize, ModelError> {
        let graph = self.graph(e)?;
        self.nl_constraints.push(NlConstraint { graph, sense, rhs });
        self.bump();
        Ok(self.nl_constraints.len() - 1)
    }

    pub fn nl_objective(&self) -> Option<&ExprGraph<T>> {
        self.nl_objective.as_ref()
    }

    pub fn nl_constraints(&self) -> &[NlConstraint<T>] {
        &self.nl_constraints
    }

    pub fn is_nonlinear(&self) -> bool {
        self.nl_objective.is_some() || !self.nl_constraints.is_empty()
    }

    pub fn add_parameter(&mut self, value: T) -> ParamId {
        self.params.push(value);
        self.bump();
        ParamId(self.params.len() - 1)
    }

    /// Changes a parameter value; graphs read it at the next evaluation.
    pub fn set_parameter(&mut self, p: ParamId, value: T) -> Result<(), ModelError> {
        *self.params.get_mut(p.index()).ok_or(ModelError::UnknownParameter(p.index()))? = value;
        self.bump();
        Ok(())
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn register_function<F: GenericFunction>(&mut self, name: &str, arity: usize, f: F) -> Result<FnId, ModelError> {
        let id = self.functions.register_autodiff(name, arity, f)?;
        self.bump();
        Ok(id)
    }

    pub fn register_function_with_gradient<F, G>(
        &mut self,
        name: &str,
        arity: usize,
        value: F,
        gradient: Option<G>,
    ) -> Result<FnId, ModelError>
    where
        F: Fn(&[T]) -> T + Send + Sync + 'static,
        G: Fn(&[T], &mut [T]) + Send + Sync + 'static,
    {
        let id = self.functions.register_with_gradient(name, arity, value, gradient)?;
        self.bump();
        Ok(id)
    }

    pub fn functions(&self) -> &FunctionRegistry<T> {
        &self.functions
    }

    /// Strictly increases on every mutation.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Changes only on mutations other than appending constraints or
    /// parameters (variables, bounds, objective).
    pub fn layout_epoch(&self) -> u64 {
        self.layout_epoch
    }

    /// Objective value in the user's sense (quadratic part only).
    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.evaluate(x)
    }

    /// Largest violation of bounds and scalar/cone constraints at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let bounds = (0..self.num_vars())
            .map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(T::zero()))
            .fold(T::zero(), T::max);
        self.constraints.iter().map(|c| c.violation(x)).fold(bounds, T::max)
    }

    pub fn to_standard_form(&self) -> Result<StandardForm<T>, StandardFormError> {
        StandardForm::from_model(self)
    }

    /// Rebuilds a model over the standard form's columns, lifted auxiliaries
    /// included: one constraint per row, one cone per cone reference.
    pub fn from_standard_form(sf: &StandardForm<T>) -> Result<Self, ModelError> {
        let mut m = Model::new();
        m.reserve_variables(sf.num_vars);
        let vars: Vec<VarId> = (0..sf.num_vars)
            .map(|j| m.add_variable(sf.lb[j], sf.ub[j], false))
            .collect::<Result<_, _>>()?;
        for &j in &sf.integers {
            m.integer[j] = true;
        }
        let mut rows: Vec<AffExpr<T>> = vec![AffExpr::new(); sf.num_rows()];
        for (i, j, a) in sf.a.iter() {
            rows[i].push(a, vars[j]);
        }
        for ((body, &sense), &rhs) in rows.into_iter().zip(&sf.senses).zip(&sf.b) {
            m.add_constraint(Constraint::Scalar { body: body.into(), sense, rhs })?;
        }
        for cone in &sf.cones {
            m.add_constraint(Constraint::cone(vars[cone.t].into(), cone.x.iter().map(|&j| vars[j].into()).collect()))?;
        }
        let mut obj = QuadExpr::with_capacity(sf.qobj.len(), sf.c.len());
        for (i, j, q) in sf.qobj.iter() {
            obj.push_quad(q, vars[i], vars[j]);
        }
        for (j, &c) in sf.c.iter().enumerate() {
            if c != T::zero() {
                obj.push_linear(c, vars[j]);
            }
        }
        obj.add_constant(sf.offset);
        if sf.maximize {
            m.set_objective(ObjectiveSense::Max, obj.scale(-T::one()))?;
        } else {
            m.set_objective(ObjectiveSense::Min, obj)?;
        }
        Ok(m)
    }
}

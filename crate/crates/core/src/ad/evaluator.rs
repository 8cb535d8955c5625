use std::collections::HashMap;

use thiserror::Error;

use super::reverse::{
    eval_with, gradient_accumulate, hessian_vector_accumulate, AdError, ReverseWorkspace,
};
use crate::hessian::{color, detect_sparsity, detect_sparsity_union, recover_into, Coloring, SparsityPattern};
use crate::model::{Constraint, Model, ObjectiveSense, QuadExpr, RowSense, VarId};
use crate::nlexpr::{ExprGraph, FunctionRegistry, GraphBuilder, GraphError, NodeKind, ParamId};
use crate::scalar::Real;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvaluatorError {
    #[error("constraint {0} is a cone; cones are handled by the cutting-plane solver")]
    Cone(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Flattens a quadratic expression into a graph with shared variable leaves.
pub fn quad_graph<T: Real>(q: &QuadExpr<T>) -> Result<ExprGraph<T>, GraphError> {
    let q = q.canonicalize();
    let mut b = GraphBuilder::with_capacity(3 * (q.quad_terms().len() + q.affine().len()) + 2, 0);
    let mut leaves: HashMap<VarId, usize> = HashMap::new();
    let mut leaf = |b: &mut GraphBuilder<T>, v: VarId| *leaves.entry(v).or_insert_with(|| b.variable(v));
    let mut terms = Vec::with_capacity(q.quad_terms().len() + q.affine().len() + 1);
    for &(c, v1, v2) in q.quad_terms() {
        let x1 = leaf(&mut b, v1);
        let t = if v1 == v2 {
            b.push(NodeKind::Pow(T::of(2.0)), &[x1])?
        } else {
            let x2 = leaf(&mut b, v2);
            b.push(NodeKind::Prod, &[x1, x2])?
        };
        terms.push(if c == T::one() {
            t
        } else {
            let k = b.constant(c);
            b.push(NodeKind::Prod, &[k, t])?
        });
    }
    for &(c, v) in q.affine().terms() {
        let x = leaf(&mut b, v);
        terms.push(if c == T::one() {
            x
        } else {
            let k = b.constant(c);
            b.push(NodeKind::Prod, &[k, x])?
        });
    }
    if q.constant() != T::zero() || terms.is_empty() {
        terms.push(b.constant(q.constant()));
    }
    let root = if terms.len() == 1 { terms[0] } else { b.push(NodeKind::Sum, &terms)? };
    b.finish(root)
}

#[derive(Clone, Debug)]
struct Row<T> {
    graph: ExprGraph<T>,
    sign: T,
    rhs: T,
    curved: bool,
    jac_start: usize,
}

/// Scratch space for one caller of an [`NlpEvaluator`].
pub struct NlpWorkspace<T: Real> {
    rev: ReverseWorkspace<T>,
    dense: Vec<T>,
    columns: Vec<Vec<T>>,
    recovered: Vec<T>,
}

/// Compiled derivative oracle for
/// `min f(x)  s.t.  g(x) ≤ 0, h(x) = 0`.
///
/// Rows come from the model's scalar constraints followed by its nonlinear
/// constraints; `≤`/`≥` rows form `g` (as `body − rhs` and `rhs − body`), `=`
/// rows form `h`. A maximization objective is negated.
#[derive(Clone, Debug)]
pub struct NlpEvaluator<T: Real> {
    n: usize,
    objective: ExprGraph<T>,
    objective_sign: T,
    objective_curved: bool,
    rows: Vec<Row<T>>,
    num_ineq: usize,
    jacobian: Vec<(usize, usize)>,
    coloring: Coloring,
    seeds: Vec<Vec<T>>,
    lower: Vec<(usize, usize)>,
    lower_perm: Vec<usize>,
    params: Vec<T>,
    functions: FunctionRegistry<T>,
}

impl<T: Real> NlpEvaluator<T> {
    pub fn new(model: &Model<T>) -> Result<Self, EvaluatorError> {
        let n = model.num_vars();
        let objective = match model.nl_objective() {
            Some(g) => g.clone(),
            None => quad_graph(model.objective())?,
        };
        let objective_sign = if model.sense() == ObjectiveSense::Max { -T::one() } else { T::one() };

        let mut ineq = Vec::new();
        let mut eq = Vec::new();
        let mut push = |graph: ExprGraph<T>, sense: RowSense, rhs: T| {
            let sign = if sense == RowSense::Ge { -T::one() } else { T::one() };
            let row = Row { graph, sign, rhs, curved: false, jac_start: 0 };
            if sense == RowSense::Eq {
                eq.push(row)
            } else {
                ineq.push(row)
            }
        };
        for (i, c) in model.constraints().iter().enumerate() {
            match c {
                Constraint::Scalar { body, sense, rhs } => push(quad_graph(body)?, *sense, *rhs),
                Constraint::Cone { .. } => return Err(EvaluatorError::Cone(i)),
            }
        }
        for c in model.nl_constraints() {
            push(c.graph.clone(), c.sense, c.rhs);
        }
        let num_ineq = ineq.len();
        let mut rows = ineq;
        rows.extend(eq);

        let mut jacobian = Vec::new();
        for (r, row) in rows.iter_mut().enumerate() {
            row.jac_start = jacobian.len();
            jacobian.extend(row.graph.variables().iter().map(|&j| (r, j)));
            row.curved = !detect_sparsity(&row.graph, n).is_empty();
        }
        let objective_curved = !detect_sparsity(&objective, n).is_empty();

        let pattern = detect_sparsity_union(std::iter::once(&objective).chain(rows.iter().map(|r| &r.graph)), n);
        let coloring = color(&pattern);
        let seeds = coloring.seeds();
        let mut lower_perm: Vec<usize> = (0..pattern.len()).collect();
        lower_perm.sort_by_key(|&k| {
            let (i, j) = pattern.entries()[k];
            (j, i)
        });
        let lower = lower_perm.iter().map(|&k| (pattern.entries()[k].1, pattern.entries()[k].0)).collect();

        if objective.has_user_calls() || rows.iter().any(|r| r.graph.has_user_calls()) {
            log::warn!(
                "model uses user-defined functions; first derivatives are available but the Hessian of the Lagrangian is not"
            );
        }

        Ok(NlpEvaluator {
            n,
            objective,
            objective_sign,
            objective_curved,
            rows,
            num_ineq,
            jacobian,
            coloring,
            seeds,
            lower,
            lower_perm,
            params: model.params().to_vec(),
            functions: model.functions().clone(),
        })
    }

    /// `(n, m_g, m_h)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.num_ineq, self.rows.len() - self.num_ineq)
    }

    pub fn workspace(&self) -> NlpWorkspace<T> {
        NlpWorkspace {
            rev: ReverseWorkspace::new(),
            dense: vec![T::zero(); self.n],
            columns: vec![vec![T::zero(); self.n]; self.coloring.num_colors()],
            recovered: vec![T::zero(); self.lower.len()],
        }
    }

    pub fn set_parameter(&mut self, p: ParamId, value: T) {
        self.params[p.index()] = value;
    }

    fn check_len(&self, x: &[T]) -> Result<(), AdError> {
        if x.len() != self.n {
            return Err(AdError::Length { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    pub fn eval_objective(&self, x: &[T], ws: &mut NlpWorkspace<T>) -> Result<T, AdError> {
        self.check_len(x)?;
        Ok(self.objective_sign * eval_with(&self.objective, x, &self.params, &self.functions, &mut ws.rev)?)
    }

    /// Dense gradient of the (minimization-form) objective; returns its value.
    pub fn eval_objective_gradient(&self, x: &[T], ws: &mut NlpWorkspace<T>, grad: &mut [T]) -> Result<T, AdError> {
        self.check_len(x)?;
        if grad.len() != self.n {
            return Err(AdError::Length { expected: self.n, got: grad.len() });
        }
        grad.iter_mut().for_each(|g| *g = T::zero());
        let f = gradient_accumulate(&self.objective, x, &self.params, &self.functions, &mut ws.rev, self.objective_sign, grad)?;
        Ok(self.objective_sign * f)
    }

    /// Fills `g` (length `m_g`) and `h` (length `m_h`).
    pub fn eval_constraints(&self, x: &[T], ws: &mut NlpWorkspace<T>, g: &mut [T], h: &mut [T]) -> Result<(), AdError> {
        self.check_len(x)?;
        let (_, mg, mh) = self.dims();
        if g.len() != mg || h.len() != mh {
            return Err(AdError::Length { expected: mg + mh, got: g.len() + h.len() });
        }
        for (r, row) in self.rows.iter().enumerate() {
            let v = eval_with(&row.graph, x, &self.params, &self.functions, &mut ws.rev)
                .map_err(|e| constraint_error(r, e))?;
            let val = row.sign * (v - row.rhs);
            if r < mg {
                g[r] = val;
            } else {
                h[r - mg] = val;
            }
        }
        Ok(())
    }

    /// `(row, col)` pairs, rows `0..m_g` for `g` then `m_g..` for `h`, sorted.
    pub fn jacobian_sparsity(&self) -> &[(usize, usize)] {
        &self.jacobian
    }

    /// Jacobian values aligned with [`jacobian_sparsity`](Self::jacobian_sparsity);
    /// one reverse sweep per row.
    pub fn eval_jacobian(&self, x: &[T], ws: &mut NlpWorkspace<T>, vals: &mut [T]) -> Result<(), AdError> {
        self.check_len(x)?;
        if vals.len() != self.jacobian.len() {
            return Err(AdError::Length { expected: self.jacobian.len(), got: vals.len() });
        }
        for (r, row) in self.rows.iter().enumerate() {
            gradient_accumulate(&row.graph, x, &self.params, &self.functions, &mut ws.rev, row.sign, &mut ws.dense)
                .map_err(|e| constraint_error(r, e))?;
            for (k, &j) in row.graph.variables().iter().enumerate() {
                vals[row.jac_start + k] = ws.dense[j];
                ws.dense[j] = T::zero();
            }
        }
        Ok(())
    }

    /// Lower triangle `(row, col)` with `row ≥ col`, sorted lexicographically.
    pub fn hessian_sparsity(&self) -> &[(usize, usize)] {
        &self.lower
    }

    pub fn coloring(&self) -> &Coloring {
        &self.coloring
    }

    pub fn hessian_pattern(&self) -> &SparsityPattern {
        self.coloring.pattern()
    }

    /// `σ∇²f(x) + Σ λᵢ∇²cᵢ(x)` on the lower-triangle sparsity, from one
    /// Hessian-vector product per color of the joint pattern.
    pub fn eval_hessian_lagrangian(
        &self,
        x: &[T],
        sigma: T,
        lambda: &[T],
        ws: &mut NlpWorkspace<T>,
        vals: &mut [T],
    ) -> Result<(), AdError> {
        self.check_len(x)?;
        if lambda.len() != self.rows.len() {
            return Err(AdError::Length { expected: self.rows.len(), got: lambda.len() });
        }
        if vals.len() != self.lower.len() {
            return Err(AdError::Length { expected: self.lower.len(), got: vals.len() });
        }
        for (c, seed) in self.seeds.iter().enumerate() {
            let col = &mut ws.columns[c];
            col.iter_mut().for_each(|v| *v = T::zero());
            if self.objective_curved && sigma != T::zero() {
                let w = sigma * self.objective_sign;
                hessian_vector_accumulate(&self.objective, x, seed, &self.params, &self.functions, &mut ws.rev, w, col)?;
            }
            for (r, row) in self.rows.iter().enumerate() {
                if row.curved && lambda[r] != T::zero() {
                    let w = lambda[r] * row.sign;
                    hessian_vector_accumulate(&row.graph, x, seed, &self.params, &self.functions, &mut ws.rev, w, col)
                        .map_err(|e| constraint_error(r, e))?;
                }
            }
        }
        recover_into(&self.coloring, &ws.columns, &mut ws.recovered).expect("columns sized to the coloring");
        for (v, &k) in vals.iter_mut().zip(&self.lower_perm) {
            *v = ws.recovered[k];
        }
        Ok(())
    }

    /// Hessian-vector product of the Lagrangian, for checking the colored path.
    pub fn hessian_lagrangian_product(
        &self,
        x: &[T],
        sigma: T,
        lambda: &[T],
        d: &[T],
        ws: &mut NlpWorkspace<T>,
        out: &mut [T],
    ) -> Result<(), AdError> {
        self.check_len(x)?;
        out.iter_mut().for_each(|v| *v = T::zero());
        if self.objective_curved && sigma != T::zero() {
            let w = sigma * self.objective_sign;
            hessian_vector_accumulate(&self.objective, x, d, &self.params, &self.functions, &mut ws.rev, w, out)?;
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.curved && lambda[r] != T::zero() {
                hessian_vector_accumulate(&row.graph, x, d, &self.params, &self.functions, &mut ws.rev, lambda[r] * row.sign, out)
                    .map_err(|e| constraint_error(r, e))?;
            }
        }
        Ok(())
    }

    pub fn objective_graph(&self) -> &ExprGraph<T> {
        &self.objective
    }

    /// Constraint graphs in row order (`g` rows then `h` rows), unsigned.
    pub fn constraint_graphs(&self) -> impl Iterator<Item = &ExprGraph<T>> {
        self.rows.iter().map(|r| &r.graph)
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn functions(&self) -> &FunctionRegistry<T> {
        &self.functions
    }
}

fn constraint_error(index: usize, e: AdError) -> AdError {
    match e {
        AdError::Eval(source) => AdError::Constraint { index, source },
        other => other,
    }
}

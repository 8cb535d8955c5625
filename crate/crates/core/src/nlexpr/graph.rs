use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::functions::{FnId, FunctionError, FunctionRegistry};
use crate::model::VarId;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Built-in nonlinear operations beyond the arithmetic node kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    Abs,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Erf,
    Min,
    Max,
}

impl Builtin {
    pub fn arity(self) -> usize {
        match self {
            Builtin::Min | Builtin::Max => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Abs => "abs",
            Builtin::Exp => "exp",
            Builtin::Log => "log",
            Builtin::Sqrt => "sqrt",
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Tan => "tan",
            Builtin::Erf => "erf",
            Builtin::Min => "min",
            Builtin::Max => "max",
        }
    }

    /// Piecewise-linear builtins contribute no second-order terms.
    pub fn is_piecewise_linear(self) -> bool {
        matches!(self, Builtin::Abs | Builtin::Min | Builtin::Max)
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Some(match name {
            "abs" => Builtin::Abs,
            "exp" => Builtin::Exp,
            "log" => Builtin::Log,
            "sqrt" => Builtin::Sqrt,
            "sin" => Builtin::Sin,
            "cos" => Builtin::Cos,
            "tan" => Builtin::Tan,
            "erf" => Builtin::Erf,
            "min" => Builtin::Min,
            "max" => Builtin::Max,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind<T> {
    Constant(T),
    Variable(VarId),
    Parameter(ParamId),
    Sum,
    Prod,
    Pow(T),
    Neg,
    Div,
    Call(Builtin),
    UserCall(FnId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node<T> {
    pub kind: NodeKind<T>,
    first_child: u32,
    num_children: u32,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GraphError {
    #[error(transparent)]
    Function(#[from] FunctionError),
    #[error("node {node}: child {child} is not an earlier node")]
    ForwardReference { node: usize, child: usize },
    #[error("node {node}: {kind} expects {expected} children, got {got}")]
    Arity { node: usize, kind: &'static str, expected: usize, got: usize },
    #[error("graph has no nodes")]
    Empty,
}

/// Expression DAG stored as a flat node array in topological order.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprGraph<T> {
    nodes: Vec<Node<T>>,
    children: Vec<u32>,
    root: usize,
    vars: Vec<usize>,
    has_user_calls: bool,
}

impl<T: Real> ExprGraph<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, i: usize) -> &Node<T> {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    #[inline]
    pub fn children(&self, i: usize) -> &[u32] {
        let n = &self.nodes[i];
        &self.children[n.first_child as usize..(n.first_child + n.num_children) as usize]
    }

    /// Sorted, deduplicated indices of referenced variables.
    pub fn variables(&self) -> &[usize] {
        &self.vars
    }

    pub fn has_user_calls(&self) -> bool {
        self.has_user_calls
    }

    /// True when every child index precedes its parent.
    pub fn is_topologically_valid(&self) -> bool {
        (0..self.nodes.len()).all(|i| self.children(i).iter().all(|&c| (c as usize) < i)) && self.root < self.nodes.len()
    }

    /// Flattens an algebraic [`Expr`] tree. Variable leaves are shared.
    pub fn from_expr(expr: &Expr<T>, registry: &FunctionRegistry<T>) -> Result<Self, GraphError> {
        let mut b = GraphBuilder::new();
        let mut leaves = HashMap::new();
        let root = flatten(expr, registry, &mut b, &mut leaves)?;
        b.finish(root)
    }

    /// One node per line, `index: kind(children...)`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for i in 0..self.nodes.len() {
            let kind = match self.nodes[i].kind {
                NodeKind::Constant(c) => format!("const[{c}]"),
                NodeKind::Variable(v) => format!("var[{}]", v.index()),
                NodeKind::Parameter(p) => format!("param[{}]", p.0),
                NodeKind::Sum => "sum".into(),
                NodeKind::Prod => "prod".into(),
                NodeKind::Pow(e) => format!("pow[{e}]"),
                NodeKind::Neg => "neg".into(),
                NodeKind::Div => "div".into(),
                NodeKind::Call(b) => b.name().into(),
                NodeKind::UserCall(f) => format!("user[{}]", f.0),
            };
            let kids: Vec<String> = self.children(i).iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{i}: {kind}({})", kids.join(","));
        }
        out
    }
}

/// Appends nodes in topological order.
#[derive(Debug)]
pub struct GraphBuilder<T> {
    nodes: Vec<Node<T>>,
    children: Vec<u32>,
}

impl<T: Real> Default for GraphBuilder<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> GraphBuilder<T> {
    pub fn new() -> Self {
        GraphBuilder { nodes: Vec::new(), children: Vec::new() }
    }

    pub fn with_capacity(nodes: usize, edges: usize) -> Self {
        GraphBuilder { nodes: Vec::with_capacity(nodes), children: Vec::with_capacity(edges) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn kind_name(kind: &NodeKind<T>) -> &'static str {
        match kind {
            NodeKind::Sum => "sum",
            NodeKind::Prod => "prod",
            NodeKind::Pow(_) => "pow",
            NodeKind::Neg => "neg",
            NodeKind::Div => "div",
            NodeKind::Call(b) => b.name(),
            NodeKind::UserCall(_) => "user call",
            _ => "leaf",
        }
    }

    /// Appends a node; `children` must all be earlier nodes.
    pub fn push(&mut self, kind: NodeKind<T>, children: &[usize]) -> Result<usize, GraphError> {
        let node = self.nodes.len();
        if let Some(&bad) = children.iter().find(|&&c| c >= node) {
            return Err(GraphError::ForwardReference { node, child: bad });
        }
        let expected = match kind {
            NodeKind::Constant(_) | NodeKind::Variable(_) | NodeKind::Parameter(_) => Some(0),
            NodeKind::Pow(_) | NodeKind::Neg => Some(1),
            NodeKind::Div => Some(2),
            NodeKind::Call(b) => Some(b.arity()),
            NodeKind::Sum | NodeKind::Prod | NodeKind::UserCall(_) => None,
        };
        let ok = match expected {
            Some(e) => children.len() == e,
            None => !children.is_empty(),
        };
        if !ok {
            return Err(GraphError::Arity {
                node,
                kind: Self::kind_name(&kind),
                expected: expected.unwrap_or(1),
                got: children.len(),
            });
        }
        let first_child = self.children.len() as u32;
        self.children.extend(children.iter().map(|&c| c as u32));
        self.nodes.push(Node { kind, first_child, num_children: children.len() as u32 });
        Ok(node)
    }

    pub fn constant(&mut self, c: T) -> usize {
        self.push(NodeKind::Constant(c), &[]).unwrap()
    }

    pub fn variable(&mut self, v: VarId) -> usize {
        self.push(NodeKind::Variable(v), &[]).unwrap()
    }

    pub fn finish(self, root: usize) -> Result<ExprGraph<T>, GraphError> {
        if self.nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        if root >= self.nodes.len() {
            return Err(GraphError::ForwardReference { node: self.nodes.len(), child: root });
        }
        let mut vars: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Variable(v) => Some(v.index()),
                _ => None,
            })
            .collect();
        vars.sort_unstable();
        vars.dedup();
        let has_user_calls = self.nodes.iter().any(|n| matches!(n.kind, NodeKind::UserCall(_)));
        Ok(ExprGraph { nodes: self.nodes, children: self.children, root, vars, has_user_calls })
    }
}

/// Algebraic description of a nonlinear expression, assembled with operators
/// and flattened into an [`ExprGraph`].
#[derive(Clone, Debug, PartialEq)]
pub enum Expr<T> {
    Const(T),
    Var(VarId),
    Param(ParamId),
    Sum(Vec<Expr<T>>),
    Prod(Vec<Expr<T>>),
    Pow(Box<Expr<T>>, T),
    Neg(Box<Expr<T>>),
    Div(Box<Expr<T>>, Box<Expr<T>>),
    Call(Builtin, Vec<Expr<T>>),
    User(String, Vec<Expr<T>>),
}

impl<T: Real> From<VarId> for Expr<T> {
    fn from(v: VarId) -> Self {
        Expr::Var(v)
    }
}

impl<T: Real> From<ParamId> for Expr<T> {
    fn from(p: ParamId) -> Self {
        Expr::Param(p)
    }
}

impl<T: Real> Expr<T> {
    pub fn var(v: VarId) -> Self {
        Expr::Var(v)
    }

    pub fn constant(c: T) -> Self {
        Expr::Const(c)
    }

    pub fn lit(c: f64) -> Self {
        Expr::Const(T::of(c))
    }

    pub fn sum(terms: Vec<Expr<T>>) -> Self {
        Expr::Sum(terms)
    }

    pub fn user(name: &str, args: Vec<Expr<T>>) -> Self {
        Expr::User(name.to_string(), args)
    }

    pub fn call(b: Builtin, args: Vec<Expr<T>>) -> Self {
        Expr::Call(b, args)
    }

    pub fn pow(self, e: T) -> Self {
        Expr::Pow(Box::new(self), e)
    }

    pub fn powi(self, e: i32) -> Self {
        Expr::Pow(Box::new(self), T::from_i32(e).unwrap())
    }

    pub fn abs(self) -> Self {
        Expr::Call(Builtin::Abs, vec![self])
    }

    pub fn exp(self) -> Self {
        Expr::Call(Builtin::Exp, vec![self])
    }

    pub fn ln(self) -> Self {
        Expr::Call(Builtin::Log, vec![self])
    }

    pub fn sqrt(self) -> Self {
        Expr::Call(Builtin::Sqrt, vec![self])
    }

    pub fn sin(self) -> Self {
        Expr::Call(Builtin::Sin, vec![self])
    }

    pub fn cos(self) -> Self {
        Expr::Call(Builtin::Cos, vec![self])
    }

    pub fn tan(self) -> Self {
        Expr::Call(Builtin::Tan, vec![self])
    }

    pub fn erf(self) -> Self {
        Expr::Call(Builtin::Erf, vec![self])
    }

    pub fn min(self, other: Expr<T>) -> Self {
        Expr::Call(Builtin::Min, vec![self, other])
    }

    pub fn max(self, other: Expr<T>) -> Self {
        Expr::Call(Builtin::Max, vec![self, other])
    }
}

impl<T: Real> std::ops::Add for Expr<T> {
    type Output = Expr<T>;
    fn add(self, rhs: Expr<T>) -> Expr<T> {
        match (self, rhs) {
            (Expr::Sum(mut a), Expr::Sum(b)) => {
                a.extend(b);
                Expr::Sum(a)
            }
            (Expr::Sum(mut a), b) => {
                a.push(b);
                Expr::Sum(a)
            }
            (a, b) => Expr::Sum(vec![a, b]),
        }
    }
}

impl<T: Real> std::ops::Sub for Expr<T> {
    type Output = Expr<T>;
    fn sub(self, rhs: Expr<T>) -> Expr<T> {
        self + (-rhs)
    }
}

impl<T: Real> std::ops::Neg for Expr<T> {
    type Output = Expr<T>;
    fn neg(self) -> Expr<T> {
        Expr::Neg(Box::new(self))
    }
}

impl<T: Real> std::ops::Mul for Expr<T> {
    type Output = Expr<T>;
    fn mul(self, rhs: Expr<T>) -> Expr<T> {
        match (self, rhs) {
            (Expr::Prod(mut a), b) => {
                a.push(b);
                Expr::Prod(a)
            }
            (a, b) => Expr::Prod(vec![a, b]),
        }
    }
}

impl<T: Real> std::ops::Div for Expr<T> {
    type Output = Expr<T>;
    fn div(self, rhs: Expr<T>) -> Expr<T> {
        Expr::Div(Box::new(self), Box::new(rhs))
    }
}

impl<T: Real> std::ops::Mul<Expr<T>> for f64 {
    type Output = Expr<T>;
    fn mul(self, rhs: Expr<T>) -> Expr<T> {
        Expr::Prod(vec![Expr::lit(self), rhs])
    }
}

impl<T: Real> std::ops::Mul<f64> for Expr<T> {
    type Output = Expr<T>;
    fn mul(self, rhs: f64) -> Expr<T> {
        rhs * self
    }
}

impl<T: Real> std::ops::Add<f64> for Expr<T> {
    type Output = Expr<T>;
    fn add(self, rhs: f64) -> Expr<T> {
        self + Expr::lit(rhs)
    }
}

impl<T: Real> std::ops::Sub<f64> for Expr<T> {
    type Output = Expr<T>;
    fn sub(self, rhs: f64) -> Expr<T> {
        self + Expr::lit(-rhs)
    }
}

fn flatten<T: Real>(
    e: &Expr<T>,
    reg: &FunctionRegistry<T>,
    b: &mut GraphBuilder<T>,
    leaves: &mut HashMap<VarId, usize>,
) -> Result<usize, GraphError> {
    let kids = |args: &[Expr<T>], b: &mut GraphBuilder<T>, leaves: &mut HashMap<VarId, usize>| {
        args.iter().map(|a| flatten(a, reg, b, leaves)).collect::<Result<Vec<_>, _>>()
    };
    match e {
        Expr::Const(c) => Ok(b.constant(*c)),
        Expr::Var(v) => Ok(*leaves.entry(*v).or_insert_with(|| b.variable(*v))),
        Expr::Param(p) => b.push(NodeKind::Parameter(*p), &[]),
        Expr::Sum(args) => {
            let c = kids(args, b, leaves)?;
            b.push(NodeKind::Sum, &c)
        }
        Expr::Prod(args) => {
            let c = kids(args, b, leaves)?;
            b.push(NodeKind::Prod, &c)
        }
        Expr::Pow(base, ex) => {
            let c = flatten(base, reg, b, leaves)?;
            b.push(NodeKind::Pow(*ex), &[c])
        }
        Expr::Neg(a) => {
            let c = flatten(a, reg, b, leaves)?;
            b.push(NodeKind::Neg, &[c])
        }
        Expr::Div(n, d) => {
            let n = flatten(n, reg, b, leaves)?;
            let d = flatten(d, reg, b, leaves)?;
            b.push(NodeKind::Div, &[n, d])
        }
        Expr::Call(f, args) => {
            let c = kids(args, b, leaves)?;
            b.push(NodeKind::Call(*f), &c)
        }
        Expr::User(name, args) => {
            let id = reg.resolve(name, args.len())?;
            let c = kids(args, b, leaves)?;
            b.push(NodeKind::UserCall(id), &c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: usize) -> VarId {
        VarId::new(i, 0)
    }

    #[test]
    fn fig3_graph_shape() {
        let x = Expr::<f64>::var(v(0));
        let y = Expr::var(v(1));
        let e = (x.powi(2) + y.powi(2)).exp();
        let g = ExprGraph::from_expr(&e, &FunctionRegistry::new()).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.node(g.root()).kind, NodeKind::Call(Builtin::Exp));
        assert!(g.is_topologically_valid());
        assert_eq!(g.variables(), &[0, 1]);
    }

    #[test]
    fn single_variable_graph() {
        let g = ExprGraph::from_expr(&Expr::<f64>::var(v(3)), &FunctionRegistry::new()).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.node(g.root()).kind, NodeKind::Variable(v(3)));
    }

    #[test]
    fn shared_leaves() {
        let x = Expr::<f64>::var(v(0));
        let g = ExprGraph::from_expr(&(x.clone() * x.clone() + x), &FunctionRegistry::new()).unwrap();
        let var_nodes = g.nodes().iter().filter(|n| matches!(n.kind, NodeKind::Variable(_))).count();
        assert_eq!(var_nodes, 1);
    }

    #[test]
    fn unknown_user_function() {
        let e = Expr::<f64>::user("squareroot", vec![Expr::var(v(0))]);
        assert!(matches!(
            ExprGraph::from_expr(&e, &FunctionRegistry::new()),
            Err(GraphError::Function(FunctionError::Unknown(_)))
        ));
    }

    #[test]
    fn builder_rejects_forward_reference_and_empty_sum() {
        let mut b = GraphBuilder::<f64>::new();
        let x = b.variable(v(0));
        assert!(matches!(b.push(NodeKind::Neg, &[x + 1]), Err(GraphError::ForwardReference { .. })));
        assert!(matches!(b.push(NodeKind::Sum, &[]), Err(GraphError::Arity { .. })));
    }

    #[test]
    fn dump_is_line_per_node() {
        let x = Expr::<f64>::var(v(0));
        let y = Expr::var(v(1));
        let g = ExprGraph::from_expr(&(x.powi(2) + y.powi(2)).exp(), &FunctionRegistry::new()).unwrap();
        assert_eq!(g.dump(), "0: var[0]()\n1: pow[2](0)\n2: var[1]()\n3: pow[2](2)\n4: sum(1,3)\n5: exp(4)\n");
    }
}

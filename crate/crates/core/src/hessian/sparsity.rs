use std::collections::HashSet;

use crate::nlexpr::{ExprGraph, NodeKind};
use crate::scalar::Real;

/// Upper-triangular Hessian structure: `(i, j)` with `i ≤ j`, sorted, unique.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    entries: Vec<(usize, usize)>,
}

impl SparsityPattern {
    /// Normalizes `(i, j)` to `i ≤ j`, sorts and removes duplicates.
    pub fn new(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut entries: Vec<_> = entries.into_iter().map(|(i, j)| if i <= j { (i, j) } else { (j, i) }).collect();
        assert!(entries.iter().all(|&(_, j)| j < n), "pattern index out of range for n={n}");
        entries.sort_unstable();
        entries.dedup();
        SparsityPattern { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries.iter().all(|&(i, j)| i == j)
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.entries.binary_search(&key).ok()
    }

    pub fn union(&self, other: &SparsityPattern) -> SparsityPattern {
        SparsityPattern::new(self.n.max(other.n), self.entries.iter().chain(&other.entries).copied())
    }

    /// Neighbor lists of the off-diagonal adjacency graph.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.entries {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        adj
    }

    /// Vertices that occur in at least one entry.
    pub fn active(&self) -> Vec<bool> {
        let mut a = vec![false; self.n];
        for &(i, j) in &self.entries {
            a[i] = true;
            a[j] = true;
        }
        a
    }
}

fn merge(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn cross(a: &[usize], b: &[usize], out: &mut HashSet<(usize, usize)>) {
    for &i in a {
        for &j in b {
            out.insert(if i <= j { (i, j) } else { (j, i) });
        }
    }
}

fn collect<T: Real>(g: &ExprGraph<T>, out: &mut HashSet<(usize, usize)>) {
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let kids = g.children(i);
        let set = |k: u32| -> &[usize] { &sets[k as usize] };
        match g.node(i).kind {
            NodeKind::Prod => {
                for (a, &ka) in kids.iter().enumerate() {
                    for &kb in &kids[a + 1..] {
                        cross(set(ka), set(kb), out);
                    }
                }
            }
            NodeKind::Pow(e) if e != T::zero() && e != T::one() => cross(set(kids[0]), set(kids[0]), out),
            NodeKind::Div => {
                cross(set(kids[0]), set(kids[1]), out);
                cross(set(kids[1]), set(kids[1]), out);
            }
            NodeKind::Call(b) if !b.is_piecewise_linear() => cross(set(kids[0]), set(kids[0]), out),
            NodeKind::UserCall(_) => {
                let mut all: Vec<usize> = kids.iter().flat_map(|&k| set(k).iter().copied()).collect();
                all.sort_unstable();
                all.dedup();
                cross(&all, &all, out);
            }
            _ => {}
        }
        let own = match g.node(i).kind {
            NodeKind::Variable(v) => vec![v.index()],
            NodeKind::Constant(_) | NodeKind::Parameter(_) => Vec::new(),
            _ if kids.len() == 1 => set(kids[0]).to_vec(),
            _ if kids.len() == 2 => merge(set(kids[0]), set(kids[1])),
            _ => {
                let mut all: Vec<usize> = kids.iter().flat_map(|&k| set(k).iter().copied()).collect();
                all.sort_unstable();
                all.dedup();
                all
            }
        };
        sets.push(own);
    }
}

/// Conservative Hessian pattern of one graph over `n` variables.
///
/// Products couple their operands' variable sets, nonlinear unaries couple
/// their argument's set with itself, and sums only union. `abs`, `min` and
/// `max` are treated as piecewise linear and contribute nothing.
pub fn detect_sparsity<T: Real>(g: &ExprGraph<T>, n: usize) -> SparsityPattern {
    let mut out = HashSet::new();
    collect(g, &mut out);
    SparsityPattern::new(n, out)
}

/// Pattern of a weighted sum of graphs, every weight taken as nonzero.
pub fn detect_sparsity_union<'a, T: Real + 'a>(
    graphs: impl IntoIterator<Item = &'a ExprGraph<T>>,
    n: usize,
) -> SparsityPattern {
    let mut out = HashSet::new();
    for g in graphs {
        collect(g, &mut out);
    }
    SparsityPattern::new(n, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VarId;
    use crate::nlexpr::{Expr, FunctionRegistry};

    fn v(i: usize) -> Expr<f64> {
        Expr::var(VarId::new(i, 0))
    }

    fn graph(e: Expr<f64>) -> ExprGraph<f64> {
        ExprGraph::from_expr(&e, &FunctionRegistry::new()).unwrap()
    }

    #[test]
    fn separable_squares_are_diagonal() {
        let g = graph(Expr::sum((0..4).map(|i| v(i).powi(2)).collect()));
        let p = detect_sparsity(&g, 4);
        assert_eq!(p.entries(), &[(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert!(p.is_diagonal());
    }

    #[test]
    fn exp_of_sum_is_dense() {
        let g = graph((v(0).powi(2) + v(1).powi(2)).exp());
        assert_eq!(detect_sparsity(&g, 2).entries(), &[(0, 0), (0, 1), (1, 1)]);
    }

    #[test]
    fn bilinear_and_linear() {
        assert_eq!(detect_sparsity(&graph(v(0) * v(1)), 2).entries(), &[(0, 1)]);
        assert!(detect_sparsity(&graph(2.0 * v(0) + v(1)), 2).is_empty());
        assert!(detect_sparsity(&graph(v(0).abs() + v(1).max(v(0))), 2).is_empty());
    }

    #[test]
    fn division_couples_denominator() {
        let p = detect_sparsity(&graph(v(0) / v(1)), 2);
        assert_eq!(p.entries(), &[(0, 1), (1, 1)]);
    }

    #[test]
    fn union_and_normalization() {
        let p = SparsityPattern::new(3, [(2, 0), (0, 2), (1, 1)]);
        assert_eq!(p.entries(), &[(0, 2), (1, 1)]);
        let q = SparsityPattern::new(3, [(0, 0)]);
        assert_eq!(p.union(&q).entries(), &[(0, 0), (0, 2), (1, 1)]);
        assert_eq!(p.position(2, 0), Some(0));
    }
}

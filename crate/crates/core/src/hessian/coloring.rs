use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

use super::sparsity::SparsityPattern;
use crate::scalar::Real;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RecoveryError {
    #[error("expected {expected} product columns, got {got}")]
    ColumnCount { expected: usize, got: usize },
    #[error("product column {column} has length {got}, expected {expected}")]
    ColumnLength { column: usize, expected: usize, got: usize },
}

/// One substitution step: `value[entry] = column[color][row] − Σ value[subtract]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecoveryStep {
    pub entry: usize,
    pub row: usize,
    pub color: usize,
    pub subtract: Vec<usize>,
}

/// Acyclic coloring of a Hessian pattern with its recovery plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coloring {
    pattern: SparsityPattern,
    colors: Vec<Option<usize>>,
    k: usize,
    plan: Vec<RecoveryStep>,
}

impl Coloring {
    /// Number of colors, equal to the number of Hessian-vector products needed.
    pub fn num_colors(&self) -> usize {
        self.k
    }

    /// Color of each variable; `None` for variables absent from the pattern.
    pub fn colors(&self) -> &[Option<usize>] {
        &self.colors
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    pub fn plan(&self) -> &[RecoveryStep] {
        &self.plan
    }

    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut classes = vec![Vec::new(); self.k];
        for (v, c) in self.colors.iter().enumerate() {
            if let Some(c) = c {
                classes[*c].push(v);
            }
        }
        classes
    }

    /// Seed direction for color `c`: 1 at variables of that color, else 0.
    pub fn seed<T: Real>(&self, c: usize) -> Vec<T> {
        self.colors.iter().map(|&col| if col == Some(c) { T::one() } else { T::zero() }).collect()
    }

    pub fn seeds<T: Real>(&self) -> Vec<Vec<T>> {
        (0..self.k).map(|c| self.seed(c)).collect()
    }

    /// Line-oriented summary: colors, classes, seeds, plan length.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "colors={}", self.k);
        for (c, class) in self.classes().iter().enumerate() {
            let vs: Vec<String> = class.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "class {c}: {}", vs.join(" "));
        }
        for c in 0..self.k {
            let seed: Vec<&str> = self.colors.iter().map(|&col| if col == Some(c) { "1" } else { "0" }).collect();
            let _ = writeln!(s, "seed {c}: {}", seed.join(""));
        }
        let _ = writeln!(s, "plan_steps={}", self.plan.len());
        s
    }
}

/// `true` when `adj` plus the colored vertex `v` would close a cycle using only
/// colors `c` and some other color.
fn closes_bicolored_cycle(adj: &[Vec<usize>], colors: &[Option<usize>], v: usize, c: usize) -> bool {
    let mut others: Vec<(usize, usize)> = adj[v].iter().filter_map(|&u| colors[u].map(|cu| (cu, u))).collect();
    others.sort_unstable();
    let mut start = 0;
    while start < others.len() {
        let other = others[start].0;
        let end = start + others[start..].iter().take_while(|p| p.0 == other).count();
        if end - start >= 2 {
            // Several neighbors share color `other`; reject if two of them are
            // already connected through vertices colored `c` or `other`.
            let targets: Vec<usize> = others[start..end].iter().map(|p| p.1).collect();
            let mut seen = vec![false; adj.len()];
            seen[v] = true;
            for (ti, &t) in targets.iter().enumerate() {
                if seen[t] {
                    return true;
                }
                // Explore the component of t; any later target found closes a cycle.
                let mut queue = VecDeque::from([t]);
                seen[t] = true;
                while let Some(x) = queue.pop_front() {
                    for &y in &adj[x] {
                        if !seen[y] && (colors[y] == Some(c) || colors[y] == Some(other)) {
                            if targets[ti + 1..].contains(&y) {
                                return true;
                            }
                            seen[y] = true;
                            queue.push_back(y);
                        }
                    }
                }
            }
        }
        start = end;
    }
    false
}

/// Greedy acyclic coloring of the pattern's adjacency graph.
///
/// Vertices are visited by descending degree, ties broken by descending
/// index. Each takes the smallest color that differs from its neighbors and
/// keeps every two-colored subgraph a forest. Colors are then renumbered by
/// first occurrence in index order.
pub fn color(pattern: &SparsityPattern) -> Coloring {
    let n = pattern.n();
    let adj = pattern.adjacency();
    let active = pattern.active();
    let mut order: Vec<usize> = (0..n).filter(|&v| active[v]).collect();
    order.sort_by(|&a, &b| adj[b].len().cmp(&adj[a].len()).then(b.cmp(&a)));

    let mut colors: Vec<Option<usize>> = vec![None; n];
    let mut forbidden: Vec<usize> = Vec::new();
    for &v in &order {
        forbidden.clear();
        forbidden.extend(adj[v].iter().filter_map(|&u| colors[u]));
        let mut c = 0;
        loop {
            if !forbidden.contains(&c) && !closes_bicolored_cycle(&adj, &colors, v, c) {
                break;
            }
            c += 1;
        }
        colors[v] = Some(c);
    }

    let mut relabel: Vec<Option<usize>> = Vec::new();
    let mut k = 0;
    for c in colors.iter_mut().flatten() {
        if *c >= relabel.len() {
            relabel.resize(*c + 1, None);
        }
        let new = *relabel[*c].get_or_insert_with(|| {
            k += 1;
            k - 1
        });
        *c = new;
    }

    let plan = build_plan(pattern, &adj, &colors, k);
    Coloring { pattern: pattern.clone(), colors, k, plan }
}

/// Diagonal entries are read directly. Off-diagonal entries come from each
/// two-colored tree rooted at its lowest-index vertex, in post-order: the
/// entry to a vertex's parent is its row in the parent's color column minus
/// the entries to its children.
fn build_plan(pattern: &SparsityPattern, adj: &[Vec<usize>], colors: &[Option<usize>], k: usize) -> Vec<RecoveryStep> {
    let mut plan = Vec::with_capacity(pattern.len());
    for (e, &(i, j)) in pattern.entries().iter().enumerate() {
        if i == j {
            plan.push(RecoveryStep { entry: e, row: i, color: colors[i].expect("active vertex"), subtract: Vec::new() });
        }
    }
    let n = pattern.n();
    let mut stamp = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut pair_id = 0;
    for c1 in 0..k {
        for c2 in c1 + 1..k {
            let in_pair = |v: usize| colors[v] == Some(c1) || colors[v] == Some(c2);
            for root in 0..n {
                if !in_pair(root) || stamp[root] == pair_id {
                    continue;
                }
                // Iterative DFS producing a post-order of this tree.
                let mut post = Vec::new();
                let mut stack = vec![(root, 0usize)];
                stamp[root] = pair_id;
                parent[root] = usize::MAX;
                while let Some(top) = stack.len().checked_sub(1) {
                    let (x, next) = stack[top];
                    if next < adj[x].len() {
                        stack[top].1 += 1;
                        let y = adj[x][next];
                        if in_pair(y) && stamp[y] != pair_id {
                            stamp[y] = pair_id;
                            parent[y] = x;
                            stack.push((y, 0));
                        }
                    } else {
                        post.push(x);
                        stack.pop();
                    }
                }
                for &u in &post {
                    let p = parent[u];
                    if p == usize::MAX {
                        continue;
                    }
                    let subtract = adj[u]
                        .iter()
                        .filter(|&&w| in_pair(w) && parent[w] == u)
                        .map(|&w| pattern.position(u, w).expect("edge in pattern"))
                        .collect();
                    plan.push(RecoveryStep {
                        entry: pattern.position(u, p).expect("edge in pattern"),
                        row: u,
                        color: colors[p].expect("colored"),
                        subtract,
                    });
                }
            }
            pair_id += 1;
        }
    }
    plan
}

/// Recovers pattern values from the `k` products `H · seed(c)`.
pub fn recover<T: Real>(coloring: &Coloring, columns: &[Vec<T>]) -> Result<Vec<T>, RecoveryError> {
    let mut out = vec![T::zero(); coloring.pattern.len()];
    recover_into(coloring, columns, &mut out)?;
    Ok(out)
}

pub fn recover_into<T: Real, C: AsRef<[T]>>(
    coloring: &Coloring,
    columns: &[C],
    out: &mut [T],
) -> Result<(), RecoveryError> {
    if columns.len() != coloring.k {
        return Err(RecoveryError::ColumnCount { expected: coloring.k, got: columns.len() });
    }
    let n = coloring.pattern.n();
    for (column, col) in columns.iter().enumerate() {
        if col.as_ref().len() != n {
            return Err(RecoveryError::ColumnLength { column, expected: n, got: col.as_ref().len() });
        }
    }
    for step in &coloring.plan {
        let mut v = columns[step.color].as_ref()[step.row];
        for &s in &step.subtract {
            v -= out[s];
        }
        out[step.entry] = v;
    }
    Ok(())
}

/// Checks that adjacent vertices differ and every two-colored subgraph is a forest.
pub fn is_valid_acyclic(pattern: &SparsityPattern, colors: &[Option<usize>]) -> bool {
    let active = pattern.active();
    if (0..pattern.n()).any(|v| active[v] && colors[v].is_none()) {
        return false;
    }
    let edges: Vec<(usize, usize)> = pattern.entries().iter().copied().filter(|&(i, j)| i != j).collect();
    if edges.iter().any(|&(i, j)| colors[i] == colors[j]) {
        return false;
    }
    let k = colors.iter().flatten().max().map_or(0, |&m| m + 1);
    for c1 in 0..k {
        for c2 in c1 + 1..k {
            let mut uf: Vec<usize> = (0..pattern.n()).collect();
            fn find(uf: &mut [usize], mut x: usize) -> usize {
                while uf[x] != x {
                    uf[x] = uf[uf[x]];
                    x = uf[x];
                }
                x
            }
            for &(i, j) in &edges {
                let pair = [colors[i], colors[j]];
                if pair.contains(&Some(c1)) && pair.contains(&Some(c2)) {
                    let (a, b) = (find(&mut uf, i), find(&mut uf, j));
                    if a == b {
                        return false;
                    }
                    uf[a] = b;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig4() -> SparsityPattern {
        // h11 h12 h14 h22 h23 h33 h44 h55, zero-based
        SparsityPattern::new(5, [(0, 0), (0, 1), (0, 3), (1, 1), (1, 2), (2, 2), (3, 3), (4, 4)])
    }

    fn dense_product(pattern: &SparsityPattern, vals: &[f64], d: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; pattern.n()];
        for (&(i, j), &h) in pattern.entries().iter().zip(vals) {
            y[i] += h * d[j];
            if i != j {
                y[j] += h * d[i];
            }
        }
        y
    }

    #[test]
    fn fig4_two_colors() {
        let c = color(&fig4());
        assert_eq!(c.num_colors(), 2);
        assert_eq!(c.classes(), vec![vec![0, 2], vec![1, 3, 4]]);
        assert!(is_valid_acyclic(&fig4(), c.colors()));
    }

    #[test]
    fn fig4_recovery_exact() {
        let p = fig4();
        let c = color(&p);
        let vals = [1.5, -2.0, 0.25, 3.0, 7.0, -1.0, 0.5, 9.0];
        let cols: Vec<Vec<f64>> = c.seeds::<f64>().iter().map(|s| dense_product(&p, &vals, s)).collect();
        let rec = recover(&c, &cols).unwrap();
        assert_eq!(rec, vals.to_vec());
    }

    #[test]
    fn diagonal_needs_one_color() {
        let p = SparsityPattern::new(6, (0..6).map(|i| (i, i)));
        let c = color(&p);
        assert_eq!(c.num_colors(), 1);
        assert_eq!(c.seed::<f64>(0), vec![1.0; 6]);
        let col = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(recover(&c, std::slice::from_ref(&col)).unwrap(), col);
    }

    #[test]
    fn empty_pattern_needs_no_products() {
        let c = color(&SparsityPattern::new(3, []));
        assert_eq!(c.num_colors(), 0);
        assert!(recover::<f64>(&c, &[]).unwrap().is_empty());
    }

    #[test]
    fn column_count_checked() {
        let c = color(&fig4());
        assert_eq!(
            recover(&c, &[vec![0.0; 5]]),
            Err(RecoveryError::ColumnCount { expected: 2, got: 1 })
        );
    }

    #[test]
    fn cycle_needs_three_colors() {
        // A 4-cycle cannot be acyclically 2-colored.
        let p = SparsityPattern::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]);
        let c = color(&p);
        assert!(c.num_colors() >= 3);
        assert!(is_valid_acyclic(&p, c.colors()));
        assert!(!is_valid_acyclic(&p, &[Some(0), Some(1), Some(0), Some(1)]));
    }

    #[test]
    fn dump_is_line_oriented() {
        let d = color(&fig4()).dump();
        assert_eq!(d, "colors=2\nclass 0: 0 2\nclass 1: 1 3 4\nseed 0: 10100\nseed 1: 01011\nplan_steps=8\n");
    }
}

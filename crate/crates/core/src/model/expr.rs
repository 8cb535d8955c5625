//! Affine and quadratic expressions stored as flat term lists.
//!
//! Appends never merge: duplicates accumulate until [`QuadExpr::canonicalize`]
//! sorts and merges them. This keeps every append O(1) amortized.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A scalar decision variable of one [`Model`](super::Model).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId {
    index: u32,
    owner: u32,
}

impl VarId {
    pub(crate) fn new(index: usize, owner: u32) -> Self {
        VarId { index: index as u32, owner }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.index as usize
    }

    pub(crate) fn owner(self) -> u32 {
        self.owner
    }
}

/// One generated summand for [`QuadExpr::sum`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Term<T> {
    Constant(T),
    Linear(T, VarId),
    Quad(T, VarId, VarId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffExpr<T> {
    pub(crate) terms: Vec<(T, VarId)>,
    pub(crate) constant: T,
}

impl<T: Real> Default for AffExpr<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> AffExpr<T> {
    pub fn new() -> Self {
        AffExpr { terms: Vec::new(), constant: T::zero() }
    }

    pub fn with_capacity(n: usize) -> Self {
        AffExpr { terms: Vec::with_capacity(n), constant: T::zero() }
    }

    pub fn constant_expr(c: T) -> Self {
        AffExpr { terms: Vec::new(), constant: c }
    }

    pub fn from_terms(terms: Vec<(T, VarId)>, constant: T) -> Self {
        AffExpr { terms, constant }
    }

    #[inline]
    pub fn push(&mut self, coeff: T, v: VarId) {
        self.terms.push((coeff, v));
    }

    pub fn add_constant(&mut self, c: T) {
        self.constant += c;
    }

    pub fn terms(&self) -> &[(T, VarId)] {
        &self.terms
    }

    pub fn constant(&self) -> T {
        self.constant
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, x: &[T]) -> T {
        self.terms.iter().fold(self.constant, |acc, &(c, v)| acc + c * x[v.index()])
    }

    /// The single variable this expression is, if it is exactly `1·v + 0`.
    pub fn as_single_var(&self) -> Option<VarId> {
        let canon = self.canonicalize();
        match canon.terms.as_slice() {
            [(c, v)] if *c == T::one() && canon.constant == T::zero() => Some(*v),
            _ => None,
        }
    }

    /// Sorted by variable, duplicates merged, zero coefficients dropped.
    pub fn canonicalize(&self) -> AffExpr<T> {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|&(_, v)| v.index);
        AffExpr { terms: merge_sorted(terms, |a, b| a.1 == b.1, |t| t.0, |t, c| t.0 = c), constant: self.constant }
    }

    pub fn is_canonical(&self) -> bool {
        self.terms.windows(2).all(|w| w[0].1.index < w[1].1.index)
            && self.terms.iter().all(|t| t.0 != T::zero())
    }

    pub(crate) fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().map(|t| t.1)
    }
}

fn merge_sorted<E: Copy, T: Real>(
    terms: Vec<E>,
    same: impl Fn(&E, &E) -> bool,
    coeff: impl Fn(&E) -> T,
    set: impl Fn(&mut E, T),
) -> Vec<E> {
    let mut out: Vec<E> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if same(last, &t) => {
                let c = coeff(last) + coeff(&t);
                set(last, c);
            }
            _ => {
                if let Some(last) = out.last() {
                    if coeff(last) == T::zero() {
                        out.pop();
                    }
                }
                out.push(t);
            }
        }
    }
    if matches!(out.last(), Some(last) if coeff(last) == T::zero()) {
        out.pop();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadExpr<T> {
    pub(crate) quad_terms: Vec<(T, VarId, VarId)>,
    pub(crate) affine: AffExpr<T>,
}

impl<T: Real> Default for QuadExpr<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> From<AffExpr<T>> for QuadExpr<T> {
    fn from(affine: AffExpr<T>) -> Self {
        QuadExpr { quad_terms: Vec::new(), affine }
    }
}

impl<T: Real> From<VarId> for QuadExpr<T> {
    fn from(v: VarId) -> Self {
        let mut e = QuadExpr::new();
        e.push_linear(T::one(), v);
        e
    }
}

impl<T: Real> From<VarId> for AffExpr<T> {
    fn from(v: VarId) -> Self {
        AffExpr { terms: vec![(T::one(), v)], constant: T::zero() }
    }
}

impl<T: Real> QuadExpr<T> {
    pub fn new() -> Self {
        QuadExpr { quad_terms: Vec::new(), affine: AffExpr::new() }
    }

    pub fn with_capacity(quad: usize, linear: usize) -> Self {
        QuadExpr { quad_terms: Vec::with_capacity(quad), affine: AffExpr::with_capacity(linear) }
    }

    pub fn constant_expr(c: T) -> Self {
        QuadExpr { quad_terms: Vec::new(), affine: AffExpr::constant_expr(c) }
    }

    /// Appends `coeff·v1·v2`, or `coeff·v1` when `v2` is `None`.
    #[inline]
    pub fn add_term(&mut self, coeff: T, v1: VarId, v2: Option<VarId>) {
        match v2 {
            Some(v2) => self.quad_terms.push((coeff, v1, v2)),
            None => self.affine.terms.push((coeff, v1)),
        }
    }

    #[inline]
    pub fn push_quad(&mut self, coeff: T, v1: VarId, v2: VarId) {
        self.quad_terms.push((coeff, v1, v2));
    }

    #[inline]
    pub fn push_linear(&mut self, coeff: T, v: VarId) {
        self.affine.terms.push((coeff, v));
    }

    pub fn add_constant(&mut self, c: T) {
        self.affine.constant += c;
    }

    #[inline]
    pub fn push(&mut self, term: Term<T>) {
        match term {
            Term::Constant(c) => self.affine.constant += c,
            Term::Linear(c, v) => self.affine.terms.push((c, v)),
            Term::Quad(c, a, b) => self.quad_terms.push((c, a, b)),
        }
    }

    /// Accumulates generated terms into a single expression. `size_hint`
    /// pre-sizes both the quadratic and the linear term storage, so an exact
    /// hint means one allocation per storage vector.
    pub fn sum<I: IntoIterator<Item = Term<T>>>(terms: I, size_hint: usize) -> Self {
        let mut e = QuadExpr::with_capacity(size_hint, size_hint);
        for t in terms {
            e.push(t);
        }
        e
    }

    pub fn quad_terms(&self) -> &[(T, VarId, VarId)] {
        &self.quad_terms
    }

    pub fn affine(&self) -> &AffExpr<T> {
        &self.affine
    }

    pub fn affine_mut(&mut self) -> &mut AffExpr<T> {
        &mut self.affine
    }

    pub fn constant(&self) -> T {
        self.affine.constant
    }

    pub fn is_affine(&self) -> bool {
        self.quad_terms.is_empty()
    }

    /// Storage capacities `(quadratic, linear)`; exposed for allocation checks.
    pub fn capacities(&self) -> (usize, usize) {
        (self.quad_terms.capacity(), self.affine.terms.capacity())
    }

    pub fn evaluate(&self, x: &[T]) -> T {
        self.quad_terms
            .iter()
            .fold(self.affine.evaluate(x), |acc, &(c, a, b)| acc + c * x[a.index()] * x[b.index()])
    }

    pub fn canonicalize(&self) -> QuadExpr<T> {
        let mut quad: Vec<(T, VarId, VarId)> = self
            .quad_terms
            .iter()
            .map(|&(c, a, b)| if a.index <= b.index { (c, a, b) } else { (c, b, a) })
            .collect();
        quad.sort_by_key(|&(_, a, b)| (a.index, b.index));
        let quad = merge_sorted(quad, |x, y| x.1 == y.1 && x.2 == y.2, |t| t.0, |t, c| t.0 = c);
        QuadExpr { quad_terms: quad, affine: self.affine.canonicalize() }
    }

    pub fn is_canonical(&self) -> bool {
        self.affine.is_canonical()
            && self.quad_terms.iter().all(|t| t.1.index <= t.2.index && t.0 != T::zero())
            && self
                .quad_terms
                .windows(2)
                .all(|w| (w[0].1.index, w[0].2.index) < (w[1].1.index, w[1].2.index))
    }

    pub(crate) fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.quad_terms.iter().flat_map(|t| [t.1, t.2]).chain(self.affine.vars())
    }

    pub fn scale(mut self, s: T) -> Self {
        for t in &mut self.quad_terms {
            t.0 *= s;
        }
        for t in &mut self.affine.terms {
            t.0 *= s;
        }
        self.affine.constant *= s;
        self
    }
}

impl<T: Real> Extend<Term<T>> for QuadExpr<T> {
    fn extend<I: IntoIterator<Item = Term<T>>>(&mut self, iter: I) {
        for t in iter {
            self.push(t);
        }
    }
}

impl<T: Real> AddAssign<Term<T>> for QuadExpr<T> {
    fn add_assign(&mut self, t: Term<T>) {
        self.push(t);
    }
}

impl<T: Real> Add for AffExpr<T> {
    type Output = AffExpr<T>;
    fn add(mut self, rhs: AffExpr<T>) -> AffExpr<T> {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl<T: Real> Sub for AffExpr<T> {
    type Output = AffExpr<T>;
    fn sub(self, rhs: AffExpr<T>) -> AffExpr<T> {
        self + (-rhs)
    }
}

impl<T: Real> Neg for AffExpr<T> {
    type Output = AffExpr<T>;
    fn neg(mut self) -> AffExpr<T> {
        for t in &mut self.terms {
            t.0 = -t.0;
        }
        self.constant = -self.constant;
        self
    }
}

impl<T: Real> Mul<T> for AffExpr<T> {
    type Output = AffExpr<T>;
    fn mul(mut self, s: T) -> AffExpr<T> {
        for t in &mut self.terms {
            t.0 *= s;
        }
        self.constant *= s;
        self
    }
}

impl<T: Real> Add for QuadExpr<T> {
    type Output = QuadExpr<T>;
    fn add(mut self, rhs: QuadExpr<T>) -> QuadExpr<T> {
        self.quad_terms.extend(rhs.quad_terms);
        self.affine = self.affine + rhs.affine;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: usize) -> VarId {
        VarId::new(i, 0)
    }

    #[test]
    fn add_term_routes_by_arity() {
        let mut e = QuadExpr::<f64>::new();
        e.add_term(-3.0, v(0), Some(v(1)));
        e.add_term(2.0, v(2), None);
        assert_eq!(e.quad_terms().len(), 1);
        assert_eq!(e.affine().len(), 1);
    }

    #[test]
    fn zero_coefficient_elided() {
        let mut e = QuadExpr::<f64>::new();
        e.add_term(0.0, v(0), None);
        let c = e.canonicalize();
        assert!(c.affine().is_empty());
    }

    #[test]
    fn duplicates_merge() {
        let e = AffExpr::from_terms(vec![(2.0, v(0)), (3.0, v(0))], 0.0);
        assert_eq!(e.canonicalize().terms(), &[(5.0, v(0))]);
    }

    #[test]
    fn quad_index_order_normalized() {
        let mut e = QuadExpr::<f64>::new();
        e.push_quad(1.0, v(1), v(0));
        assert_eq!(e.canonicalize().quad_terms(), &[(1.0, v(0), v(1))]);
    }

    #[test]
    fn cancellation_in_middle_removed() {
        let e = AffExpr::from_terms(vec![(1.0, v(2)), (2.0, v(0)), (-2.0, v(0)), (4.0, v(1))], 1.0);
        let c = e.canonicalize();
        assert_eq!(c.terms(), &[(4.0, v(1)), (1.0, v(2))]);
        assert!(c.is_canonical());
    }

    #[test]
    fn empty_sum_is_zero() {
        let e = QuadExpr::<f64>::sum(std::iter::empty(), 0);
        assert_eq!(e, QuadExpr::constant_expr(0.0));
    }

    #[test]
    fn sum_of_unit_terms() {
        let e = QuadExpr::<f64>::sum((0..10).map(|i| Term::Linear(1.0, v(i))), 10);
        assert_eq!(e.affine().len(), 10);
        assert_eq!(e.constant(), 0.0);
        assert!(e.is_affine());
    }

    #[test]
    fn exact_hint_allocates_once_per_vector() {
        let d = 50;
        let terms = (0..d * d).flat_map(|k| [Term::Quad(1.0, v(k), v(0)), Term::Linear(1.0, v(k))]);
        let e = QuadExpr::<f64>::sum(terms, d * d);
        assert_eq!(e.capacities(), (d * d, d * d));
    }
}

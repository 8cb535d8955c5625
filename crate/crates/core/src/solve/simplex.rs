//! Bounded-variable simplex on a condensed dense tableau.
//!
//! The problem is `min cᵀx` over rows `a·x + s = b` with `lo ≤ x ≤ hi`.
//! Every row owns a slack whose bounds encode the sense: `[0, ∞)` for ≤,
//! `(−∞, 0]` for ≥ and `[0, 0]` for =. Only nonbasic columns are stored:
//! row `i` reads `x_B(i) = β_i − Σ_p a_ip x_N(p)`, so appending a row never
//! widens the tableau.

use crate::model::RowSense;
use crate::scalar::Real;

const PIVOT_EPS: f64 = 1e-7;
const FEAS_EPS: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-9;
const COST_PERTURBATION: f64 = 1e-7;
/// Zero-step dual pivots tolerated before perturbing costs.
const STALL_STEPS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// A row over the structural columns.
#[derive(Clone, Debug)]
pub(crate) struct LpRow<T> {
    pub coefs: Vec<(usize, T)>,
    pub sense: RowSense,
    pub rhs: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    /// Basic in the given row.
    Basic(usize),
    /// Nonbasic in the given column, at its lower bound.
    Lower(usize),
    Upper(usize),
    /// Nonbasic at zero with no finite bound.
    Free(usize),
    /// Artificial removed from the tableau.
    Retired,
}

impl State {
    fn column(self) -> Option<usize> {
        match self {
            State::Lower(p) | State::Upper(p) | State::Free(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Tableau<T> {
    /// Structural variables come first; slacks and artificials follow.
    n: usize,
    lo: Vec<T>,
    hi: Vec<T>,
    x: Vec<T>,
    cost: Vec<T>,
    state: Vec<State>,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
    /// `B⁻¹N`, one entry per nonbasic column.
    rows: Vec<Vec<T>>,
    /// Reduced costs of the nonbasic columns.
    d: Vec<T>,
    perturbed: bool,
    /// Pivots since creation.
    pub pivots: usize,
}

fn slack_bounds<T: Real>(sense: RowSense) -> (T, T) {
    match sense {
        RowSense::Le => (T::zero(), T::infinity()),
        RowSense::Ge => (T::neg_infinity(), T::zero()),
        RowSense::Eq => (T::zero(), T::zero()),
    }
}

/// Nonbasic state and value for a column with the given bounds.
fn resting<T: Real>(lo: T, hi: T, p: usize) -> (State, T) {
    if lo.is_finite() {
        (State::Lower(p), lo)
    } else if hi.is_finite() {
        (State::Upper(p), hi)
    } else {
        (State::Free(p), T::zero())
    }
}

impl<T: Real> Tableau<T> {
    fn eps() -> T {
        T::of(PIVOT_EPS)
    }

    fn pivot_cap(&self) -> usize {
        50 * (self.nonbasic.len() + self.rows.len()) + 1000
    }

    fn bland_after(&self) -> usize {
        3 * (self.nonbasic.len() + self.rows.len())
    }

    fn movable(&self, v: usize) -> bool {
        self.hi[v] > self.lo[v]
    }

    /// Moves the nonbasic variable in column `p` by `delta`.
    fn shift(&mut self, p: usize, delta: T) {
        if delta == T::zero() {
            return;
        }
        self.x[self.nonbasic[p]] += delta;
        for (i, row) in self.rows.iter().enumerate() {
            let a = row[p];
            if a != T::zero() {
                self.x[self.basis[i]] -= a * delta;
            }
        }
    }

    /// Exchanges the basic variable of row `r` with the nonbasic variable of
    /// column `p`. The leaving variable rests at its upper bound if `to_upper`.
    fn pivot(&mut self, r: usize, p: usize, to_upper: bool) {
        let inv = T::one() / self.rows[r][p];
        let mut prow = std::mem::take(&mut self.rows[r]);
        for v in prow.iter_mut() {
            *v *= inv;
        }
        prow[p] = inv;
        let nz: Vec<usize> = (0..prow.len()).filter(|&k| prow[k] != T::zero()).collect();
        for row in self.rows.iter_mut() {
            if row.is_empty() {
                continue;
            }
            let f = row[p];
            if f == T::zero() {
                continue;
            }
            for &k in &nz {
                row[k] -= f * prow[k];
            }
            row[p] = -f * inv;
        }
        let f = self.d[p];
        if f != T::zero() {
            for &k in &nz {
                self.d[k] -= f * prow[k];
            }
            self.d[p] = -f * inv;
        }
        self.rows[r] = prow;

        let (enter, leave) = (self.nonbasic[p], self.basis[r]);
        self.basis[r] = enter;
        self.nonbasic[p] = leave;
        self.state[enter] = State::Basic(r);
        self.state[leave] = if !self.lo[leave].is_finite() && !self.hi[leave].is_finite() {
            State::Free(p)
        } else if to_upper && self.lo[leave] != self.hi[leave] {
            State::Upper(p)
        } else {
            State::Lower(p)
        };
        self.pivots += 1;
    }

    fn set_costs(&mut self, cost: Vec<T>) {
        self.d = self.nonbasic.iter().map(|&v| cost[v]).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != T::zero() {
                for (v, &a) in self.d.iter_mut().zip(&self.rows[i]) {
                    *v -= cb * a;
                }
            }
        }
        self.cost = cost;
    }

    pub fn objective(&self) -> T {
        self.cost.iter().zip(&self.x).filter(|(c, _)| **c != T::zero()).map(|(&c, &x)| c * x).sum()
    }

    /// Primal simplex from a primal-feasible basis.
    fn primal(&mut self) -> LpOutcome {
        let eps = Self::eps();
        let (cap, bland_after) = (self.pivot_cap(), self.bland_after());
        let (mut iters, mut degenerate) = (0, 0);
        loop {
            if iters > cap {
                return LpOutcome::IterationLimit;
            }
            iters += 1;
            let bland = degenerate > bland_after;
            let mut enter: Option<(usize, T)> = None;
            let mut best = T::of(FEAS_EPS);
            for (p, &v) in self.nonbasic.iter().enumerate() {
                let dp = self.d[p];
                let dir = match self.state[v] {
                    State::Lower(_) if dp < -best && self.movable(v) => T::one(),
                    State::Upper(_) if dp > best && self.movable(v) => -T::one(),
                    State::Free(_) if dp.abs() > best => -dp.signum(),
                    _ => continue,
                };
                enter = Some((p, dir));
                if bland {
                    break;
                }
                best = dp.abs();
            }
            let Some((s, dir)) = enter else { return LpOutcome::Optimal };

            let v = self.nonbasic[s];
            let range = self.hi[v] - self.lo[v];
            let mut leave: Option<(usize, T, bool)> = None;
            for i in 0..self.rows.len() {
                let alpha = self.rows[i][s] * dir;
                let b = self.basis[i];
                let (ratio, to_upper) = if alpha > eps && self.lo[b].is_finite() {
                    (((self.x[b] - self.lo[b]) / alpha).max(T::zero()), false)
                } else if alpha < -eps && self.hi[b].is_finite() {
                    (((self.hi[b] - self.x[b]) / -alpha).max(T::zero()), true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((l, lr, _)) if bland => ratio < lr || (ratio == lr && b < self.basis[l]),
                    // Near-ties go to the larger pivot magnitude.
                    Some((l, lr, _)) => {
                        ratio < lr - eps || (ratio <= lr + eps && alpha.abs() > self.rows[l][s].abs())
                    }
                };
                if better {
                    leave = Some((i, ratio, to_upper));
                }
            }
            let step = leave.map_or(range, |(_, r, _)| r.min(range));
            if !step.is_finite() {
                return LpOutcome::Unbounded;
            }
            if step <= eps {
                degenerate += 1;
            }
            match leave.filter(|&(_, r, _)| r < range) {
                None => {
                    // The entering variable reaches its opposite bound first.
                    self.shift(s, dir * step);
                    let up = dir > T::zero();
                    self.x[v] = if up { self.hi[v] } else { self.lo[v] };
                    self.state[v] = if up { State::Upper(s) } else { State::Lower(s) };
                }
                Some((r, ratio, to_upper)) => {
                    self.shift(s, dir * ratio);
                    let b = self.basis[r];
                    self.x[b] = if to_upper { self.hi[b] } else { self.lo[b] };
                    self.pivot(r, s, to_upper);
                }
            }
        }
    }

    /// Dual simplex with bound flipping from a dual-feasible basis.
    fn dual(&mut self) -> LpOutcome {
        let eps = Self::eps();
        let feas = T::of(FEAS_EPS);
        let (cap, bland_after) = (self.pivot_cap(), self.bland_after());
        let (mut iters, mut degenerate) = (0, 0);
        let mut cands: Vec<(usize, T, T)> = Vec::new();
        loop {
            if iters > cap {
                return LpOutcome::IterationLimit;
            }
            iters += 1;
            if degenerate > STALL_STEPS && !self.perturbed {
                self.perturb_costs();
                self.perturbed = true;
            }
            let bland = degenerate > bland_after;
            let slack_cols: Vec<usize> = (0..self.nonbasic.len()).filter(|&p| self.nonbasic[p] >= self.n).collect();
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.rows.len() {
                let b = self.basis[i];
                let infeas = (self.lo[b] - self.x[b]).max(self.x[b] - self.hi[b]);
                if infeas > feas {
                    // Dual steepest edge: scale by the squared norm of row i of B⁻¹.
                    let score = if bland {
                        infeas
                    } else {
                        let own = if b >= self.n { T::one() } else { T::zero() };
                        let w = slack_cols.iter().fold(own, |s, &p| s + self.rows[i][p] * self.rows[i][p]);
                        infeas * infeas / w
                    };
                    let better = match leave {
                        None => true,
                        Some((l, _)) if bland => b < self.basis[l],
                        Some((_, w)) => score > w,
                    };
                    if better {
                        leave = Some((i, score));
                    }
                }
            }
            let Some((r, _)) = leave else { return LpOutcome::Optimal };
            let delta = {
                let b = self.basis[r];
                (self.lo[b] - self.x[b]).max(self.x[b] - self.hi[b])
            };
            let b = self.basis[r];
            let up = self.x[b] < self.lo[b];
            let sgn = if up { T::one() } else { -T::one() };

            cands.clear();
            for (p, &v) in self.nonbasic.iter().enumerate() {
                let alpha = self.rows[r][p] * sgn;
                let ok = match self.state[v] {
                    State::Lower(_) => alpha < -eps && self.movable(v),
                    State::Upper(_) => alpha > eps && self.movable(v),
                    State::Free(_) => alpha.abs() > eps,
                    _ => false,
                };
                if ok {
                    cands.push((p, self.d[p].abs() / alpha.abs(), alpha.abs()));
                }
            }
            if cands.is_empty() {
                return LpOutcome::Infeasible;
            }
            let enter = if bland {
                cands.iter().fold(cands[0], |a, &c| if c.1 < a.1 { c } else { a }).0
            } else {
                cands.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.2.partial_cmp(&a.2).unwrap()));
                // Pass breakpoints whose columns can flip to their other bound
                // while the leaving row stays infeasible.
                let mut slope = delta;
                let mut k = 0;
                while k + 1 < cands.len() {
                    let (p, _, a) = cands[k];
                    let v = self.nonbasic[p];
                    let range = self.hi[v] - self.lo[v];
                    if !range.is_finite() || slope - a * range <= T::zero() {
                        break;
                    }
                    slope -= a * range;
                    k += 1;
                }
                for &(p, _, _) in &cands[..k] {
                    let v = self.nonbasic[p];
                    let to_upper = matches!(self.state[v], State::Lower(_));
                    let target = if to_upper { self.hi[v] } else { self.lo[v] };
                    self.shift(p, target - self.x[v]);
                    self.x[v] = target;
                    self.state[v] = if to_upper { State::Upper(p) } else { State::Lower(p) };
                }
                // Harris: among breakpoints within a small dual tolerance of
                // the first, take the largest pivot.
                let tol = T::of(HARRIS_TOL);
                let bound = cands[k..].iter().map(|&(_, r, a)| r + tol / a).fold(T::infinity(), T::min);
                cands[k..].iter().filter(|c| c.1 <= bound).fold(cands[k], |b, &c| if c.2 > b.2 { c } else { b }).0
            };
            if self.d[enter].abs() <= eps {
                degenerate += 1;
            }
            let target = if up { self.lo[b] } else { self.hi[b] };
            let theta = (self.x[b] - target) / self.rows[r][enter];
            self.shift(enter, theta);
            self.x[b] = target;
            self.pivot(r, enter, !up);
        }
    }

    /// Shifts nonbasic reduced costs away from zero, in the direction that
    /// keeps them dual feasible, so dual steps cannot stall on ties.
    fn perturb_costs(&mut self) {
        let base = T::of(COST_PERTURBATION);
        for (p, &v) in self.nonbasic.iter().enumerate() {
            if !self.movable(v) {
                continue;
            }
            // Deterministic spread in [1, 2) so ties break the same way on every run.
            let spread = T::of(1.0 + ((v as u64).wrapping_mul(2_654_435_761) % 1024) as f64 / 1024.0);
            let delta = base * spread * (T::one() + self.cost[v].abs());
            match self.state[v] {
                State::Lower(_) => self.d[p] += delta,
                State::Upper(_) => self.d[p] -= delta,
                _ => {}
            }
        }
    }

    /// Two-phase solve from the all-slack basis; rows that start outside
    /// their slack bounds get an artificial variable for phase one.
    pub fn solve_cold(lo: &[T], hi: &[T], cost: &[T], lp_rows: &[LpRow<T>]) -> (Tableau<T>, LpOutcome) {
        let n = lo.len();
        let m = lp_rows.len();
        let mut t = Tableau {
            n,
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            x: Vec::with_capacity(n + m),
            cost: Vec::new(),
            state: Vec::with_capacity(n + m),
            basis: Vec::with_capacity(m),
            nonbasic: (0..n).collect(),
            rows: Vec::with_capacity(m),
            d: Vec::new(),
            perturbed: false,
            pivots: 0,
        };
        for j in 0..n {
            let (s, v) = resting(lo[j], hi[j], j);
            t.state.push(s);
            t.x.push(v);
        }
        // Slack of row i is variable n + i; artificials follow.
        let mut arts = Vec::new();
        let mut scale = T::one();
        for (i, r) in lp_rows.iter().enumerate() {
            let mut row = vec![T::zero(); n];
            let mut resid = r.rhs;
            for &(j, a) in &r.coefs {
                row[j] += a;
                resid -= a * t.x[j];
            }
            scale = scale.max(r.rhs.abs());
            let (sl, sh) = slack_bounds::<T>(r.sense);
            t.lo.push(sl);
            t.hi.push(sh);
            if resid >= sl && resid <= sh {
                t.x.push(resid);
                t.state.push(State::Basic(i));
                t.basis.push(n + i);
            } else {
                let v = if resid < sl { sl } else { sh };
                t.x.push(v);
                t.state.push(State::Retired);
                t.basis.push(usize::MAX);
                arts.push((i, resid - v));
            }
            t.rows.push(row);
        }
        for (k, &(i, gap)) in arts.iter().enumerate() {
            let slack = n + i;
            // With σ = sign(gap): art = (b − a·x − s)/σ, so its row is (a, 1)/σ.
            let p = t.nonbasic.len();
            t.nonbasic.push(slack);
            t.state[slack] = if t.x[slack] == t.hi[slack] && t.lo[slack] != t.hi[slack] {
                State::Upper(p)
            } else {
                State::Lower(p)
            };
            for (ri, row) in t.rows.iter_mut().enumerate() {
                row.push(if ri == i { T::one() } else { T::zero() });
            }
            if gap < T::zero() {
                t.rows[i].iter_mut().for_each(|v| *v = -*v);
            }
            t.lo.push(T::zero());
            t.hi.push(T::infinity());
            t.x.push(gap.abs());
            t.state.push(State::Basic(i));
            t.basis[i] = n + m + k;
        }

        if !arts.is_empty() {
            let mut c1 = vec![T::zero(); t.x.len()];
            c1[n + m..].iter_mut().for_each(|v| *v = T::one());
            t.set_costs(c1);
            match t.primal() {
                LpOutcome::Optimal => {}
                LpOutcome::IterationLimit => return (t, LpOutcome::IterationLimit),
                _ => unreachable!("phase one is bounded below by zero"),
            }
            if t.objective() > T::of(1e-7) * scale {
                return (t, LpOutcome::Infeasible);
            }
            t.retire_artificials(n + m);
        }
        let mut c2 = vec![T::zero(); t.x.len()];
        c2[..n].copy_from_slice(cost);
        t.set_costs(c2);
        let out = t.primal();
        (t, out)
    }

    /// Fixes artificials at zero and drops the nonbasic ones from the tableau.
    fn retire_artificials(&mut self, first: usize) {
        for v in first..self.x.len() {
            self.hi[v] = T::zero();
            if self.state[v].column().is_some() {
                self.x[v] = T::zero();
                self.state[v] = State::Retired;
            }
        }
        let keep: Vec<bool> = self.nonbasic.iter().map(|&v| v < first).collect();
        if keep.iter().all(|&k| k) {
            return;
        }
        for row in self.rows.iter_mut() {
            let mut it = keep.iter();
            row.retain(|_| *it.next().unwrap());
        }
        self.nonbasic.retain(|&v| v < first);
        for (p, &v) in self.nonbasic.iter().enumerate() {
            self.state[v] = match self.state[v] {
                State::Lower(_) => State::Lower(p),
                State::Upper(_) => State::Upper(p),
                State::Free(_) => State::Free(p),
                s => s,
            };
        }
    }

    /// Appends `a·x (≤,=,≥) b` with a new basic slack, expressed in the
    /// current basis. The slack may start outside its bounds.
    pub fn add_row(&mut self, coefs: &[(usize, T)], sense: RowSense, b: T) {
        let slack = self.x.len();
        let r = self.rows.len();
        let (sl, sh) = slack_bounds::<T>(sense);
        let mut row = vec![T::zero(); self.nonbasic.len()];
        let mut value = b;
        for &(j, a) in coefs {
            value -= a * self.x[j];
            match self.state[j] {
                State::Basic(i) => {
                    for (v, &t) in row.iter_mut().zip(&self.rows[i]) {
                        *v -= a * t;
                    }
                }
                s => row[s.column().expect("structural columns are never retired")] += a,
            }
        }
        self.lo.push(sl);
        self.hi.push(sh);
        self.x.push(value);
        self.cost.push(T::zero());
        self.state.push(State::Basic(r));
        self.basis.push(slack);
        self.rows.push(row);
    }

    /// Re-optimizes after [`add_row`](Self::add_row) calls.
    pub fn resolve_dual(&mut self) -> LpOutcome {
        let out = self.dual();
        if self.perturbed {
            let cost = std::mem::take(&mut self.cost);
            self.set_costs(cost);
            self.perturbed = false;
        }
        match out {
            // Restoring the true costs can leave wrong-signed reduced costs;
            // primal steps from the now feasible basis remove them.
            LpOutcome::Optimal => self.primal(),
            other => other,
        }
    }

    /// Structural part of the current basic solution.
    pub fn primal_solution(&self) -> Vec<T> {
        (0..self.n).map(|j| self.x[j].max(self.lo[j]).min(self.hi[j])).collect()
    }

    /// Largest violation of the cold-start `rows` by the current point, slacks included.
    #[cfg(test)]
    fn residual(&self, rows: &[LpRow<T>]) -> T {
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                let act = r.coefs.iter().fold(self.x[self.n + i], |s, &(j, a)| s + a * self.x[j]);
                (act - r.rhs).abs()
            })
            .fold(T::zero(), T::max)
    }
}

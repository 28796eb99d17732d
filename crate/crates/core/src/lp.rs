//! Bounded-variable primal simplex.
//!
//! Rows are `a^T x >= b`. Each row gets an activity variable `r = a^T x`
//! with bounds `[b, +inf)`, so the system is `A x - r = 0` with every
//! variable boxed. A dense tableau `B^-1 [A | -I]` is maintained explicitly;
//! problem sizes here are small enough that this beats the bookkeeping of a
//! factorized basis.
//!
//! Infeasible starting bases are repaired with a composite phase one that
//! minimizes the total bound violation, so any basis (including a warm one
//! whose bounds or rows changed) is a valid starting point.

use std::collections::HashSet;

use crate::cut::Cut;
use crate::lit::Var;

pub const PIVOT_TOL: f64 = 1e-9;
pub const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coefs: Vec<(Var, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// Status of every column followed by every row activity variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub status: Vec<VarStatus>,
    pub n_cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AddRowsOutcome {
    pub added: usize,
    pub duplicates: usize,
    /// An empty cut `0 >= rhs > 0` was offered.
    pub infeasible: bool,
}

#[derive(Debug, Clone)]
pub struct LpModel {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub obj: Vec<f64>,
    rows: Vec<LpRow>,
    fingerprints: HashSet<(Vec<(Var, i64)>, i64)>,
    trivially_infeasible: bool,
    basis: Option<Basis>,
}

impl LpModel {
    /// `n_cols` columns in `[0, 1]` with the given objective (minimized).
    pub fn new(obj: Vec<f64>) -> LpModel {
        let n = obj.len();
        LpModel {
            lo: vec![0.0; n],
            hi: vec![1.0; n],
            obj,
            rows: Vec::new(),
            fingerprints: HashSet::new(),
            trivially_infeasible: false,
            basis: None,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.obj.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[LpRow] {
        &self.rows
    }

    pub fn set_bounds(&mut self, col: Var, lo: f64, hi: f64) {
        debug_assert!(lo <= hi);
        self.lo[col] = lo;
        self.hi[col] = hi;
    }

    /// Adds an integer row, returning false if an identical row exists.
    pub fn add_int_row(&mut self, coefs: &[(Var, i64)], rhs: i64) -> bool {
        let mut key: Vec<(Var, i64)> = coefs.iter().copied().filter(|c| c.1 != 0).collect();
        key.sort_unstable();
        if key.is_empty() {
            if rhs > 0 {
                self.trivially_infeasible = true;
            }
            return false;
        }
        if !self.fingerprints.insert((key.clone(), rhs)) {
            return false;
        }
        self.rows.push(LpRow {
            coefs: key.into_iter().map(|(v, c)| (v, c as f64)).collect(),
            rhs: rhs as f64,
        });
        true
    }

    /// Row without duplicate detection; used for node-local rows whose slot
    /// must stay fixed.
    pub fn push_row(&mut self, row: LpRow) {
        self.rows.push(row);
    }

    pub fn replace_row(&mut self, idx: usize, row: LpRow) {
        self.rows[idx] = row;
    }

    /// Drops rows beyond `n` together with their fingerprints.
    pub fn truncate_rows(&mut self, n: usize) {
        self.rows.truncate(n);
        self.fingerprints.clear();
        for r in &self.rows {
            if r.coefs.iter().all(|c| c.1.fract() == 0.0) {
                self.fingerprints
                    .insert((r.coefs.iter().map(|&(v, c)| (v, c as i64)).collect(), r.rhs as i64));
            }
        }
        if let Some(b) = &mut self.basis {
            if b.status.len() > b.n_cols + n {
                self.basis = None;
            }
        }
    }

    pub fn basis(&self) -> Option<&Basis> {
        self.basis.as_ref()
    }

    pub fn set_basis(&mut self, basis: Option<Basis>) {
        self.basis = basis;
    }

    pub fn is_trivially_infeasible(&self) -> bool {
        self.trivially_infeasible
    }
}

/// Appends cuts as rows. Duplicates (by integer fingerprint) are skipped and
/// an empty cut with positive right-hand side marks the model infeasible. The
/// stored basis stays in place and is extended with basic activity variables
/// on the next solve.
pub fn add_rows(model: &mut LpModel, cuts: &[Cut]) -> AddRowsOutcome {
    let mut out = AddRowsOutcome::default();
    for cut in cuts {
        if cut.coefs.is_empty() {
            if cut.rhs > 0 {
                model.trivially_infeasible = true;
                out.infeasible = true;
            }
            continue;
        }
        if model.add_int_row(&cut.coefs, cut.rhs) {
            out.added += 1;
        } else {
            out.duplicates += 1;
        }
    }
    out
}

struct Simplex<'a> {
    m: usize,
    n: usize,
    total: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: &'a [f64],
    /// Row-major `m x total` tableau.
    tab: Vec<f64>,
    basic: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
}

impl<'a> Simplex<'a> {
    fn new(model: &'a LpModel) -> Simplex<'a> {
        let n = model.n_cols();
        let m = model.n_rows();
        let total = n + m;
        let mut lo = model.lo.clone();
        let mut hi = model.hi.clone();
        for r in &model.rows {
            lo.push(r.rhs);
            hi.push(f64::INFINITY);
        }
        Simplex {
            m,
            n,
            total,
            lo,
            hi,
            cost: &model.obj,
            tab: vec![0.0; m * total],
            basic: vec![0; m],
            status: vec![VarStatus::AtLower; total],
            x: vec![0.0; total],
        }
    }

    fn load_matrix(&mut self, model: &LpModel) {
        self.tab.iter_mut().for_each(|v| *v = 0.0);
        for (i, r) in model.rows.iter().enumerate() {
            let row = &mut self.tab[i * self.total..(i + 1) * self.total];
            for &(j, c) in &r.coefs {
                row[j] += c;
            }
            row[self.n + i] = -1.0;
        }
    }

    fn cold_start(&mut self, model: &LpModel) {
        self.load_matrix(model);
        for j in 0..self.n {
            self.status[j] = VarStatus::AtLower;
        }
        for i in 0..self.m {
            self.status[self.n + i] = VarStatus::Basic;
            self.basic[i] = self.n + i;
            // basis column is -e_i; scale the row to make it +e_i
            let row = &mut self.tab[i * self.total..(i + 1) * self.total];
            row.iter_mut().for_each(|v| *v = -*v);
        }
        self.set_nonbasic_values();
        self.recompute_basic_values();
    }

    /// Installs a stored basis; returns false if it does not fit or is
    /// singular.
    fn warm_start(&mut self, model: &LpModel, basis: &Basis) -> bool {
        if basis.n_cols != self.n || basis.status.len() > self.total {
            return false;
        }
        let mut status = basis.status.clone();
        status.resize(self.total, VarStatus::Basic);
        if status.iter().filter(|&&s| s == VarStatus::Basic).count() != self.m {
            return false;
        }
        self.load_matrix(model);
        let basic_cols: Vec<usize> = (0..self.total).filter(|&j| status[j] == VarStatus::Basic).collect();
        let mut row_used = vec![false; self.m];
        let mut basic = vec![usize::MAX; self.m];
        for &col in &basic_cols {
            let mut best = None;
            let mut best_abs = PIVOT_TOL;
            for i in 0..self.m {
                if !row_used[i] {
                    let v = self.tab[i * self.total + col].abs();
                    if v > best_abs {
                        best_abs = v;
                        best = Some(i);
                    }
                }
            }
            let Some(r) = best else { return false };
            row_used[r] = true;
            basic[r] = col;
            self.pivot(r, col);
        }
        self.basic = basic;
        self.status = status;
        for j in 0..self.total {
            if self.status[j] == VarStatus::AtUpper && !self.hi[j].is_finite() {
                self.status[j] = VarStatus::AtLower;
            }
        }
        self.set_nonbasic_values();
        self.recompute_basic_values();
        true
    }

    fn set_nonbasic_values(&mut self) {
        for j in 0..self.total {
            match self.status[j] {
                VarStatus::AtLower => self.x[j] = self.lo[j],
                VarStatus::AtUpper => self.x[j] = self.hi[j],
                VarStatus::Basic => {}
            }
        }
    }

    fn recompute_basic_values(&mut self) {
        for i in 0..self.m {
            let row = &self.tab[i * self.total..(i + 1) * self.total];
            let mut v = 0.0;
            for j in 0..self.total {
                if self.status[j] != VarStatus::Basic && row[j] != 0.0 {
                    v -= row[j] * self.x[j];
                }
            }
            self.x[self.basic[i]] = v;
        }
    }

    /// Gauss-Jordan pivot making column `col` the unit vector of row `r`.
    fn pivot(&mut self, r: usize, col: usize) {
        let t = self.total;
        let p = self.tab[r * t + col];
        for v in &mut self.tab[r * t..(r + 1) * t] {
            *v /= p;
        }
        let (before, rest) = self.tab.split_at_mut(r * t);
        let (prow, after) = rest.split_at_mut(t);
        for other in before.chunks_mut(t).chain(after.chunks_mut(t)) {
            let f = other[col];
            if f != 0.0 {
                for (o, &pv) in other.iter_mut().zip(prow.iter()) {
                    *o -= f * pv;
                }
                other[col] = 0.0;
            }
        }
    }

    fn cost_of(&self, j: usize) -> f64 {
        if j < self.n {
            self.cost[j]
        } else {
            0.0
        }
    }

    fn infeasibility(&self) -> f64 {
        self.basic
            .iter()
            .map(|&b| {
                let v = self.x[b];
                if v < self.lo[b] - FEAS_TOL {
                    self.lo[b] - v
                } else if v > self.hi[b] + FEAS_TOL {
                    v - self.hi[b]
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn run(&mut self, iter_limit: usize) -> (LpStatus, usize) {
        let degenerate_cap = 3 * (self.m + self.n);
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut refreshed_at_end = false;
        let mut row_costs = vec![0.0; self.m];
        for iter in 0..iter_limit {
            if iter % 64 == 63 {
                self.recompute_basic_values();
            }
            let phase_one = self.infeasibility() > 0.0;
            for (i, &b) in self.basic.iter().enumerate() {
                row_costs[i] = if phase_one {
                    let v = self.x[b];
                    if v < self.lo[b] - FEAS_TOL {
                        -1.0
                    } else if v > self.hi[b] + FEAS_TOL {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost_of(b)
                };
            }

            // pricing
            let mut entering = None;
            let mut best = 0.0;
            for j in 0..self.total {
                let st = self.status[j];
                if st == VarStatus::Basic || self.hi[j] - self.lo[j] <= 0.0 {
                    continue;
                }
                let mut d = if phase_one { 0.0 } else { self.cost_of(j) };
                for i in 0..self.m {
                    let t = self.tab[i * self.total + j];
                    if t != 0.0 {
                        d -= row_costs[i] * t;
                    }
                }
                let gain = match st {
                    VarStatus::AtLower if d < -DUAL_TOL => -d,
                    VarStatus::AtUpper if d > DUAL_TOL => d,
                    _ => continue,
                };
                if bland {
                    entering = Some(j);
                    break;
                }
                if gain > best {
                    best = gain;
                    entering = Some(j);
                }
            }

            let Some(j) = entering else {
                if !refreshed_at_end {
                    // confirm the verdict on freshly computed values
                    refreshed_at_end = true;
                    self.recompute_basic_values();
                    continue;
                }
                return if phase_one {
                    (LpStatus::Infeasible, iter)
                } else {
                    (LpStatus::Optimal, iter)
                };
            };
            refreshed_at_end = false;
            let dir = if self.status[j] == VarStatus::AtLower { 1.0 } else { -1.0 };

            // ratio test
            let mut theta = self.hi[j] - self.lo[j];
            let mut leave: Option<(usize, VarStatus)> = None;
            let mut leave_mag = 0.0;
            for i in 0..self.m {
                let t = self.tab[i * self.total + j];
                if t.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -t * dir;
                let b = self.basic[i];
                let v = self.x[b];
                let (limit, bound) = if rate < 0.0 {
                    if v > self.hi[b] + FEAS_TOL {
                        ((v - self.hi[b]) / -rate, VarStatus::AtUpper)
                    } else if v >= self.lo[b] - FEAS_TOL {
                        (((v - self.lo[b]).max(0.0)) / -rate, VarStatus::AtLower)
                    } else {
                        continue;
                    }
                } else if v < self.lo[b] - FEAS_TOL {
                    ((self.lo[b] - v) / rate, VarStatus::AtLower)
                } else if v <= self.hi[b] + FEAS_TOL && self.hi[b].is_finite() {
                    (((self.hi[b] - v).max(0.0)) / rate, VarStatus::AtUpper)
                } else {
                    continue;
                };
                let better = if bland {
                    limit < theta - 1e-12
                        || (limit <= theta + 1e-12
                            && leave.is_some_and(|(li, _)| self.basic[li] > b))
                } else {
                    limit < theta - 1e-12 || (limit <= theta + 1e-12 && rate.abs() > leave_mag)
                };
                if better {
                    theta = theta.min(limit);
                    leave = Some((i, bound));
                    leave_mag = rate.abs();
                }
            }
            if !theta.is_finite() {
                return (LpStatus::IterationLimit, iter);
            }
            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate > degenerate_cap {
                    bland = true;
                }
            }

            // update values
            self.x[j] += dir * theta;
            for i in 0..self.m {
                let t = self.tab[i * self.total + j];
                if t != 0.0 {
                    let b = self.basic[i];
                    self.x[b] -= t * dir * theta;
                }
            }
            match leave {
                None => {
                    self.status[j] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                }
                Some((r, bound)) => {
                    let b = self.basic[r];
                    self.status[b] = bound;
                    self.x[b] = if bound == VarStatus::AtLower { self.lo[b] } else { self.hi[b] };
                    self.pivot(r, j);
                    self.basic[r] = j;
                    self.status[j] = VarStatus::Basic;
                }
            }
        }
        (LpStatus::IterationLimit, iter_limit)
    }
}

/// Solves `min obj^T x` over the model's rows and bounds. The final basis is
/// stored back into the model for the next call.
pub fn lp_solve(model: &mut LpModel, iter_limit: usize) -> LpSolution {
    let n = model.n_cols();
    if model.trivially_infeasible || (0..n).any(|j| model.lo[j] > model.hi[j]) {
        return LpSolution {
            status: LpStatus::Infeasible,
            x: model.lo.clone(),
            objective: f64::INFINITY,
            iterations: 0,
        };
    }
    let basis = model.basis.take();
    let (status, x, iterations, new_basis) = {
        let mut sx = Simplex::new(model);
        let warm = basis.as_ref().is_some_and(|b| sx.warm_start(model, b));
        if !warm {
            sx.cold_start(model);
        }
        let (mut status, mut iters) = sx.run(iter_limit);
        if status == LpStatus::Infeasible && warm {
            // never trust an infeasibility verdict reached from a stale basis
            sx.cold_start(model);
            let (s, i) = sx.run(iter_limit);
            status = s;
            iters += i;
        }
        let nb = Basis {
            status: sx.status.clone(),
            n_cols: n,
        };
        (status, sx.x[..n].to_vec(), iters, nb)
    };
    model.basis = Some(new_basis);
    let objective = if status == LpStatus::Optimal {
        model.obj.iter().zip(&x).map(|(c, v)| c * v).sum()
    } else {
        f64::NEG_INFINITY
    };
    LpSolution {
        status,
        x,
        objective,
        iterations,
    }
}

/// Largest absolute row shortfall of a point; used by tests and debug checks.
pub fn max_row_violation(model: &LpModel, x: &[f64]) -> f64 {
    model
        .rows
        .iter()
        .map(|r| r.rhs - r.coefs.iter().map(|&(j, c)| c * x[j]).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut::CutKind;

    #[test]
    fn covering_row() {
        let mut m = LpModel::new(vec![1.0, 0.0]);
        m.add_int_row(&[(0, 1), (1, 1)], 1);
        let s = lp_solve(&mut m, 1000);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.objective.abs() < 1e-9);
        assert!(s.x[0] + s.x[1] >= 1.0 - 1e-9);
    }

    #[test]
    fn infeasible_bounds() {
        let mut m = LpModel::new(vec![0.0]);
        m.add_int_row(&[(0, 1)], 1);
        m.set_bounds(0, 0.0, 0.0);
        assert_eq!(lp_solve(&mut m, 1000).status, LpStatus::Infeasible);
    }

    /// Vertices of `{x in [0,1]^2 : 2 x1 + 2 x2 >= 1}` enumerated by hand:
    /// (0.5,0), (0,0.5), (1,0), (0,1), (1,1). Minimizing x1 + x2 picks a
    /// half-integral one with value 0.5.
    #[test]
    fn fractional_vertex() {
        let mut m = LpModel::new(vec![1.0, 1.0]);
        m.add_int_row(&[(0, 2), (1, 2)], 1);
        let s = lp_solve(&mut m, 1000);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 0.5).abs() < 1e-9);
        let halves = s.x.iter().filter(|v| (*v - 0.5).abs() < 1e-9).count();
        assert_eq!(halves, 1);
    }

    #[test]
    fn and_links_admit_fractional_product() {
        // z <= x1, z <= x2, z >= x1 + x2 - 1, 2 x1 + 2 x2 >= 1, min 2 x1 + 2 x2 - z:
        // with s = x1 + x2 >= 0.5 and z <= s / 2 the optimum is 1.5 s at
        // x1 = x2 = z = 0.25, a fractional product
        let mut m = LpModel::new(vec![2.0, 2.0, -1.0]);
        m.add_int_row(&[(0, 2), (1, 2)], 1);
        m.add_int_row(&[(0, 1), (2, -1)], 0);
        m.add_int_row(&[(1, 1), (2, -1)], 0);
        m.add_int_row(&[(2, 1), (0, -1), (1, -1)], -1);
        let s = lp_solve(&mut m, 1000);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 0.75).abs() < 1e-9, "{s:?}");
        assert!((s.x[2] - 0.25).abs() < 1e-9);
        assert!(max_row_violation(&m, &s.x) <= 1e-9);
    }

    #[test]
    fn add_rows_dedup_and_empty() {
        let mut m = LpModel::new(vec![1.0, 1.0]);
        let c = Cut::new(vec![(0, 1), (1, 1)], 1, CutKind::Flower1);
        let before = lp_solve(&mut m, 100).objective;
        let out = add_rows(&mut m, &[c.clone(), c.clone()]);
        assert_eq!(out.added, 1);
        assert_eq!(out.duplicates, 1);
        let after = lp_solve(&mut m, 100).objective;
        assert!(after >= before - 1e-9);
        let out = add_rows(&mut m, &[Cut::new(vec![], 1, CutKind::Rlt)]);
        assert!(out.infeasible);
        assert_eq!(lp_solve(&mut m, 100).status, LpStatus::Infeasible);
    }

    #[test]
    fn warm_start_after_bound_change_and_new_rows() {
        let mut m = LpModel::new(vec![1.0, 2.0, 3.0]);
        m.add_int_row(&[(0, 1), (1, 1), (2, 1)], 2);
        let s = lp_solve(&mut m, 100);
        assert!((s.objective - 3.0).abs() < 1e-9);
        m.set_bounds(0, 0.0, 0.0);
        let s = lp_solve(&mut m, 100);
        assert!((s.objective - 5.0).abs() < 1e-9);
        m.add_int_row(&[(1, -1)], 0);
        let s = lp_solve(&mut m, 100);
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn deterministic() {
        let build = || {
            let mut m = LpModel::new(vec![3.0, -1.0, 2.0, -2.0]);
            m.add_int_row(&[(0, 1), (1, 2), (2, 1)], 2);
            m.add_int_row(&[(1, -1), (3, 1), (0, 1)], 0);
            m.add_int_row(&[(2, 2), (3, 2)], 1);
            m
        };
        let (mut a, mut b) = (build(), build());
        let sa = lp_solve(&mut a, 100);
        let sb = lp_solve(&mut b, 100);
        assert_eq!(sa.x, sb.x);
        assert_eq!(a.basis(), b.basis());
    }
}

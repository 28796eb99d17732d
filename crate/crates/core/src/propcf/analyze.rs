//! Cut-based conflict analysis: the conflicting row is combined with
//! weakened and divided reason rows until it propagates at an earlier level.
//! Falls back to clause learning when coefficients grow too large.

use super::{ConstraintDb, Reason, RowRef, Trail};
use crate::lit::{Lit, Var};
use crate::model::NormConstraint;

/// Coefficient bound for learned rows; larger values trigger the clause
/// fallback.
pub const COEF_LIMIT: i128 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Learned {
    pub row: NormConstraint,
    /// Level to backtrack to before adding the row.
    pub backjump: u32,
    /// Produced by the clause fallback.
    pub clause: bool,
    pub resolutions: usize,
    /// Store rows used as reasons or as the conflict.
    pub used: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Analysis {
    /// Conflict independent of any decision.
    Unsat,
    Learned(Learned),
}

/// Scratch space reused across conflicts.
#[derive(Debug, Clone, Default)]
pub struct Analyzer {
    coef: Vec<i128>,
    lit: Vec<Lit>,
    listed: Vec<bool>,
    vars: Vec<Var>,
    degree: i128,
    seen: Vec<bool>,
}

impl Analyzer {
    pub fn new(n_vars: usize) -> Analyzer {
        Analyzer {
            coef: vec![0; n_vars],
            lit: vec![Lit::pos(0); n_vars],
            listed: vec![false; n_vars],
            vars: Vec::new(),
            degree: 0,
            seen: vec![false; n_vars],
        }
    }

    fn clear(&mut self) {
        for &v in &self.vars {
            self.coef[v] = 0;
            self.listed[v] = false;
        }
        self.vars.clear();
        self.degree = 0;
    }

    fn add_term(&mut self, c: i128, l: Lit) {
        let v = l.var();
        if self.coef[v] == 0 {
            self.coef[v] = c;
            self.lit[v] = l;
            if !self.listed[v] {
                self.listed[v] = true;
                self.vars.push(v);
            }
        } else if self.lit[v] == l {
            self.coef[v] += c;
        } else {
            // c1 l + c2 ~l = min(c1, c2) + |c1 - c2| (dominant literal)
            let old = self.coef[v];
            self.degree -= old.min(c);
            if old >= c {
                self.coef[v] = old - c;
            } else {
                self.coef[v] = c - old;
                self.lit[v] = l;
            }
        }
    }

    fn add_scaled(&mut self, terms: &[(i128, Lit)], degree: i128, mult: i128) {
        for &(c, l) in terms {
            self.add_term(c * mult, l);
        }
        self.degree += degree * mult;
    }

    fn saturate(&mut self) {
        let d = self.degree.max(0);
        for &v in &self.vars {
            if self.coef[v] > d {
                self.coef[v] = d;
            }
        }
    }

    fn too_large(&self) -> bool {
        self.degree > COEF_LIMIT || self.vars.iter().any(|&v| self.coef[v] > COEF_LIMIT)
    }

    /// False at a trail position below `ptr`.
    fn false_in_prefix(trail: &Trail, l: Lit, ptr: usize) -> bool {
        trail.is_false(l) && trail.position(l.var()) < ptr
    }

    /// Conflict level and, when the row is assertive, the backjump level.
    fn levels(&self, trail: &Trail, ptr: usize) -> (u32, Option<u32>) {
        let n_levels = trail.decision_level() as usize + 1;
        let mut fsum = vec![0i128; n_levels];
        let mut best_at = vec![0i128; n_levels];
        let mut unassigned_max = 0i128;
        let mut total = -self.degree;
        for &v in &self.vars {
            let c = self.coef[v];
            if c == 0 {
                continue;
            }
            total += c;
            let l = self.lit[v];
            if trail.var_value(v).is_some() && trail.position(v) < ptr {
                let lv = trail.level(v) as usize;
                best_at[lv] = best_at[lv].max(c);
                if trail.is_false(l) {
                    fsum[lv] += c;
                }
            } else {
                unassigned_max = unassigned_max.max(c);
            }
        }
        let mut slack = Vec::with_capacity(n_levels);
        let mut s = total;
        for f in &fsum {
            s -= f;
            slack.push(s);
        }
        let d = slack.iter().position(|&s| s < 0).unwrap_or(n_levels - 1) as u32;
        // max coefficient over literals above each level
        let mut above = vec![unassigned_max; n_levels];
        let mut m = unassigned_max;
        for lv in (0..n_levels).rev() {
            above[lv] = m;
            m = m.max(best_at[lv]);
        }
        let jump = (0..d as usize).find(|&l| above[l] > slack[l]).map(|l| l as u32);
        (d, jump)
    }

    pub fn analyze(&mut self, db: &ConstraintDb, trail: &Trail, conflict: RowRef, use_pb: bool) -> Analysis {
        let n = trail.n_vars();
        if self.coef.len() < n {
            *self = Analyzer::new(n);
        }
        if use_pb {
            if let Some(a) = self.analyze_pb(db, trail, conflict) {
                return a;
            }
        }
        self.analyze_clause(db, trail, conflict)
    }

    fn analyze_pb(&mut self, db: &ConstraintDb, trail: &Trail, conflict: RowRef) -> Option<Analysis> {
        self.clear();
        let mut used = Vec::new();
        if let RowRef::Db(i) = conflict {
            used.push(i);
        }
        let row = db.lookup(trail, conflict);
        let terms: Vec<(i128, Lit)> = row.terms.iter().map(|&(c, l)| (c as i128, l)).collect();
        self.add_scaled(&terms, row.degree as i128, 1);
        let mut ptr = trail.len();
        let mut resolutions = 0;
        loop {
            let (d, jump) = self.levels(trail, ptr);
            if d == 0 {
                self.clear();
                return Some(Analysis::Unsat);
            }
            if let Some(backjump) = jump {
                let row = self.extract(trail)?;
                self.clear();
                return Some(Analysis::Learned(Learned {
                    row,
                    backjump,
                    clause: false,
                    resolutions,
                    used,
                }));
            }
            // last falsified literal of the work row inside the prefix
            let mut q = ptr;
            let lit = loop {
                if q == 0 {
                    self.clear();
                    return None;
                }
                q -= 1;
                let l = trail.lits()[q];
                let v = l.var();
                if self.coef[v] > 0 && self.lit[v] == !l {
                    break l;
                }
            };
            ptr = q;
            let reason = match trail.reason(lit.var()) {
                Reason::Row(r) => r,
                _ => {
                    self.clear();
                    return None;
                }
            };
            if let RowRef::Db(i) = reason {
                used.push(i);
            }
            let r_row = db.lookup(trail, reason);
            let r = r_row.terms.iter().find(|t| t.1 == lit).map(|t| t.0 as i128)?;
            // weaken non-falsified literals whose coefficient r does not divide
            let mut deg = r_row.degree as i128;
            let mut kept: Vec<(i128, Lit)> = Vec::with_capacity(r_row.terms.len());
            for &(c, l) in &r_row.terms {
                let c = c as i128;
                if l != lit && c % r != 0 && !Self::false_in_prefix(trail, l, q) {
                    deg -= c;
                } else {
                    kept.push((c, l));
                }
            }
            let div_deg = (deg + r - 1).div_euclid(r);
            for t in &mut kept {
                t.0 = (t.0 + r - 1) / r;
            }
            let mult = self.coef[lit.var()];
            self.add_scaled(&kept, div_deg, mult);
            self.saturate();
            resolutions += 1;
            if self.too_large() {
                self.clear();
                return None;
            }
        }
    }

    /// Current work row with level-0 literals removed.
    fn extract(&self, trail: &Trail) -> Option<NormConstraint> {
        let mut degree = self.degree;
        let mut terms = Vec::new();
        for &v in &self.vars {
            let c = self.coef[v];
            if c == 0 {
                continue;
            }
            let l = self.lit[v];
            if trail.var_value(v).is_some() && trail.level(v) == 0 {
                if trail.is_true(l) {
                    degree -= c;
                }
                continue;
            }
            terms.push((c, l));
        }
        if degree > COEF_LIMIT {
            return None;
        }
        let mut row = NormConstraint {
            terms: terms.into_iter().map(|(c, l)| (c.min(degree) as i64, l)).collect(),
            degree: degree as i64,
        };
        row.terms.sort_by_key(|&(c, l)| (std::cmp::Reverse(c), l));
        Some(row)
    }

    /// First-UIP clause learning on clause-weakened rows.
    fn analyze_clause(&mut self, db: &ConstraintDb, trail: &Trail, conflict: RowRef) -> Analysis {
        let row = db.lookup(trail, conflict);
        let d = row
            .terms
            .iter()
            .filter(|t| trail.is_false(t.1))
            .map(|t| trail.level(t.1.var()))
            .max()
            .unwrap_or(0);
        if d == 0 {
            return Analysis::Unsat;
        }
        let mut used = Vec::new();
        let mut learnt: Vec<Lit> = Vec::new();
        let mut touched: Vec<Var> = Vec::new();
        let mut counter = 0usize;
        let mut current = conflict;
        let mut limit = trail.len();
        let mut idx = trail.len();
        let mut resolutions = 0;
        let uip = loop {
            if let RowRef::Db(i) = current {
                used.push(i);
            }
            for &(_, l) in &db.lookup(trail, current).terms {
                let v = l.var();
                if self.seen[v] || !Self::false_in_prefix(trail, l, limit) || trail.level(v) == 0 {
                    continue;
                }
                self.seen[v] = true;
                touched.push(v);
                if trail.level(v) == d {
                    counter += 1;
                } else {
                    learnt.push(l);
                }
            }
            let p = loop {
                idx -= 1;
                let p = trail.lits()[idx];
                if self.seen[p.var()] && trail.level(p.var()) == d {
                    break p;
                }
            };
            counter -= 1;
            if counter == 0 {
                break p;
            }
            current = match trail.reason(p.var()) {
                Reason::Row(r) => r,
                other => unreachable!("non-UIP literal {p:?} at the conflict level has reason {other:?}"),
            };
            limit = idx;
            resolutions += 1;
        };
        for v in touched {
            self.seen[v] = false;
        }
        let backjump = learnt.iter().map(|l| trail.level(l.var())).max().unwrap_or(0);
        let mut terms = vec![(1, !uip)];
        terms.extend(learnt.into_iter().map(|l| (1, l)));
        Analysis::Learned(Learned {
            row: NormConstraint { terms, degree: 1 },
            backjump,
            clause: true,
            resolutions,
            used,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(terms: &[(i64, Lit)], degree: i64) -> NormConstraint {
        NormConstraint {
            terms: terms.to_vec(),
            degree,
        }
    }

    /// Every assignment satisfying `premises` satisfies `learned`.
    fn implied(premises: &[NormConstraint], learned: &NormConstraint, n: usize) -> bool {
        (0..1u32 << n).all(|bits| {
            let x: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            !premises.iter().all(|r| r.is_satisfied(&x)) || learned.is_satisfied(&x)
        })
    }

    fn run(rows: &[NormConstraint], decisions: &[Lit], n: usize, use_pb: bool) -> Analysis {
        let mut db = ConstraintDb::new(n);
        let mut t = Trail::new(n);
        for r in rows {
            db.add_row(r.clone(), false, &mut t).unwrap();
        }
        assert!(db.propagate(&mut t).is_none());
        for &d in decisions {
            if t.lit_value(d).is_some() {
                continue;
            }
            if let Some(c) = super::super::decide_and_propagate(&mut db, &mut t, d) {
                return Analyzer::new(n).analyze(&db, &t, c, use_pb);
            }
        }
        panic!("no conflict");
    }

    #[test]
    fn pigeon_style_conflict_learns_valid_row() {
        // a + b + c >= 2, ~a + ~b >= 1, ~b + ~c >= 1, ~a + ~c >= 1
        let rows = vec![
            row(&[(1, Lit::pos(0)), (1, Lit::pos(1)), (1, Lit::pos(2))], 2),
            row(&[(1, Lit::neg(0)), (1, Lit::neg(1))], 1),
            row(&[(1, Lit::neg(1)), (1, Lit::neg(2))], 1),
            row(&[(1, Lit::neg(0)), (1, Lit::neg(2))], 1),
        ];
        for use_pb in [true, false] {
            match run(&rows, &[Lit::pos(0)], 3, use_pb) {
                Analysis::Unsat => {}
                Analysis::Learned(l) => {
                    assert!(implied(&rows, &l.row, 3));
                    assert_eq!(l.backjump, 0);
                }
            }
        }
    }

    #[test]
    fn resolution_cancels_and_asserts_at_root() {
        // ~a forces b and c through 2a + 2b + c >= 3, then
        // 2~b + 2~c + d >= 3 fails; resolving on c gives 4a + 2b + d >= 5
        let rows = vec![
            row(&[(2, Lit::pos(0)), (2, Lit::pos(1)), (1, Lit::pos(2))], 3),
            row(&[(2, Lit::neg(1)), (2, Lit::neg(2)), (1, Lit::pos(3))], 3),
        ];
        let Analysis::Learned(l) = run(&rows, &[Lit::neg(0)], 4, true) else {
            panic!("expected a learned row");
        };
        assert!(!l.clause);
        assert_eq!(l.backjump, 0);
        assert_eq!(l.row, row(&[(4, Lit::pos(0)), (2, Lit::pos(1)), (1, Lit::pos(3))], 5));
        assert!(implied(&rows, &l.row, 4));
        let Analysis::Learned(c) = run(&rows, &[Lit::neg(0)], 4, false) else {
            panic!("expected a learned clause");
        };
        assert!(c.clause);
        assert!(implied(&rows, &c.row, 4));
        assert_eq!(c.backjump, 0);
    }
}

//! Propagation over normalized PB rows and conflict analysis.
//!
//! Rows are watched with the generalized scheme: a row keeps a set of
//! watched terms whose non-false coefficient sum reaches `degree + maxcoef`,
//! or else every term is watched. Under that invariant a row can only
//! propagate or conflict after one of its watched literals is falsified.

mod analyze;
mod trail;

pub use analyze::{Analysis, Analyzer, Learned};
pub use trail::{Reason, RowRef, Trail};

use crate::lit::Lit;
use crate::model::NormConstraint;

pub const DEFAULT_LEARNED_CAP: usize = 10_000;

#[derive(Debug, Clone)]
struct DbRow {
    row: NormConstraint,
    learned: bool,
    deleted: bool,
    activity: f64,
    watched: Vec<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PropStats {
    pub propagations: u64,
    pub conflicts: u64,
}

enum Visit {
    Keep,
    Drop,
    Conflict,
}

/// Row store with watch lists. Row indices are stable; deleted rows keep
/// their slot.
#[derive(Debug, Clone)]
pub struct ConstraintDb {
    rows: Vec<DbRow>,
    watches: Vec<Vec<usize>>,
    n_learned: usize,
    pub learned_cap: usize,
    act_inc: f64,
    cutoff: Option<usize>,
    pub stats: PropStats,
}

impl ConstraintDb {
    pub fn new(n_vars: usize) -> ConstraintDb {
        ConstraintDb {
            rows: Vec::new(),
            watches: vec![Vec::new(); 2 * n_vars],
            n_learned: 0,
            learned_cap: DEFAULT_LEARNED_CAP,
            act_inc: 1.0,
            cutoff: None,
            stats: PropStats::default(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.watches.len() / 2
    }

    pub fn row(&self, idx: usize) -> &NormConstraint {
        &self.rows[idx].row
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_learned(&self) -> usize {
        self.n_learned
    }

    pub fn is_live(&self, idx: usize) -> bool {
        !self.rows[idx].deleted
    }

    pub fn learned_rows(&self) -> impl Iterator<Item = &NormConstraint> {
        self.rows
            .iter()
            .filter(|r| r.learned && !r.deleted)
            .map(|r| &r.row)
    }

    /// Reason or conflict row behind a reference.
    pub fn lookup<'a>(&'a self, trail: &'a Trail, r: RowRef) -> &'a NormConstraint {
        match r {
            RowRef::Db(i) => &self.rows[i].row,
            RowRef::Expl(i) => trail.explanation(i),
        }
    }

    /// Adds a row and propagates it against the current trail. Returns the
    /// row reference when it is already violated.
    pub fn add_row(&mut self, mut row: NormConstraint, learned: bool, trail: &mut Trail) -> Result<usize, RowRef> {
        row.terms.retain(|&(c, _)| c > 0);
        row.terms.sort_by_key(|&(c, l)| (std::cmp::Reverse(c), l));
        row.saturate();
        let idx = self.rows.len();
        let n = row.terms.len();
        self.rows.push(DbRow {
            row,
            learned,
            deleted: false,
            activity: if learned { self.act_inc } else { 0.0 },
            watched: vec![false; n],
        });
        if learned {
            self.n_learned += 1;
        }
        match self.attach(idx, trail) {
            Visit::Conflict => Err(RowRef::Db(idx)),
            _ => Ok(idx),
        }
    }

    /// Replaces the objective cutoff row. The previous cutoff stays as a
    /// zero-activity learned row, since it may still be a reason on the trail.
    pub fn set_cutoff(&mut self, row: NormConstraint, trail: &mut Trail) -> Result<usize, RowRef> {
        if let Some(old) = self.cutoff.take() {
            let r = &mut self.rows[old];
            if !r.deleted && !r.learned {
                r.learned = true;
                r.activity = 0.0;
                self.n_learned += 1;
            }
        }
        let res = self.add_row(row, false, trail);
        self.cutoff = Some(match res {
            Ok(i) => i,
            Err(RowRef::Db(i)) => i,
            Err(RowRef::Expl(_)) => unreachable!(),
        });
        res
    }

    pub fn cutoff(&self) -> Option<&NormConstraint> {
        self.cutoff.map(|i| &self.rows[i].row)
    }

    pub fn bump(&mut self, idx: usize) {
        let r = &mut self.rows[idx];
        if !r.learned {
            return;
        }
        r.activity += self.act_inc;
        if r.activity > 1e100 {
            for r in &mut self.rows {
                r.activity *= 1e-100;
            }
            self.act_inc *= 1e-100;
        }
    }

    pub fn decay(&mut self) {
        self.act_inc /= 0.999;
    }

    fn delete(&mut self, idx: usize) {
        let r = &mut self.rows[idx];
        if r.deleted {
            return;
        }
        r.deleted = true;
        if r.learned {
            self.n_learned -= 1;
        }
        r.row.terms = Vec::new();
        r.watched = Vec::new();
    }

    /// Halves the learned store once it exceeds the cap. Rows of length at
    /// most two are kept. Must be called at decision level 0.
    pub fn reduce_learned(&mut self, trail: &mut Trail) {
        assert_eq!(trail.decision_level(), 0);
        if self.n_learned <= self.learned_cap {
            return;
        }
        let mut cand: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.learned && !r.deleted && r.row.terms.len() > 2)
            .map(|(i, r)| (r.activity, i))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n_del = cand.len().min(self.n_learned / 2);
        trail.forget_root_reasons();
        for &(_, i) in &cand[..n_del] {
            self.delete(i);
        }
    }

    /// Deletes learned rows longer than `max_len`. Must be called at level 0.
    pub fn purge_learned(&mut self, max_len: usize, trail: &mut Trail) {
        assert_eq!(trail.decision_level(), 0);
        trail.forget_root_reasons();
        for i in 0..self.rows.len() {
            if self.rows[i].learned && self.rows[i].row.terms.len() > max_len {
                self.delete(i);
            }
        }
    }

    fn watch(watches: &mut [Vec<usize>], row: &mut DbRow, j: usize, idx: usize) {
        if !row.watched[j] {
            row.watched[j] = true;
            watches[row.row.terms[j].1.code()].push(idx);
        }
    }

    /// Selects initial watches and propagates.
    fn attach(&mut self, idx: usize, trail: &mut Trail) -> Visit {
        let row = &mut self.rows[idx];
        let deg = row.row.degree as i128;
        let thr = deg + row.row.max_coef() as i128;
        let mut w: i128 = 0;
        for j in 0..row.row.terms.len() {
            if w >= thr {
                break;
            }
            let (c, l) = row.row.terms[j];
            if !trail.is_false(l) {
                Self::watch(&mut self.watches, row, j, idx);
                w += c as i128;
            }
        }
        if w >= thr {
            return Visit::Keep;
        }
        for j in 0..row.row.terms.len() {
            Self::watch(&mut self.watches, row, j, idx);
        }
        Self::fire(row, idx, w - deg, trail, &mut self.stats)
    }

    /// Propagation step for a row whose terms are all watched and whose
    /// non-false sum minus the degree is `slack`.
    fn fire(row: &DbRow, idx: usize, slack: i128, trail: &mut Trail, stats: &mut PropStats) -> Visit {
        if slack < 0 {
            stats.conflicts += 1;
            return Visit::Conflict;
        }
        for &(c, l) in &row.row.terms {
            if c as i128 <= slack {
                break;
            }
            if trail.lit_value(l).is_none() {
                trail.assign(l, Reason::Row(RowRef::Db(idx)));
                stats.propagations += 1;
            }
        }
        Visit::Keep
    }

    fn visit(&mut self, idx: usize, falsified: Lit, trail: &mut Trail) -> Visit {
        let row = &mut self.rows[idx];
        if row.deleted {
            return Visit::Drop;
        }
        let Some(t) = row.row.terms.iter().position(|&(_, l)| l == falsified) else {
            return Visit::Drop;
        };
        if !row.watched[t] {
            return Visit::Drop;
        }
        let deg = row.row.degree as i128;
        let thr = deg + row.row.terms[0].0 as i128;
        let mut w: i128 = row
            .row
            .terms
            .iter()
            .zip(&row.watched)
            .filter(|&(&(_, l), &on)| on && !trail.is_false(l))
            .map(|(&(c, _), _)| c as i128)
            .sum();
        if w < thr {
            for j in 0..row.row.terms.len() {
                let (c, l) = row.row.terms[j];
                if !row.watched[j] && !trail.is_false(l) {
                    Self::watch(&mut self.watches, row, j, idx);
                    w += c as i128;
                    if w >= thr {
                        break;
                    }
                }
            }
        }
        if w >= thr {
            // false watches are released; their list entries go stale
            for j in 0..row.row.terms.len() {
                if row.watched[j] && trail.is_false(row.row.terms[j].1) {
                    row.watched[j] = false;
                }
            }
            return Visit::Drop;
        }
        for j in 0..row.row.terms.len() {
            Self::watch(&mut self.watches, row, j, idx);
        }
        Self::fire(row, idx, w - deg, trail, &mut self.stats)
    }

    /// Unit propagation to fixpoint. Returns a violated row on conflict.
    pub fn propagate(&mut self, trail: &mut Trail) -> Option<RowRef> {
        while trail.qhead < trail.len() {
            let falsified = !trail.lits()[trail.qhead];
            trail.qhead += 1;
            let mut list = std::mem::take(&mut self.watches[falsified.code()]);
            let mut conflict = None;
            let mut i = 0;
            while i < list.len() {
                match self.visit(list[i], falsified, trail) {
                    Visit::Keep => i += 1,
                    Visit::Drop => {
                        list.swap_remove(i);
                    }
                    Visit::Conflict => {
                        conflict = Some(RowRef::Db(list[i]));
                        break;
                    }
                }
            }
            let added = std::mem::take(&mut self.watches[falsified.code()]);
            list.extend(added);
            self.watches[falsified.code()] = list;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    /// Full scan for a violated live row; used by tests and as a final
    /// safety net on complete assignments.
    pub fn find_violated(&self, trail: &Trail) -> Option<usize> {
        self.rows.iter().position(|r| {
            !r.deleted && {
                let nonfalse: i128 = r
                    .row
                    .terms
                    .iter()
                    .filter(|&&(_, l)| !trail.is_false(l))
                    .map(|&(c, _)| c as i128)
                    .sum();
                nonfalse < r.row.degree as i128
            }
        })
    }
}

/// Assigns `lit` as a new decision and propagates.
pub fn decide_and_propagate(db: &mut ConstraintDb, trail: &mut Trail, lit: Lit) -> Option<RowRef> {
    trail.decide(lit);
    db.propagate(trail)
}

use crate::lit::{Lit, Var};
use crate::model::NormConstraint;

/// Constraint that forced an assignment or detected a conflict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowRef {
    /// Row of the constraint store.
    Db(usize),
    /// Explanation clause attached to the trail (symmetry reasoning).
    Expl(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    Decision,
    Row(RowRef),
    /// Level-0 fact whose original reason is no longer kept.
    Root,
}

/// Chronological assignment stack with decision levels.
#[derive(Debug, Clone)]
pub struct Trail {
    value: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Reason>,
    pos: Vec<usize>,
    lits: Vec<Lit>,
    /// `level_start[d]` is the trail index where level `d + 1` begins.
    level_start: Vec<usize>,
    pub(crate) qhead: usize,
    expl: Vec<NormConstraint>,
    expl_level_start: Vec<usize>,
}

impl Trail {
    pub fn new(n_vars: usize) -> Trail {
        Trail {
            value: vec![None; n_vars],
            level: vec![0; n_vars],
            reason: vec![Reason::Decision; n_vars],
            pos: vec![usize::MAX; n_vars],
            lits: Vec::new(),
            level_start: Vec::new(),
            qhead: 0,
            expl: Vec::new(),
            expl_level_start: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.value.len()
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn decision_level(&self) -> u32 {
        self.level_start.len() as u32
    }

    pub fn var_value(&self, v: Var) -> Option<bool> {
        self.value[v]
    }

    pub fn lit_value(&self, l: Lit) -> Option<bool> {
        self.value[l.var()].map(|v| l.eval(v))
    }

    pub fn is_true(&self, l: Lit) -> bool {
        self.lit_value(l) == Some(true)
    }

    pub fn is_false(&self, l: Lit) -> bool {
        self.lit_value(l) == Some(false)
    }

    pub fn level(&self, v: Var) -> u32 {
        self.level[v]
    }

    pub fn reason(&self, v: Var) -> Reason {
        self.reason[v]
    }

    /// Trail index of an assigned variable.
    pub fn position(&self, v: Var) -> usize {
        self.pos[v]
    }

    pub fn n_assigned(&self) -> usize {
        self.lits.len()
    }

    pub fn n_root_fixed(&self) -> usize {
        self.level_start.first().copied().unwrap_or(self.lits.len())
    }

    /// Literals of a given decision level, in assignment order.
    pub fn level_lits(&self, level: u32) -> &[Lit] {
        let l = level as usize;
        let start = if l == 0 { 0 } else { self.level_start[l - 1] };
        let end = self.level_start.get(l).copied().unwrap_or(self.lits.len());
        &self.lits[start..end]
    }

    pub fn decisions(&self) -> Vec<Lit> {
        self.level_start
            .iter()
            .filter_map(|&s| self.lits.get(s).copied())
            .filter(|l| self.reason[l.var()] == Reason::Decision)
            .collect()
    }

    pub fn assign(&mut self, l: Lit, reason: Reason) {
        let v = l.var();
        debug_assert!(self.value[v].is_none(), "variable {v} assigned twice");
        self.value[v] = Some(!l.is_neg());
        self.level[v] = self.decision_level();
        self.reason[v] = if self.decision_level() == 0 && reason == Reason::Decision {
            Reason::Root
        } else {
            reason
        };
        self.pos[v] = self.lits.len();
        self.lits.push(l);
    }

    /// Opens a new level and assigns `l` as its decision.
    pub fn decide(&mut self, l: Lit) {
        self.level_start.push(self.lits.len());
        self.expl_level_start.push(self.expl.len());
        self.assign(l, Reason::Decision);
    }

    /// Opens a new level without assigning anything (replayed decision that
    /// is already implied).
    pub fn new_level(&mut self) {
        self.level_start.push(self.lits.len());
        self.expl_level_start.push(self.expl.len());
    }

    pub fn backtrack_to(&mut self, level: u32) {
        let level = level as usize;
        if level >= self.level_start.len() {
            return;
        }
        let start = self.level_start[level];
        for l in self.lits.drain(start..) {
            let v = l.var();
            self.value[v] = None;
            self.pos[v] = usize::MAX;
        }
        self.expl.truncate(self.expl_level_start[level]);
        self.level_start.truncate(level);
        self.expl_level_start.truncate(level);
        self.qhead = self.qhead.min(self.lits.len());
    }

    /// Stores an explanation clause at the current level.
    pub fn push_explanation(&mut self, row: NormConstraint) -> RowRef {
        self.expl.push(row);
        RowRef::Expl(self.expl.len() - 1)
    }

    pub fn explanation(&self, idx: usize) -> &NormConstraint {
        &self.expl[idx]
    }

    /// Level-0 literals lose their reasons; used when rows are deleted.
    pub fn forget_root_reasons(&mut self) {
        for &l in &self.lits[..self.n_root_fixed()] {
            self.reason[l.var()] = Reason::Root;
        }
    }

    /// Current assignment as a fractional vector (unassigned = 0.5).
    pub fn values_f64(&self) -> Vec<f64> {
        self.value
            .iter()
            .map(|v| match v {
                Some(true) => 1.0,
                Some(false) => 0.0,
                None => 0.5,
            })
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.lits.len() == self.value.len()
    }

    pub fn assignment(&self) -> Vec<bool> {
        self.value.iter().map(|v| v.unwrap_or(false)).collect()
    }
}

//! Branch-and-bound driver.
//!
//! Nodes are decision lists. The trail is kept in sync with the node being
//! processed by backtracking to the longest common decision prefix and
//! replaying the rest. Each node propagates, solves its LP (with flower and
//! RLT separation at the root and periodically), prunes against the
//! incumbent and branches. Propagation conflicts are analyzed and the learned
//! row is added at its backjump level; the node is then dropped.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::cut::{Cut, CutKind};
use crate::fjump::{fj_run, FjConfig};
use crate::flower::{build_hypergraph, separate_flower, Hypergraph};
use crate::lit::{Lit, Var};
use crate::lp::{add_rows, lp_solve, LpModel, LpRow, LpStatus};
use crate::model::{instance_cost, linearize, normalize, EngineProblem, NormConstraint};
use crate::opb::{Instance, Relation, Status};
use crate::propcf::{Analysis, Analyzer, ConstraintDb, RowRef, Trail};
use crate::rlt::{build_product_table, separate_rlt_round, ProductTable};
use crate::symmetry::{detect, SymStats, SymmetryHandler, DEFAULT_NODE_LIMIT};

pub const DEFAULT_MCAP: i64 = 1_000_000;
pub const DEFAULT_FTOL: f64 = 1e-6;
pub const PLUNGE_DEPTH: u32 = 8;
pub const MAX_RESTARTS: u32 = 3;
/// Dense tableau work per LP solve above which the LP runs at the root only.
const LP_NODE_BUDGET: f64 = 2e8;
/// Above this the LP is not used at all.
const LP_ROOT_BUDGET: f64 = 4e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Default,
    AggressiveHeur,
    SatLike,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Default => "default",
            Mode::AggressiveHeur => "aggressive-heur",
            Mode::SatLike => "sat-like",
        }
    }
}

/// Callback receiving every improving objective value.
#[derive(Clone)]
pub struct Observer(pub Arc<dyn Fn(i128) + Send + Sync>);

impl fmt::Debug for Observer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Observer")
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub time_limit: Option<Duration>,
    pub node_limit: Option<u64>,
    pub seed: u64,
    pub mode: Mode,
    pub flower: bool,
    pub rlt: bool,
    pub symmetry: bool,
    pub conflict_pb: bool,
    pub fjump: bool,
    pub restarts: bool,
    /// Number of portfolio threads; 0 or 1 runs a single solver.
    pub portfolio: usize,
    pub mcap: i64,
    pub ftol: f64,
    pub sym_node_limit: u64,
    pub max_cuts: usize,
    pub root_cut_rounds: usize,
    pub cut_freq: u32,
    pub record_learned: bool,
    pub record_cuts: bool,
    pub stop: Option<Arc<AtomicBool>>,
    pub observer: Option<Observer>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            time_limit: None,
            node_limit: None,
            seed: 0,
            mode: Mode::Default,
            flower: true,
            rlt: true,
            symmetry: true,
            conflict_pb: true,
            fjump: true,
            restarts: true,
            portfolio: 0,
            mcap: DEFAULT_MCAP,
            ftol: DEFAULT_FTOL,
            sym_node_limit: DEFAULT_NODE_LIMIT,
            max_cuts: 100,
            root_cut_rounds: 10,
            cut_freq: 10,
            record_learned: false,
            record_cuts: false,
            stop: None,
            observer: None,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.ftol > 0.0 && self.ftol < 0.5) {
            return Err(format!("ftol must lie in (0, 0.5), got {}", self.ftol));
        }
        if self.mcap <= 0 {
            return Err(format!("mcap must be positive, got {}", self.mcap));
        }
        if self.cut_freq == 0 {
            return Err("cut frequency must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    FJump,
    LpRounding,
    NodeIntegral,
    Shared,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Incumbent {
    /// Values of the original variables.
    pub x: Vec<bool>,
    pub objective: i128,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default)]
pub struct Stats {
    pub nodes: u64,
    pub max_depth: u32,
    pub lp_solves: u64,
    pub lp_iterations: u64,
    pub lp_infeasible: u64,
    pub conflicts: u64,
    pub learned: u64,
    pub clause_fallbacks: u64,
    pub non_assertive: u64,
    pub propagations: u64,
    /// Cuts added to the LP, indexed like `CutKind::ALL`.
    pub cuts: [u64; 4],
    pub restarts: u32,
    pub fj_flips: u64,
    pub fj_solutions: u64,
    pub incumbents: u64,
    pub rejected_candidates: u64,
    pub sym: SymStats,
    pub sym_nodes: u64,
    pub lp_enabled: bool,
    pub learned_log: Vec<(NormConstraint, Option<i128>)>,
    pub cut_log: Vec<Cut>,
}

impl Stats {
    pub fn total_cuts(&self) -> u64 {
        self.cuts.iter().sum()
    }

    pub fn cuts_of(&self, kind: CutKind) -> u64 {
        self.cuts[CutKind::ALL.iter().position(|&k| k == kind).unwrap()]
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    pub best: Option<Incumbent>,
    pub dual_bound: Option<i128>,
    pub stats: Stats,
}

/// Rounds a candidate over engine variables and evaluates the original
/// instance exactly. AND values are recomputed from the original variables.
pub fn check_solution(problem: &EngineProblem, candidate: &[f64], provenance: Provenance) -> Option<Incumbent> {
    let x: Vec<bool> = candidate[..problem.n_orig].iter().map(|&v| v >= 0.5).collect();
    instance_cost(&problem.original, &x).map(|objective| Incumbent {
        x,
        objective,
        provenance,
    })
}

/// Incumbent shared between portfolio threads.
#[derive(Debug, Default)]
pub struct Mailbox {
    best: Mutex<Option<Incumbent>>,
}

impl Mailbox {
    pub fn offer(&self, inc: &Incumbent) {
        let mut b = self.best.lock().unwrap();
        if b.as_ref().is_none_or(|c| inc.objective < c.objective) {
            *b = Some(inc.clone());
        }
    }

    pub fn best(&self) -> Option<Incumbent> {
        self.best.lock().unwrap().clone()
    }
}

#[derive(Debug, Clone)]
struct Node {
    decisions: Vec<Lit>,
    /// Lower bound on the objective in this subtree.
    bound: f64,
    seq: u64,
}

struct Queued {
    key: (f64, usize),
    node: Node,
    dfs: bool,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    /// Max-heap order: the node to pop next compares greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        if self.dfs {
            return self.node.seq.cmp(&other.node.seq);
        }
        other
            .key
            .0
            .total_cmp(&self.key.0)
            .then(self.key.1.cmp(&other.key.1))
            .then(self.node.seq.cmp(&other.node.seq))
    }
}

enum SyncOutcome {
    Ready,
    Pruned,
    Exhausted,
}

struct LpState {
    model: LpModel,
    slot_start: usize,
    /// `(indicator index, row index)` of every slot.
    slots: Vec<(usize, usize)>,
    base_rows: usize,
    max_cut_rows: usize,
    every_node: bool,
}

struct Solver<'a> {
    p: &'a EngineProblem,
    cfg: &'a Config,
    db: ConstraintDb,
    trail: Trail,
    analyzer: Analyzer,
    /// Decision of each open level (implied decisions open empty levels).
    cur: Vec<Lit>,
    sym: Option<SymmetryHandler>,
    lp: Option<LpState>,
    hyper: Hypergraph,
    table: ProductTable,
    factor_vars: Vec<Var>,
    rlt_rows: Vec<NormConstraint>,
    activity: Vec<f64>,
    act_inc: f64,
    incumbent: Option<Incumbent>,
    pending_cutoff: bool,
    queue: BinaryHeap<Queued>,
    plunge: Option<Node>,
    plunge_len: u32,
    seq: u64,
    dfs: bool,
    stats: Stats,
    start: Instant,
    restarts_done: u32,
    fixed_at_restart: usize,
    y_fixed_at_restart: bool,
    mailbox: Option<Arc<Mailbox>>,
    fj_seed: u64,
    sat_found: bool,
    exhausted: bool,
}

impl<'a> Solver<'a> {
    fn new(p: &'a EngineProblem, cfg: &'a Config, mailbox: Option<Arc<Mailbox>>) -> Solver<'a> {
        let n = p.n_total;
        let mut activity = vec![0.0; n];
        for r in p.all_rows() {
            for (_, l) in r.terms {
                activity[l.var()] += 1e-3;
            }
        }
        let mut factor_vars: Vec<Var> = p.and_defs.iter().flat_map(|d| d.operands.iter().copied()).collect();
        factor_vars.sort_unstable();
        factor_vars.dedup();
        let optimize = p.original.is_optimization();
        Solver {
            p,
            cfg,
            db: ConstraintDb::new(n),
            trail: Trail::new(n),
            analyzer: Analyzer::new(n),
            cur: Vec::new(),
            sym: None,
            lp: None,
            hyper: build_hypergraph(&p.and_defs),
            table: build_product_table(&p.and_defs),
            factor_vars,
            rlt_rows: p.hard[..p.n_constraint_rows].to_vec(),
            activity,
            act_inc: 1.0,
            incumbent: None,
            pending_cutoff: false,
            queue: BinaryHeap::new(),
            plunge: None,
            plunge_len: 0,
            seq: 0,
            dfs: cfg.mode == Mode::SatLike || !optimize,
            stats: Stats::default(),
            start: Instant::now(),
            restarts_done: 0,
            fixed_at_restart: 0,
            y_fixed_at_restart: false,
            mailbox,
            fj_seed: cfg.seed,
            sat_found: false,
            exhausted: false,
        }
    }

    fn optimize(&self) -> bool {
        self.p.original.is_optimization()
    }

    fn out_of_budget(&self) -> bool {
        if let Some(t) = self.cfg.time_limit {
            if self.start.elapsed() >= t {
                return true;
            }
        }
        if let Some(n) = self.cfg.node_limit {
            if self.stats.nodes >= n {
                return true;
            }
        }
        self.cfg.stop.as_ref().is_some_and(|s| s.load(AtomicOrdering::Relaxed))
    }

    fn propagate_all(&mut self) -> Option<RowRef> {
        loop {
            if let Some(c) = self.db.propagate(&mut self.trail) {
                return Some(c);
            }
            match self.sym.as_mut().map(|s| s.propagate(&mut self.trail)) {
                Some(Err(c)) => return Some(c),
                Some(Ok(true)) => continue,
                _ => return None,
            }
        }
    }

    fn backtrack(&mut self, level: u32) {
        self.trail.backtrack_to(level);
        self.cur.truncate(level as usize);
    }

    fn bump_var(&mut self, v: Var) {
        self.activity[v] += self.act_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.act_inc *= 1e-100;
        }
    }

    /// Resolves a conflict. Returns false when the search space is empty.
    fn handle_conflict(&mut self, mut conflict: RowRef) -> bool {
        loop {
            self.stats.conflicts += 1;
            if self.trail.decision_level() == 0 {
                return false;
            }
            if !self.cfg.conflict_pb {
                let lvl = self.trail.decision_level() - 1;
                self.backtrack(lvl);
                return true;
            }
            let analysis = self.analyzer.analyze(&self.db, &self.trail, conflict, true);
            let learned = match analysis {
                Analysis::Unsat => return false,
                Analysis::Learned(l) => l,
            };
            self.stats.learned += 1;
            if learned.clause {
                self.stats.clause_fallbacks += 1;
            }
            for &i in &learned.used {
                self.db.bump(i);
            }
            self.db.decay();
            for &(_, l) in &learned.row.terms {
                self.bump_var(l.var());
            }
            self.act_inc /= 0.95;
            if self.cfg.record_learned {
                let cutoff = self.incumbent.as_ref().map(|i| i.objective);
                self.stats.learned_log.push((learned.row.clone(), cutoff));
            }
            self.backtrack(learned.backjump);
            let before = self.trail.len();
            match self.db.add_row(learned.row, true, &mut self.trail) {
                Err(c) => {
                    conflict = c;
                    continue;
                }
                Ok(_) => {
                    if self.trail.len() == before {
                        self.stats.non_assertive += 1;
                        debug_assert!(false, "learned row does not propagate after backjump");
                    }
                }
            }
            match self.propagate_all() {
                Some(c) => conflict = c,
                None => return true,
            }
        }
    }

    fn cutoff_row(&self, best: i128) -> Result<Option<NormConstraint>, ()> {
        let Some(obj) = &self.p.objective else {
            return Ok(None);
        };
        // offset + sum c x <= best - 1
        let Ok(rhs) = i64::try_from(obj.offset as i128 - best + 1) else {
            return Ok(None);
        };
        let lin: Vec<(i64, Var)> = obj
            .coefs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(v, &c)| (-c, v))
            .collect();
        match normalize(&lin, Relation::Ge, rhs).into_iter().next() {
            None => Ok(None),
            Some(r) if r.is_infeasible() => Err(()),
            Some(r) => Ok(Some(r)),
        }
    }

    /// Installs the cutoff for the current incumbent. Returns false when no
    /// better solution can exist.
    fn apply_cutoff(&mut self) -> bool {
        if !self.pending_cutoff {
            return true;
        }
        self.pending_cutoff = false;
        let Some(best) = self.incumbent.as_ref().map(|i| i.objective) else {
            return true;
        };
        match self.cutoff_row(best) {
            Err(()) => false,
            Ok(None) => true,
            Ok(Some(row)) => match self.db.set_cutoff(row, &mut self.trail) {
                Err(c) => self.handle_conflict(c),
                Ok(_) => match self.propagate_all() {
                    Some(c) => self.handle_conflict(c),
                    None => true,
                },
            },
        }
    }

    fn adopt_shared(&mut self) {
        let Some(mb) = &self.mailbox else { return };
        if let Some(inc) = mb.best() {
            if self.incumbent.as_ref().is_none_or(|c| inc.objective < c.objective)
                && instance_cost(&self.p.original, &inc.x) == Some(inc.objective)
            {
                self.incumbent = Some(Incumbent {
                    provenance: Provenance::Shared,
                    ..inc
                });
                self.pending_cutoff = true;
                if !self.optimize() {
                    self.sat_found = true;
                }
            }
        }
    }

    /// Offers a candidate; it is kept only if it passes the exact check and
    /// improves the incumbent.
    fn offer(&mut self, candidate: &[f64], provenance: Provenance) -> bool {
        let Some(inc) = check_solution(self.p, candidate, provenance) else {
            self.stats.rejected_candidates += 1;
            return false;
        };
        if self.incumbent.as_ref().is_some_and(|c| inc.objective >= c.objective) {
            return false;
        }
        self.stats.incumbents += 1;
        log::debug!("incumbent {} from {:?} after {} nodes", inc.objective, provenance, self.stats.nodes);
        if let Some(o) = &self.cfg.observer {
            (o.0)(inc.objective);
        }
        if let Some(mb) = &self.mailbox {
            mb.offer(&inc);
        }
        self.incumbent = Some(inc);
        self.pending_cutoff = true;
        if !self.optimize() {
            self.sat_found = true;
        }
        true
    }

    fn run_fj(&mut self, initial: Option<Vec<bool>>, budget: Duration, stall: u64) {
        let cfg = FjConfig {
            seed: self.fj_seed,
            max_flips: 200_000,
            stall_limit: stall,
            time_limit: Some(budget),
            record_trace: false,
        };
        self.fj_seed = self.fj_seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let res = fj_run(self.p, &cfg, initial.as_deref());
        self.stats.fj_flips += res.flips;
        if let Some((x, _)) = res.best {
            let xf: Vec<f64> = x.iter().map(|&b| b as u8 as f64).collect();
            if self.offer(&xf, Provenance::FJump) {
                self.stats.fj_solutions += 1;
            }
        }
    }

    fn fj_budget(&self) -> Duration {
        let cap = Duration::from_secs(10);
        match self.cfg.time_limit {
            Some(t) => cap.min(t / 10),
            None => cap,
        }
    }

    /// Root setup. Returns false when the problem is infeasible at level 0.
    fn init(&mut self) -> bool {
        for r in self.p.all_rows() {
            if self.db.add_row(r, false, &mut self.trail).is_err() {
                return false;
            }
        }
        if self.db.propagate(&mut self.trail).is_some() {
            return false;
        }
        if self.cfg.symmetry {
            let det = detect(self.p, self.cfg.sym_node_limit);
            self.stats.sym_nodes = det.nodes;
            if let Some(h) = SymmetryHandler::new(det.generators) {
                // fixings implied by the rows alone, before any lex reasoning
                let fixed: Vec<Lit> = self.trail.lits().to_vec();
                self.sym = Some(h);
                if self.propagate_all().is_some() {
                    return false;
                }
                let sym = self.sym.as_mut().unwrap();
                if sym.orbital_fixing(&fixed, &mut self.trail).is_err() || self.propagate_all().is_some() {
                    return false;
                }
            }
        }
        if self.cfg.fjump {
            let stall = if self.cfg.mode == Mode::AggressiveHeur { 50_000 } else { 10_000 };
            self.run_fj(None, self.fj_budget(), stall);
            if !self.apply_cutoff() {
                return false;
            }
        }
        self.setup_lp();
        self.fixed_at_restart = self.trail.len();
        true
    }

    fn setup_lp(&mut self) {
        let p = self.p;
        let n = p.n_total;
        let m0 = p.hard.len() + p.indicators.iter().map(|i| i.rows.len()).sum::<usize>();
        let work = (m0 as f64).powi(2) * (n + m0) as f64;
        if work > LP_ROOT_BUDGET {
            return;
        }
        let obj = p
            .objective
            .as_ref()
            .map_or_else(|| vec![0.0; n], |o| o.coefs.iter().map(|&c| c as f64).collect());
        let mut model = LpModel::new(obj);
        for r in &p.hard {
            let (coefs, rhs) = r.to_linear();
            model.add_int_row(&coefs, rhs);
        }
        let slot_start = model.n_rows();
        let mut slots = Vec::new();
        for (i, ind) in p.indicators.iter().enumerate() {
            for r in 0..ind.rows.len() {
                model.push_row(LpRow {
                    coefs: Vec::new(),
                    rhs: 0.0,
                });
                slots.push((i, r));
            }
        }
        let base_rows = model.n_rows();
        self.lp = Some(LpState {
            model,
            slot_start,
            slots,
            base_rows,
            max_cut_rows: (2 * (n + base_rows)).clamp(50, 1000),
            every_node: work <= LP_NODE_BUDGET,
        });
        self.stats.lp_enabled = true;
    }

    /// Node-local bounds and indicator rows. Returns, per indicator, whether
    /// its big-M row was skipped for exceeding the cap.
    fn load_node_lp(&mut self) -> Vec<bool> {
        let p = self.p;
        let trail = &self.trail;
        let mcap = self.cfg.mcap;
        let lp = self.lp.as_mut().unwrap();
        for v in 0..p.n_total {
            match trail.var_value(v) {
                Some(b) => {
                    let x = b as u8 as f64;
                    lp.model.set_bounds(v, x, x);
                }
                None => lp.model.set_bounds(v, 0.0, 1.0),
            }
        }
        let mut flagged = vec![false; p.indicators.len()];
        for (k, &(i, r)) in lp.slots.iter().enumerate() {
            let ind = &p.indicators[i];
            let row = &ind.rows[r];
            let (mut coefs, mut rhs) = row.to_linear();
            let lp_row = match trail.var_value(ind.y) {
                Some(false) => None,
                Some(true) => Some((coefs, rhs)),
                None => {
                    let min_act: i128 = row
                        .terms
                        .iter()
                        .filter(|t| trail.is_true(t.1))
                        .map(|t| t.0 as i128)
                        .sum();
                    let big_m = row.degree as i128 - min_act;
                    if big_m <= 0 {
                        None
                    } else if big_m > mcap as i128 {
                        flagged[i] = true;
                        None
                    } else {
                        // sum a l + M (1 - y) >= d
                        coefs.push((ind.y, -(big_m as i64)));
                        rhs -= big_m as i64;
                        Some((coefs, rhs))
                    }
                }
            };
            let row = match lp_row {
                None => LpRow {
                    coefs: Vec::new(),
                    rhs: 0.0,
                },
                Some((c, r)) => LpRow {
                    coefs: c.into_iter().map(|(v, a)| (v, a as f64)).collect(),
                    rhs: r as f64,
                },
            };
            lp.model.replace_row(lp.slot_start + k, row);
        }
        flagged
    }

    fn solve_lp(&mut self) -> (LpStatus, Vec<f64>, f64) {
        let lp = self.lp.as_mut().unwrap();
        let limit = 50 * (lp.model.n_rows() + lp.model.n_cols()) + 1000;
        let sol = lp_solve(&mut lp.model, limit);
        self.stats.lp_solves += 1;
        self.stats.lp_iterations += sol.iterations as u64;
        let offset = self.p.objective.as_ref().map_or(0, |o| o.offset) as f64;
        (sol.status, sol.x, sol.objective + offset)
    }

    fn separate(&mut self, x: &[f64]) -> Vec<Cut> {
        let max = self.cfg.max_cuts;
        let mut cuts: Vec<(f64, Cut)> = Vec::new();
        if self.cfg.flower && !self.hyper.is_empty() {
            for k in [1, 2] {
                let fc = separate_flower(&self.hyper, x, k, max);
                cuts.extend(fc.violations.into_iter().zip(fc.cuts));
            }
        }
        if self.cfg.rlt && !self.table.is_empty() {
            for c in separate_rlt_round(&self.rlt_rows, &self.factor_vars, &self.table, x, max) {
                cuts.push((c.violation(x), c));
            }
        }
        cuts.sort_by(|a, b| b.0.total_cmp(&a.0));
        cuts.truncate(max);
        cuts.into_iter().map(|(_, c)| c).collect()
    }

    fn add_cuts(&mut self, cuts: &[Cut]) -> usize {
        let lp = self.lp.as_mut().unwrap();
        let room = (lp.base_rows + lp.max_cut_rows).saturating_sub(lp.model.n_rows());
        let cuts = &cuts[..cuts.len().min(room)];
        let mut added = 0;
        for c in cuts {
            if add_rows(&mut lp.model, std::slice::from_ref(c)).added == 1 {
                added += 1;
                let k = CutKind::ALL.iter().position(|&k| k == c.kind).unwrap();
                self.stats.cuts[k] += 1;
                if self.cfg.record_cuts {
                    self.stats.cut_log.push(c.clone());
                }
            }
        }
        added
    }

    fn pruned(&self, bound: f64) -> bool {
        self.incumbent.as_ref().is_some_and(|inc| {
            let b = (bound - self.cfg.ftol).ceil();
            b.is_finite() && b >= inc.objective as f64
        })
    }

    fn is_integral(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v.min(1.0 - v).abs() <= self.cfg.ftol)
    }

    fn sync(&mut self, decisions: &[Lit]) -> SyncOutcome {
        let common = self
            .cur
            .iter()
            .zip(decisions)
            .take_while(|(a, b)| a == b)
            .count()
            .min(self.trail.decision_level() as usize);
        self.backtrack(common as u32);
        self.adopt_shared();
        if !self.apply_cutoff() {
            return SyncOutcome::Exhausted;
        }
        while self.cur.len() < decisions.len() {
            let d = decisions[self.cur.len()];
            match self.trail.lit_value(d) {
                Some(false) => return SyncOutcome::Pruned,
                Some(true) => self.trail.new_level(),
                None => self.trail.decide(d),
            }
            self.cur.push(d);
            if let Some(c) = self.propagate_all() {
                return if self.handle_conflict(c) {
                    SyncOutcome::Pruned
                } else {
                    SyncOutcome::Exhausted
                };
            }
        }
        SyncOutcome::Ready
    }

    fn choose_branch(&self, x: Option<&[f64]>, flagged: &[bool]) -> Option<Var> {
        let p = self.p;
        let tol = self.cfg.ftol;
        if let Some(x) = x {
            let mut best: Option<(f64, Var)> = None;
            for (i, ind) in p.indicators.iter().enumerate() {
                if self.trail.var_value(ind.y).is_some() {
                    continue;
                }
                let viol = ind
                    .rows
                    .iter()
                    .map(|r| r.degree as f64 - r.lp_activity(x))
                    .fold(0.0, f64::max);
                let score = if flagged[i] { viol.max(tol) + 1.0 } else { viol };
                if (flagged[i] || (viol > tol && x[ind.y] > tol)) && best.is_none_or(|b| score > b.0) {
                    best = Some((score, ind.y));
                }
            }
            if let Some((_, y)) = best {
                return Some(y);
            }
            let mut best: Option<(f64, Var)> = None;
            for v in 0..p.n_total {
                let f = x[v].min(1.0 - x[v]);
                if f > tol && self.trail.var_value(v).is_none() && best.is_none_or(|b| f > b.0) {
                    best = Some((f, v));
                }
            }
            if let Some((_, v)) = best {
                return Some(v);
            }
        }
        let mut best: Option<(f64, Var)> = None;
        for v in 0..p.n_total {
            if self.trail.var_value(v).is_none() && best.is_none_or(|b| self.activity[v] > b.0) {
                best = Some((self.activity[v], v));
            }
        }
        best.map(|b| b.1)
    }

    fn push(&mut self, node: Node) {
        let key = (node.bound, node.decisions.len());
        self.queue.push(Queued {
            key,
            node,
            dfs: self.dfs,
        });
    }

    fn child(&mut self, parent: &[Lit], lit: Lit, bound: f64) -> Node {
        self.seq += 1;
        let mut decisions = parent.to_vec();
        decisions.push(lit);
        Node {
            decisions,
            bound,
            seq: self.seq,
        }
    }

    fn use_lp_at(&self, depth: usize) -> bool {
        match &self.lp {
            None => false,
            Some(lp) => depth == 0 || (!self.dfs && lp.every_node),
        }
    }

    /// Processes one node. Returns false when the search is over.
    fn process(&mut self, node: Node) -> bool {
        if self.pruned(node.bound) {
            return true;
        }
        match self.sync(&node.decisions) {
            SyncOutcome::Exhausted => {
                self.exhausted = true;
                return false;
            }
            SyncOutcome::Pruned => return true,
            SyncOutcome::Ready => {}
        }
        if self.sat_found {
            return false;
        }
        let depth = node.decisions.len();
        self.stats.max_depth = self.stats.max_depth.max(depth as u32);
        if self.trail.is_complete() {
            let x = self.trail.values_f64();
            self.offer(&x, Provenance::NodeIntegral);
            return !self.sat_found;
        }
        let mut bound = node.bound;
        let mut lp_x: Option<Vec<f64>> = None;
        let mut flagged = vec![false; self.p.indicators.len()];
        if self.use_lp_at(depth) {
            flagged = self.load_node_lp();
            let (mut status, mut x, mut obj) = self.solve_lp();
            if status == LpStatus::Optimal && depth as u32 % self.cfg.cut_freq == 0 {
                let rounds = if depth == 0 { self.cfg.root_cut_rounds } else { 1 };
                for _ in 0..rounds {
                    if self.pruned(obj) || self.is_integral(&x) {
                        break;
                    }
                    let cuts = self.separate(&x);
                    if cuts.is_empty() || self.add_cuts(&cuts) == 0 {
                        break;
                    }
                    (status, x, obj) = self.solve_lp();
                    if status != LpStatus::Optimal {
                        break;
                    }
                }
            }
            match status {
                LpStatus::Infeasible => {
                    self.stats.lp_infeasible += 1;
                    return true;
                }
                LpStatus::IterationLimit => {}
                LpStatus::Optimal => {
                    bound = bound.max(obj);
                    if self.pruned(bound) {
                        return true;
                    }
                    let integral = self.is_integral(&x);
                    if self.offer(&x, Provenance::LpRounding) && self.optimize() {
                        self.after_incumbent();
                    }
                    if self.sat_found {
                        return false;
                    }
                    if integral && check_solution(self.p, &x, Provenance::NodeIntegral).is_some() {
                        // the relaxation optimum is attained in this subtree
                        return true;
                    }
                    lp_x = Some(x);
                }
            }
        }
        let Some(v) = self.choose_branch(lp_x.as_deref(), &flagged) else {
            return true;
        };
        let one = self.child(&node.decisions, Lit::pos(v), bound);
        let zero = self.child(&node.decisions, Lit::neg(v), bound);
        if self.dfs || self.plunge_len < PLUNGE_DEPTH {
            self.plunge_len += 1;
            self.push(zero);
            self.plunge = Some(one);
        } else {
            self.plunge_len = 0;
            self.push(one);
            self.push(zero);
        }
        true
    }

    fn after_incumbent(&mut self) {
        if !self.cfg.fjump {
            return;
        }
        let Some(inc) = &self.incumbent else { return };
        if inc.provenance == Provenance::FJump {
            return;
        }
        let x = self.p.complete(&inc.x);
        let stall = if self.cfg.mode == Mode::AggressiveHeur { 20_000 } else { 2_000 };
        self.run_fj(Some(x), Duration::from_secs(1), stall);
    }

    fn maybe_restart(&mut self) -> bool {
        if !self.cfg.restarts || self.restarts_done >= MAX_RESTARTS || self.trail.decision_level() > 0 && self.plunge.is_some() {
            return false;
        }
        let fixed = self.trail.n_root_fixed();
        let n = self.p.n_total;
        let y_fixed = !self.p.indicators.is_empty()
            && self.p.indicators.iter().all(|i| {
                self.trail.var_value(i.y).is_some() && (self.trail.decision_level() == 0 || self.trail.level(i.y) == 0)
            });
        let grew = (fixed - self.fixed_at_restart.min(fixed)) * 5 >= n && fixed > self.fixed_at_restart;
        if !(grew || (y_fixed && !self.y_fixed_at_restart)) {
            return false;
        }
        self.backtrack(0);
        self.db.purge_learned(2, &mut self.trail);
        self.queue.clear();
        self.plunge = None;
        self.plunge_len = 0;
        self.restarts_done += 1;
        self.stats.restarts += 1;
        log::debug!("restart {} with {} root fixings", self.restarts_done, fixed);
        self.fixed_at_restart = self.trail.n_root_fixed();
        self.y_fixed_at_restart = y_fixed;
        self.seq += 1;
        self.plunge = Some(Node {
            decisions: Vec::new(),
            bound: f64::NEG_INFINITY,
            seq: self.seq,
        });
        true
    }

    fn open_bound(&self) -> f64 {
        self.queue
            .iter()
            .map(|q| q.node.bound)
            .chain(self.plunge.iter().map(|n| n.bound))
            .fold(f64::INFINITY, f64::min)
    }

    fn run(mut self) -> SolveResult {
        let mut finished = false;
        if !self.init() {
            self.exhausted = true;
            finished = true;
        } else if !self.sat_found {
            self.plunge = Some(Node {
                decisions: Vec::new(),
                bound: f64::NEG_INFINITY,
                seq: 0,
            });
            loop {
                if self.out_of_budget() {
                    break;
                }
                let node = match self.plunge.take() {
                    Some(n) => n,
                    None => {
                        self.plunge_len = 0;
                        if self.maybe_restart() {
                            continue;
                        }
                        match self.queue.pop() {
                            Some(q) => q.node,
                            None => {
                                finished = true;
                                break;
                            }
                        }
                    }
                };
                self.stats.nodes += 1;
                if !self.process(node) {
                    finished = self.exhausted;
                    break;
                }
            }
        }
        if self.sat_found {
            finished = false;
        }
        self.stats.propagations = self.db.stats.propagations;
        if let Some(s) = &self.sym {
            self.stats.sym = s.stats;
        }
        let optimize = self.optimize();
        let status = match (&self.incumbent, finished, optimize) {
            (Some(_), true, true) => Status::OptimumFound,
            (Some(_), _, _) => Status::Satisfiable,
            (None, true, _) => Status::Unsatisfiable,
            (None, false, _) => Status::Unknown,
        };
        let dual_bound = if finished {
            self.incumbent.as_ref().map(|i| i.objective)
        } else {
            let b = self.open_bound();
            b.is_finite().then(|| (b - self.cfg.ftol).ceil() as i128)
        };
        SolveResult {
            status,
            best: self.incumbent,
            dual_bound,
            stats: self.stats,
        }
    }
}

/// Solves a linearized problem with one solver thread.
pub fn solve_problem(p: &EngineProblem, cfg: &Config) -> SolveResult {
    Solver::new(p, cfg, None).run()
}

/// Parses nothing, linearizes and solves; portfolio mode when configured.
pub fn solve(inst: &Instance, cfg: &Config) -> SolveResult {
    let p = match linearize(inst) {
        Ok(p) => p,
        Err(_) => {
            return SolveResult {
                status: Status::Unsatisfiable,
                best: None,
                dual_bound: None,
                stats: Stats::default(),
            }
        }
    };
    if cfg.portfolio > 1 {
        solve_portfolio(&p, cfg)
    } else {
        solve_problem(&p, cfg)
    }
}

/// Runs `cfg.portfolio` independent solvers that share incumbents and stop
/// as soon as one of them finishes.
pub fn solve_portfolio(p: &EngineProblem, cfg: &Config) -> SolveResult {
    let k = cfg.portfolio.max(1);
    let stop = cfg.stop.clone().unwrap_or_default();
    let mailbox = Arc::new(Mailbox::default());
    let configs: Vec<Config> = (0..k)
        .map(|i| {
            let mode = match i % 3 {
                0 => cfg.mode,
                1 => Mode::AggressiveHeur,
                _ => Mode::SatLike,
            };
            Config {
                mode,
                seed: cfg.seed.wrapping_add(1000 * i as u64),
                portfolio: 0,
                stop: Some(stop.clone()),
                ..cfg.clone()
            }
        })
        .collect();
    let results: Vec<SolveResult> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                let mb = mailbox.clone();
                let stop = stop.clone();
                s.spawn(move || {
                    let r = Solver::new(p, c, Some(mb)).run();
                    if r.status != Status::Unknown && (r.status != Status::Satisfiable || !p.original.is_optimization()) {
                        stop.store(true, AtomicOrdering::Relaxed);
                    }
                    r
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let best = mailbox.best();
    let definitive = results
        .iter()
        .find(|r| matches!(r.status, Status::OptimumFound | Status::Unsatisfiable))
        .or_else(|| results.iter().find(|r| r.status == Status::Satisfiable))
        .unwrap_or(&results[0]);
    let mut stats = definitive.stats.clone();
    stats.nodes = results.iter().map(|r| r.stats.nodes).sum();
    let status = match definitive.status {
        Status::Unsatisfiable if best.is_some() => Status::OptimumFound,
        Status::Unknown if best.is_some() => Status::Satisfiable,
        s => s,
    };
    SolveResult {
        status,
        dual_bound: if status == Status::OptimumFound {
            best.as_ref().map(|b| b.objective)
        } else {
            definitive.dual_bound
        },
        best,
        stats,
    }
}

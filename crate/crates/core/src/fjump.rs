//! Feasibility Jump: weighted local search over the engine rows with exact
//! integer activities. Once a solution is known the objective becomes an
//! extra row demanding a strict improvement.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lit::Var;
use crate::model::{normalize, EngineProblem, NormConstraint};
use crate::opb::Relation;

#[derive(Debug, Clone)]
pub struct FjConfig {
    pub seed: u64,
    pub max_flips: u64,
    /// Flips without a new best violation count or solution before giving up.
    pub stall_limit: u64,
    pub time_limit: Option<Duration>,
    pub record_trace: bool,
}

impl Default for FjConfig {
    fn default() -> Self {
        FjConfig {
            seed: 0,
            max_flips: 200_000,
            stall_limit: 20_000,
            time_limit: None,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FjResult {
    /// Best verified solution over engine variables and its objective.
    pub best: Option<(Vec<bool>, i128)>,
    pub solutions: u64,
    pub flips: u64,
    pub weight_bumps: u64,
    /// Flipped variables in order, when requested.
    pub trace: Vec<u32>,
}

struct State<'a> {
    rows: Vec<NormConstraint>,
    n_base: usize,
    cols: Vec<Vec<(usize, i64, bool)>>,
    x: Vec<bool>,
    act: Vec<i128>,
    weight: Vec<i128>,
    score: Vec<i128>,
    good: Vec<Var>,
    good_pos: Vec<usize>,
    violated: Vec<usize>,
    violated_pos: Vec<usize>,
    problem: &'a EngineProblem,
}

const NONE: usize = usize::MAX;

impl<'a> State<'a> {
    fn new(problem: &'a EngineProblem, x: Vec<bool>) -> State<'a> {
        let rows = problem.all_rows();
        let n_base = rows.len();
        let mut s = State {
            rows,
            n_base,
            cols: Vec::new(),
            x,
            act: Vec::new(),
            weight: Vec::new(),
            score: Vec::new(),
            good: Vec::new(),
            good_pos: Vec::new(),
            violated: Vec::new(),
            violated_pos: Vec::new(),
            problem,
        };
        s.weight = vec![1; s.rows.len()];
        s.rebuild();
        s
    }

    /// Recomputes every derived quantity from `rows`, `x` and `weight`.
    fn rebuild(&mut self) {
        let n = self.x.len();
        let m = self.rows.len();
        self.weight.resize(m, 1);
        self.cols = vec![Vec::new(); n];
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, l) in &r.terms {
                self.cols[l.var()].push((i, c, l.is_neg()));
            }
        }
        self.act = self.rows.iter().map(|r| r.activity(&self.x)).collect();
        self.violated.clear();
        self.violated_pos = vec![NONE; m];
        for i in 0..m {
            if self.act[i] < self.rows[i].degree as i128 {
                self.violated_pos[i] = self.violated.len();
                self.violated.push(i);
            }
        }
        self.score = vec![0; n];
        for i in 0..m {
            self.add_row_scores(i, 1);
        }
        self.good.clear();
        self.good_pos = vec![NONE; n];
        for v in 0..n {
            self.refresh_good(v);
        }
    }

    fn viol(&self, i: usize, act: i128) -> i128 {
        (self.rows[i].degree as i128 - act).max(0)
    }

    /// Activity change of row term `(c, neg)` when its variable flips.
    fn delta(&self, v: Var, c: i64, neg: bool) -> i128 {
        let lit_true = self.x[v] != neg;
        if lit_true {
            -(c as i128)
        } else {
            c as i128
        }
    }

    fn add_row_scores(&mut self, i: usize, sign: i128) {
        let base = self.viol(i, self.act[i]);
        let w = self.weight[i] * sign;
        for t in 0..self.rows[i].terms.len() {
            let (c, l) = self.rows[i].terms[t];
            let after = self.viol(i, self.act[i] + self.delta(l.var(), c, l.is_neg()));
            self.score[l.var()] += w * (base - after);
        }
    }

    fn refresh_good(&mut self, v: Var) {
        let is_good = self.score[v] > 0;
        let pos = self.good_pos[v];
        if is_good && pos == NONE {
            self.good_pos[v] = self.good.len();
            self.good.push(v);
        } else if !is_good && pos != NONE {
            let last = *self.good.last().unwrap();
            self.good.swap_remove(pos);
            if last != v {
                self.good_pos[last] = pos;
            }
            self.good_pos[v] = NONE;
        }
    }

    fn set_violated(&mut self, i: usize) {
        let is_v = self.act[i] < self.rows[i].degree as i128;
        let pos = self.violated_pos[i];
        if is_v && pos == NONE {
            self.violated_pos[i] = self.violated.len();
            self.violated.push(i);
        } else if !is_v && pos != NONE {
            let last = *self.violated.last().unwrap();
            self.violated.swap_remove(pos);
            if last != i {
                self.violated_pos[last] = pos;
            }
            self.violated_pos[i] = NONE;
        }
    }

    fn flip(&mut self, v: Var) {
        let col = std::mem::take(&mut self.cols[v]);
        for &(i, _, _) in &col {
            self.add_row_scores(i, -1);
        }
        for &(i, c, neg) in &col {
            self.act[i] += self.delta(v, c, neg);
        }
        self.x[v] = !self.x[v];
        self.cols[v] = col;
        let rows: Vec<usize> = self.cols[v].iter().map(|t| t.0).collect();
        for &i in &rows {
            self.add_row_scores(i, 1);
            self.set_violated(i);
        }
        for &i in &rows {
            for t in 0..self.rows[i].terms.len() {
                let u = self.rows[i].terms[t].1.var();
                self.refresh_good(u);
            }
        }
    }

    fn bump_weights(&mut self) {
        let viol = self.violated.clone();
        for &i in &viol {
            self.weight[i] += 1;
            // scores are linear in the weight: add one unit of the row
            let w = self.weight[i];
            self.weight[i] = 1;
            self.add_row_scores(i, 1);
            self.weight[i] = w;
        }
        for &i in &viol {
            for t in 0..self.rows[i].terms.len() {
                let u = self.rows[i].terms[t].1.var();
                self.refresh_good(u);
            }
        }
    }

    /// Demands an objective strictly below `best`. Returns false when no
    /// assignment can improve.
    fn set_objective_bound(&mut self, best: i128) -> bool {
        self.rows.truncate(self.n_base);
        self.weight.truncate(self.n_base);
        let Some(obj) = &self.problem.objective else {
            return false;
        };
        // offset + sum c x <= best - 1  <=>  sum -c x >= offset - best + 1
        let Ok(rhs) = i64::try_from(obj.offset as i128 - best + 1) else {
            return true;
        };
        let lin: Vec<(i64, Var)> = obj
            .coefs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(v, &c)| (-c, v))
            .collect();
        for r in normalize(&lin, Relation::Ge, rhs) {
            if r.is_infeasible() {
                return false;
            }
            self.rows.push(r);
        }
        self.rebuild();
        true
    }
}

/// Runs the local search from `initial` (all false when absent).
pub fn fj_run(problem: &EngineProblem, cfg: &FjConfig, initial: Option<&[bool]>) -> FjResult {
    let start = Instant::now();
    let x0 = initial.map_or_else(|| vec![false; problem.n_total], |x| x.to_vec());
    let mut st = State::new(problem, x0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut res = FjResult::default();
    let mut best_viol = usize::MAX;
    let mut stall = 0u64;
    while res.flips < cfg.max_flips {
        if st.violated.is_empty() {
            let obj = problem.objective_value(&st.x);
            if problem.is_feasible(&st.x) && res.best.as_ref().is_none_or(|b| obj < b.1) {
                res.best = Some((st.x.clone(), obj));
                res.solutions += 1;
            }
            stall = 0;
            best_viol = usize::MAX;
            if !st.set_objective_bound(res.best.as_ref().map_or(obj, |b| b.1)) {
                break;
            }
            continue;
        }
        if st.violated.len() < best_viol {
            best_viol = st.violated.len();
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.stall_limit {
                break;
            }
        }
        if res.flips % 1024 == 0 {
            if let Some(t) = cfg.time_limit {
                if start.elapsed() >= t {
                    break;
                }
            }
        }
        if st.good.is_empty() {
            st.bump_weights();
            res.weight_bumps += 1;
        }
        let v = if st.good.is_empty() {
            let i = st.violated[rng.gen_range(0..st.violated.len())];
            let falses: Vec<Var> = st.rows[i]
                .terms
                .iter()
                .filter(|(_, l)| !l.eval(st.x[l.var()]))
                .map(|(_, l)| l.var())
                .collect();
            falses[rng.gen_range(0..falses.len())]
        } else {
            let top = st.good.iter().map(|&v| st.score[v]).max().unwrap();
            let mut ties: Vec<Var> = st.good.iter().copied().filter(|&v| st.score[v] == top).collect();
            ties.sort_unstable();
            ties[rng.gen_range(0..ties.len())]
        };
        st.flip(v);
        res.flips += 1;
        if cfg.record_trace {
            res.trace.push(v as u32);
        }
    }
    res
}

/// Weighted violation after flipping `v` minus the weighted violation
/// before, computed from scratch; negative means improving. The search keeps
/// the negation of this value incrementally.
pub fn fj_score(rows: &[NormConstraint], weights: &[i128], x: &[bool], v: Var) -> i128 {
    let mut y = x.to_vec();
    y[v] = !y[v];
    rows.iter()
        .zip(weights)
        .map(|(r, &w)| {
            let before = (r.degree as i128 - r.activity(x)).max(0);
            let after = (r.degree as i128 - r.activity(&y)).max(0);
            w * (after - before)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lit::Lit;
    use crate::model::linearize;
    use crate::opb::parse;

    #[test]
    fn incremental_scores_match_recomputation() {
        let inst = parse(b"min: +1 x1 -2 x3;\n+2 x1 +1 x2 +1 x3 >= 2;\n+1 x1 x2 -1 x4 >= 0;\n-1 x2 -1 x3 >= -1;").unwrap();
        let p = linearize(&inst).unwrap();
        let mut st = State::new(&p, vec![false; p.n_total]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for step in 0..50 {
            for v in 0..p.n_total {
                assert_eq!(st.score[v], -fj_score(&st.rows, &st.weight, &st.x, v), "step {step} var {v}");
            }
            if step % 7 == 3 {
                st.bump_weights();
            }
            st.flip(rng.gen_range(0..p.n_total));
        }
    }

    #[test]
    fn finds_optimum_of_small_instance() {
        let inst = parse(b"min: +3 x1 +2 x2 +4 x3;\n+1 x1 +1 x2 >= 1;\n+1 x2 +1 x3 >= 1;").unwrap();
        let p = linearize(&inst).unwrap();
        let r = fj_run(&p, &FjConfig::default(), None);
        let (x, obj) = r.best.unwrap();
        assert!(p.is_feasible(&x));
        assert_eq!(obj, 2);
    }

    #[test]
    fn same_seed_same_trace() {
        let inst = parse(b"+1 x1 +1 x2 +1 x3 >= 2;\n+1 ~x1 +1 ~x2 >= 1;\n+1 ~x2 +1 ~x3 >= 1;").unwrap();
        let p = linearize(&inst).unwrap();
        let cfg = FjConfig {
            seed: 11,
            record_trace: true,
            ..FjConfig::default()
        };
        assert_eq!(fj_run(&p, &cfg, None), fj_run(&p, &cfg, None));
    }

    #[test]
    fn single_row_score() {
        let row = NormConstraint {
            terms: vec![(1, Lit::pos(0))],
            degree: 1,
        };
        assert_eq!(fj_score(std::slice::from_ref(&row), &[1], &[false], 0), -1);
        assert_eq!(fj_score(std::slice::from_ref(&row), &[1], &[true], 0), 1);
    }

    #[test]
    fn reaches_only_model_in_few_flips() {
        // 2x1 + x2 >= 3 has the single model (1, 1); any start is at most two flips away
        let p = linearize(&parse(b"+2 x1 +1 x2 >= 3;").unwrap()).unwrap();
        for seed in 0..20 {
            for start in [[false, false], [true, false], [false, true]] {
                let cfg = FjConfig {
                    seed,
                    record_trace: true,
                    ..FjConfig::default()
                };
                let r = fj_run(&p, &cfg, Some(&start));
                assert_eq!(r.best.as_ref().unwrap().0, vec![true, true]);
                assert!(r.trace.len() <= 3, "{:?}", r.trace);
            }
        }
        let p = linearize(&parse(b"+1 x1 +1 x2 >= 1;").unwrap()).unwrap();
        let r = fj_run(&p, &FjConfig::default(), Some(&[false, false]));
        assert!(p.is_feasible(&r.best.unwrap().0));
    }
}

//! Random and structured instance generators used by tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::opb::{compute_intsize, Instance, Objective, PbConstraint, Relation, Term};

#[derive(Debug, Clone, Copy)]
pub struct GenParams {
    pub n_vars: usize,
    pub n_constraints: usize,
    pub max_coef: i64,
    /// Probability that a term is a product of two or three variables.
    pub nonlinear: f64,
    /// Probability that a constraint uses `=`.
    pub equality: f64,
    pub optimize: bool,
    pub wbo: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_vars: 8,
            n_constraints: 6,
            max_coef: 5,
            nonlinear: 0.0,
            equality: 0.1,
            optimize: true,
            wbo: false,
        }
    }
}

fn random_term<R: Rng>(rng: &mut R, n: usize, max_coef: i64, nonlinear: f64) -> Term {
    let coef = random_coef(rng, max_coef);
    let arity = if n >= 2 && rng.gen_bool(nonlinear) { rng.gen_range(2..=3.min(n)) } else { 1 };
    let mut vars: Vec<u32> = (1..=n as u32).collect::<Vec<_>>().choose_multiple(rng, arity).copied().collect();
    vars.sort_unstable();
    Term { coef, vars }
}

fn random_coef<R: Rng>(rng: &mut R, max: i64) -> i64 {
    let c = rng.gen_range(1..=max);
    if rng.gen_bool(0.3) {
        -c
    } else {
        c
    }
}

fn random_constraint<R: Rng>(rng: &mut R, p: &GenParams) -> PbConstraint {
    let len = rng.gen_range(2..=p.n_vars.clamp(2, 6));
    let terms: Vec<Term> = (0..len)
        .map(|_| random_term(rng, p.n_vars, p.max_coef, p.nonlinear))
        .collect();
    let pos: i64 = terms.iter().map(|t| t.coef.max(0)).sum();
    let neg: i64 = terms.iter().map(|t| t.coef.min(0)).sum();
    let relation = if rng.gen_bool(p.equality) { Relation::Eq } else { Relation::Ge };
    // mostly satisfiable thresholds, occasionally tight
    let hi = neg + (pos - neg) * 2 / 3;
    let rhs = rng.gen_range(neg..=hi.max(neg));
    PbConstraint {
        terms,
        relation,
        rhs,
        weight: None,
    }
}

/// A random instance. Variables appearing nowhere are allowed.
pub fn random_instance<R: Rng>(rng: &mut R, p: &GenParams) -> Instance {
    let mut constraints: Vec<PbConstraint> = (0..p.n_constraints).map(|_| random_constraint(rng, p)).collect();
    let mut inst = Instance {
        n_vars: p.n_vars,
        ..Instance::default()
    };
    if p.wbo {
        inst.is_wbo = true;
        for c in constraints.iter_mut() {
            if rng.gen_bool(0.6) {
                c.weight = Some(rng.gen_range(1..=10));
            }
        }
        if rng.gen_bool(0.3) {
            inst.top_cost = Some(rng.gen_range(5..=40));
        }
    } else if p.optimize {
        let len = rng.gen_range(1..=p.n_vars);
        let terms = (0..len)
            .map(|_| random_term(rng, p.n_vars, p.max_coef, p.nonlinear))
            .collect();
        inst.objective = Some(Objective { terms, offset: 0 });
    }
    inst.constraints = constraints;
    inst.intsize = compute_intsize(&inst);
    inst
}

fn linear(coef: i64, v: usize) -> Term {
    Term {
        coef,
        vars: vec![v as u32 + 1],
    }
}

fn ge(terms: Vec<Term>, rhs: i64) -> PbConstraint {
    PbConstraint {
        terms,
        relation: Relation::Ge,
        rhs,
        weight: None,
    }
}

/// Pigeons into holes: `x[p][h]` is variable `p * holes + h`. Unsatisfiable
/// when `pigeons > holes`.
pub fn pigeonhole(pigeons: usize, holes: usize) -> Instance {
    let var = |p: usize, h: usize| p * holes + h;
    let mut cs = Vec::new();
    for p in 0..pigeons {
        cs.push(ge((0..holes).map(|h| linear(1, var(p, h))).collect(), 1));
    }
    for h in 0..holes {
        cs.push(ge((0..pigeons).map(|p| linear(-1, var(p, h))).collect(), -1));
    }
    finish(pigeons * holes, None, cs)
}

/// Pigeonhole with pairwise at-most-one clauses per hole. Unlike the
/// cardinality form its LP relaxation stays feasible.
pub fn pigeonhole_pairwise(pigeons: usize, holes: usize) -> Instance {
    let var = |p: usize, h: usize| p * holes + h;
    let mut cs = Vec::new();
    for p in 0..pigeons {
        cs.push(ge((0..holes).map(|h| linear(1, var(p, h))).collect(), 1));
    }
    for h in 0..holes {
        for p in 0..pigeons {
            for q in p + 1..pigeons {
                cs.push(ge(vec![linear(-1, var(p, h)), linear(-1, var(q, h))], -1));
            }
        }
    }
    finish(pigeons * holes, None, cs)
}

fn finish(n_vars: usize, objective: Option<Objective>, constraints: Vec<PbConstraint>) -> Instance {
    let mut inst = Instance {
        n_vars,
        objective,
        constraints,
        ..Instance::default()
    };
    inst.intsize = compute_intsize(&inst);
    inst
}

/// Minimum vertex cover of a random graph whose vertices come in groups of
/// `group` interchangeable copies: every copy gets the same neighbours and
/// the same cost.
pub fn symmetric_cover<R: Rng>(rng: &mut R, groups: usize, group: usize) -> Instance {
    let n = groups * group;
    let mut cs = Vec::new();
    for a in 0..groups {
        for b in a + 1..groups {
            if rng.gen_bool(0.5) {
                for i in 0..group {
                    for j in 0..group {
                        cs.push(ge(vec![linear(1, a * group + i), linear(1, b * group + j)], 1));
                    }
                }
            }
        }
    }
    let cost: Vec<i64> = (0..groups).map(|_| rng.gen_range(1..=4)).collect();
    let obj = Objective {
        terms: (0..n).map(|v| linear(cost[v / group], v)).collect(),
        offset: 0,
    };
    finish(n, Some(obj), cs)
}

/// Random 0/1 knapsack-style covering with conflicts, always feasible
/// (all-ones satisfies every row).
pub fn feasible_covering<R: Rng>(rng: &mut R, n: usize, m: usize) -> Instance {
    let mut cs = Vec::new();
    for _ in 0..m {
        let len = rng.gen_range(2..=n.min(6));
        let mut vs: Vec<usize> = (0..n).collect();
        vs.shuffle(rng);
        let terms: Vec<Term> = vs[..len].iter().map(|&v| linear(rng.gen_range(1..=9), v)).collect();
        let total: i64 = terms.iter().map(|t| t.coef).sum();
        cs.push(ge(terms, rng.gen_range(1..=total)));
    }
    let obj = Objective {
        terms: (0..n).map(|v| linear(rng.gen_range(1..=20), v)).collect(),
        offset: 0,
    };
    finish(n, Some(obj), cs)
}

/// Random 3-CNF as PB clauses, near the satisfiability threshold.
pub fn random_3sat<R: Rng>(rng: &mut R, n: usize, clauses: usize) -> Instance {
    let mut cs = Vec::new();
    for _ in 0..clauses {
        let vs: Vec<usize> = (0..n).collect::<Vec<_>>().choose_multiple(rng, 3.min(n)).copied().collect();
        let mut rhs = 1;
        let terms = vs
            .into_iter()
            .map(|v| {
                if rng.gen_bool(0.5) {
                    rhs -= 1;
                    linear(-1, v)
                } else {
                    linear(1, v)
                }
            })
            .collect();
        cs.push(ge(terms, rhs));
    }
    finish(n, None, cs)
}

/// Random decision instance satisfied by a hidden assignment. Each row is
/// tight or nearly tight at that assignment.
pub fn planted<R: Rng>(rng: &mut R, n: usize, m: usize, max_coef: i64) -> (Instance, Vec<bool>) {
    let hidden: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    let mut cs = Vec::new();
    for _ in 0..m {
        let len = rng.gen_range(2..=n.min(8));
        let mut vs: Vec<usize> = (0..n).collect();
        vs.shuffle(rng);
        let terms: Vec<Term> = vs[..len].iter().map(|&v| linear(random_coef(rng, max_coef), v)).collect();
        let act: i64 = terms.iter().filter(|t| hidden[t.vars[0] as usize - 1]).map(|t| t.coef).sum();
        let relation = if rng.gen_bool(0.1) { Relation::Eq } else { Relation::Ge };
        let rhs = if relation == Relation::Eq { act } else { act - rng.gen_range(0..=1) };
        cs.push(PbConstraint {
            terms,
            relation,
            rhs,
            weight: None,
        });
    }
    (finish(n, None, cs), hidden)
}

#![allow(dead_code)]

use pbopt::opb::{Instance, Relation, Term};

fn term_value(t: &Term, bits: u64) -> i128 {
    if t.vars.iter().all(|&v| bits >> (v - 1) & 1 == 1) {
        t.coef as i128
    } else {
        0
    }
}

fn lhs(terms: &[Term], bits: u64) -> i128 {
    terms.iter().map(|t| term_value(t, bits)).sum()
}

/// Cost of an assignment given as a bit mask, or `None` when it violates a
/// hard constraint or reaches the top cost.
pub fn brute_cost(inst: &Instance, bits: u64) -> Option<i128> {
    let mut violated = 0i128;
    for c in &inst.constraints {
        let a = lhs(&c.terms, bits);
        let ok = match c.relation {
            Relation::Ge => a >= c.rhs as i128,
            Relation::Eq => a == c.rhs as i128,
        };
        match (ok, c.weight) {
            (true, _) => {}
            (false, None) => return None,
            (false, Some(w)) => violated += w as i128,
        }
    }
    if inst.is_wbo {
        if inst.top_cost.is_some_and(|t| violated >= t as i128) {
            return None;
        }
        return Some(violated);
    }
    Some(inst.objective.as_ref().map_or(0, |o| o.offset as i128 + lhs(&o.terms, bits)))
}

/// Exhaustive optimum: `None` when infeasible.
pub fn brute_optimum(inst: &Instance) -> Option<i128> {
    assert!(inst.n_vars <= 24);
    (0..1u64 << inst.n_vars).filter_map(|b| brute_cost(inst, b)).min()
}

pub fn to_bits(x: &[bool]) -> u64 {
    x.iter().enumerate().map(|(i, &b)| (b as u64) << i).sum()
}

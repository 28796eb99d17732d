//! Engine form of an instance.
//!
//! Every monomial becomes an AND auxiliary `z`, every soft constraint an
//! indicator `y`, and every hard row the normalized form `sum a_j l_j >= d`
//! with positive coefficients over literals.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::lit::{Lit, Var};
use crate::opb::{Instance, Relation, Status, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("hard constraint {constraint} can never be satisfied")]
    Infeasible { constraint: usize },
    #[error("oracle enumeration over {n_vars} variables exceeds the cap of {cap}")]
    TooManyVars { n_vars: usize, cap: usize },
}

/// `z = AND(operands)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AndDef {
    pub z: Var,
    pub operands: Vec<Var>,
}

/// `sum coef * lit >= degree` with positive coefficients over distinct
/// variables.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct NormConstraint {
    pub terms: Vec<(i64, Lit)>,
    pub degree: i64,
}

impl fmt::Debug for NormConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, l) in &self.terms {
            write!(f, "{c}{l:?} ")?;
        }
        write!(f, ">= {}", self.degree)
    }
}

impl NormConstraint {
    pub fn max_activity(&self) -> i128 {
        self.terms.iter().map(|&(c, _)| c as i128).sum()
    }

    /// A row whose coefficients cannot reach the degree.
    pub fn is_infeasible(&self) -> bool {
        self.max_activity() < self.degree as i128
    }

    pub fn activity(&self, x: &[bool]) -> i128 {
        self.terms
            .iter()
            .filter(|(_, l)| l.eval(x[l.var()]))
            .map(|&(c, _)| c as i128)
            .sum()
    }

    pub fn is_satisfied(&self, x: &[bool]) -> bool {
        self.activity(x) >= self.degree as i128
    }

    pub fn lp_activity(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(c, l)| c as f64 * l.eval_f64(x[l.var()]))
            .sum()
    }

    pub fn max_coef(&self) -> i64 {
        self.terms.iter().map(|t| t.0).max().unwrap_or(0)
    }

    pub fn saturate(&mut self) {
        let d = self.degree;
        for t in &mut self.terms {
            t.0 = t.0.min(d);
        }
    }

    /// Variable form `sum c_j x_j >= rhs` with signed coefficients.
    pub fn to_linear(&self) -> (Vec<(Var, i64)>, i64) {
        let mut rhs = self.degree;
        let mut out: Vec<(Var, i64)> = self
            .terms
            .iter()
            .map(|&(c, l)| {
                if l.is_neg() {
                    rhs -= c;
                    (l.var(), -c)
                } else {
                    (l.var(), c)
                }
            })
            .collect();
        out.sort_unstable();
        (out, rhs)
    }

    /// Same row with terms sorted by literal; used for set comparisons.
    pub fn canonical(&self) -> NormConstraint {
        let mut terms = self.terms.clone();
        terms.sort_unstable_by_key(|&(c, l)| (l, c));
        NormConstraint {
            terms,
            degree: self.degree,
        }
    }
}

/// Normalizes `sum coef * x_var (>= | =) rhs` into literal form. Negative
/// coefficients are flipped through `a*x = a - a*(1-x)`, coefficients are
/// saturated at the degree, and rows with degree <= 0 are dropped. Returned
/// rows may be infeasible (`is_infeasible`); the caller decides what that
/// means.
pub fn normalize(terms: &[(i64, Var)], relation: Relation, rhs: i64) -> Vec<NormConstraint> {
    let mut merged: HashMap<Var, i128> = HashMap::new();
    let mut order = Vec::new();
    for &(c, v) in terms {
        let e = merged.entry(v).or_insert_with(|| {
            order.push(v);
            0
        });
        *e += c as i128;
    }
    let lin: Vec<(i128, Var)> = order
        .into_iter()
        .map(|v| (merged[&v], v))
        .filter(|&(c, _)| c != 0)
        .collect();
    let mut rows = Vec::new();
    if let Some(r) = normalize_ge(&lin, rhs as i128) {
        rows.push(r);
    }
    if relation == Relation::Eq {
        let neg: Vec<(i128, Var)> = lin.iter().map(|&(c, v)| (-c, v)).collect();
        if let Some(r) = normalize_ge(&neg, -(rhs as i128)) {
            rows.push(r);
        }
    }
    rows
}

fn normalize_ge(lin: &[(i128, Var)], rhs: i128) -> Option<NormConstraint> {
    let mut degree = rhs;
    let mut terms = Vec::with_capacity(lin.len());
    for &(c, v) in lin {
        if c > 0 {
            terms.push((c, Lit::pos(v)));
        } else {
            degree -= c;
            terms.push((-c, Lit::neg(v)));
        }
    }
    if degree <= 0 {
        return None;
    }
    let degree_i64 = i64::try_from(degree).expect("degree fits 64 bits under the intsize cap");
    let mut row = NormConstraint {
        terms: terms
            .into_iter()
            .map(|(c, l)| (c.min(degree) as i64, l))
            .collect(),
        degree: degree_i64,
    };
    row.terms.sort_by_key(|&(c, l)| (std::cmp::Reverse(c), l));
    row.saturate();
    Some(row)
}

/// Soft constraint: `y = 1` implies every row holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorRow {
    pub y: Var,
    /// One row for `>=`, two for `=`; empty when the constraint is trivially
    /// satisfied.
    pub rows: Vec<NormConstraint>,
    pub weight: i64,
}

impl IndicatorRow {
    /// Exact PB encoding `row + degree * ~y >= degree` of each row.
    pub fn pb_rows(&self) -> Vec<NormConstraint> {
        self.rows
            .iter()
            .map(|r| {
                let mut terms = r.terms.clone();
                terms.push((r.degree, Lit::neg(self.y)));
                NormConstraint {
                    terms,
                    degree: r.degree,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Original,
    /// Index into `and_defs`.
    And(usize),
    /// Index into `indicators`.
    Indicator(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineObjective {
    pub coefs: Vec<i64>,
    pub offset: i64,
}

impl EngineObjective {
    pub fn eval(&self, x: &[bool]) -> i128 {
        self.offset as i128
            + self
                .coefs
                .iter()
                .zip(x)
                .filter(|(_, &v)| v)
                .map(|(&c, _)| c as i128)
                .sum::<i128>()
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.offset as f64 + self.coefs.iter().zip(x).map(|(&c, &v)| c as f64 * v).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct EngineProblem {
    pub n_orig: usize,
    pub n_total: usize,
    /// Hard rows: original constraints, AND links, and the WBO top-cost row.
    pub hard: Vec<NormConstraint>,
    /// Leading rows of `hard` that come from original constraints.
    pub n_constraint_rows: usize,
    pub indicators: Vec<IndicatorRow>,
    pub and_defs: Vec<AndDef>,
    pub objective: Option<EngineObjective>,
    pub kinds: Vec<VarKind>,
    /// The parsed instance, kept for exact solution checking.
    pub original: Instance,
}

impl EngineProblem {
    /// Hard rows followed by the PB encodings of all indicator rows.
    pub fn all_rows(&self) -> Vec<NormConstraint> {
        let mut rows = self.hard.clone();
        for ind in &self.indicators {
            rows.extend(ind.pb_rows());
        }
        rows
    }

    pub fn is_feasible(&self, x: &[bool]) -> bool {
        self.hard.iter().all(|r| r.is_satisfied(x))
            && self
                .indicators
                .iter()
                .all(|ind| !x[ind.y] || ind.rows.iter().all(|r| r.is_satisfied(x)))
    }

    pub fn objective_value(&self, x: &[bool]) -> i128 {
        self.objective.as_ref().map_or(0, |o| o.eval(x))
    }

    /// Extends an assignment of the original variables with the AND values
    /// and the best indicator values.
    pub fn complete(&self, x_orig: &[bool]) -> Vec<bool> {
        let mut x = vec![false; self.n_total];
        x[..self.n_orig].copy_from_slice(&x_orig[..self.n_orig]);
        for d in &self.and_defs {
            x[d.z] = d.operands.iter().all(|&v| x[v]);
        }
        for ind in &self.indicators {
            x[ind.y] = ind.rows.iter().all(|r| r.is_satisfied(&x));
        }
        x
    }
}

/// Linearizes an instance: one AND auxiliary per distinct monomial, shared
/// across constraints and the objective, plus one indicator per soft
/// constraint.
pub fn linearize(inst: &Instance) -> Result<EngineProblem, ModelError> {
    let n = inst.n_vars;
    let mut and_index: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut and_defs: Vec<AndDef> = Vec::new();
    let mut kinds = vec![VarKind::Original; n];

    let mut monomials: Vec<&Term> = Vec::new();
    if let Some(o) = &inst.objective {
        monomials.extend(o.terms.iter());
    }
    for c in &inst.constraints {
        monomials.extend(c.terms.iter());
    }
    for t in monomials.into_iter().filter(|t| t.vars.len() > 1) {
        if !and_index.contains_key(&t.vars) {
            let z = n + and_defs.len();
            and_index.insert(t.vars.clone(), and_defs.len());
            kinds.push(VarKind::And(and_defs.len()));
            and_defs.push(AndDef {
                z,
                operands: t.vars.iter().map(|&v| v as Var - 1).collect(),
            });
        }
    }
    let var_of = |t: &Term| -> Var {
        if t.vars.len() == 1 {
            t.vars[0] as Var - 1
        } else {
            and_defs[and_index[&t.vars]].z
        }
    };

    let mut hard = Vec::new();
    let mut indicators = Vec::new();
    let mut next_var = n + and_defs.len();
    for (ci, c) in inst.constraints.iter().enumerate() {
        let lin: Vec<(i64, Var)> = c.terms.iter().map(|t| (t.coef, var_of(t))).collect();
        let rows = normalize(&lin, c.relation, c.rhs);
        match c.weight {
            None => {
                if rows.iter().any(|r| r.is_infeasible()) {
                    return Err(ModelError::Infeasible { constraint: ci });
                }
                hard.extend(rows);
            }
            Some(w) => {
                kinds.push(VarKind::Indicator(indicators.len()));
                indicators.push(IndicatorRow {
                    y: next_var,
                    rows,
                    weight: w,
                });
                next_var += 1;
            }
        }
    }
    let n_constraint_rows = hard.len();
    for d in &and_defs {
        for &x in &d.operands {
            hard.extend(normalize(&[(1, x), (-1, d.z)], Relation::Ge, 0));
        }
        let mut lin: Vec<(i64, Var)> = vec![(1, d.z)];
        lin.extend(d.operands.iter().map(|&x| (-1, x)));
        hard.extend(normalize(&lin, Relation::Ge, 1 - d.operands.len() as i64));
    }
    if let Some(top) = inst.top_cost {
        // sum w (1 - y) <= top - 1
        let lin: Vec<(i64, Var)> = indicators.iter().map(|i| (i.weight, i.y)).collect();
        let total: i64 = indicators.iter().map(|i| i.weight).sum();
        let rows = normalize(&lin, Relation::Ge, total - top + 1);
        if rows.iter().any(|r| r.is_infeasible()) {
            return Err(ModelError::Infeasible {
                constraint: inst.constraints.len(),
            });
        }
        hard.extend(rows);
    }

    let n_total = next_var;
    let objective = if inst.is_wbo {
        let mut coefs = vec![0i64; n_total];
        let mut offset = 0i64;
        for ind in &indicators {
            coefs[ind.y] -= ind.weight;
            offset += ind.weight;
        }
        Some(EngineObjective { coefs, offset })
    } else {
        inst.objective.as_ref().map(|o| {
            let mut coefs = vec![0i64; n_total];
            for t in &o.terms {
                coefs[var_of(t)] += t.coef;
            }
            EngineObjective {
                coefs,
                offset: o.offset,
            }
        })
    };

    Ok(EngineProblem {
        n_orig: n,
        n_total,
        hard,
        n_constraint_rows,
        indicators,
        and_defs,
        objective,
        kinds,
        original: inst.clone(),
    })
}

/// Exact cost of an assignment of the original variables: `None` when a hard
/// constraint (or the WBO top cost) is violated, otherwise the objective
/// value (violation cost for WBO, 0 for decision instances).
pub fn instance_cost(inst: &Instance, x: &[bool]) -> Option<i128> {
    let mut cost: i128 = 0;
    for c in &inst.constraints {
        if !c.is_satisfied(x) {
            match c.weight {
                None => return None,
                Some(w) => cost += w as i128,
            }
        }
    }
    if inst.is_wbo {
        if let Some(top) = inst.top_cost {
            if cost >= top as i128 {
                return None;
            }
        }
        return Some(cost);
    }
    Some(inst.objective.as_ref().map_or(0, |o| o.eval(x)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub status: Status,
    pub best_obj: Option<i64>,
    pub model: Option<Vec<bool>>,
}

pub const DEFAULT_ORACLE_CAP: usize = 22;

/// Exhaustive enumeration over the original variables. Decision instances
/// report the first model in counting order (x1 is the lowest bit).
pub fn oracle_solve(inst: &Instance, var_cap: usize) -> Result<OracleResult, ModelError> {
    let n = inst.n_vars;
    if n > var_cap {
        return Err(ModelError::TooManyVars { n_vars: n, cap: var_cap });
    }
    let optimize = inst.is_optimization();
    let mut best: Option<(i128, Vec<bool>)> = None;
    let mut x = vec![false; n];
    for bits in 0u64..(1u64 << n) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = bits >> i & 1 == 1;
        }
        if let Some(cost) = instance_cost(inst, &x) {
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, x.clone()));
                if !optimize {
                    break;
                }
            }
        }
    }
    Ok(match best {
        None => OracleResult {
            status: Status::Unsatisfiable,
            best_obj: None,
            model: None,
        },
        Some((cost, model)) => OracleResult {
            status: if optimize {
                Status::OptimumFound
            } else {
                Status::Satisfiable
            },
            best_obj: optimize.then_some(cost as i64),
            model: Some(model),
        },
    })
}

//! RLT cuts: a row `sum c_j x_j >= b` is multiplied by the bound factors
//! `x_k` and `1 - x_k`, and every product `x_j x_k` is replaced by a linear
//! expression. Products known from AND definitions are substituted exactly;
//! the rest go through McCormick terms chosen per coefficient sign so the
//! result stays valid.

use std::collections::{HashMap, HashSet};

use crate::cut::{Cut, CutKind};
use crate::lit::Var;
use crate::model::{AndDef, NormConstraint};

pub const MIN_VIOLATION: f64 = 1e-6;
pub const MAX_ROWS: usize = 2;
pub const MAX_FACTORS: usize = 20;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairEntry {
    /// `z = x_j x_k` exactly.
    pub exact: Option<Var>,
    /// Larger AND definitions containing both, each with `z <= x_j x_k`.
    pub relaxed: Vec<Var>,
}

#[derive(Debug, Clone, Default)]
pub struct ProductTable {
    pairs: HashMap<(Var, Var), PairEntry>,
    /// Operand set of every AND auxiliary.
    operands: HashMap<Var, Vec<Var>>,
    /// AND auxiliary by its sorted operand set.
    by_operands: HashMap<Vec<Var>, Var>,
}

fn key(a: Var, b: Var) -> (Var, Var) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl ProductTable {
    pub fn get(&self, j: Var, k: Var) -> Option<&PairEntry> {
        self.pairs.get(&key(j, k))
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    fn ops(&self, v: Var) -> Vec<Var> {
        self.operands.get(&v).cloned().unwrap_or_else(|| vec![v])
    }

    /// A variable equal to `x_j x_k` in every feasible solution, if known.
    pub fn exact_product(&self, j: Var, k: Var) -> Option<Var> {
        if j == k {
            return Some(j);
        }
        if let Some(z) = self.get(j, k).and_then(|e| e.exact) {
            return Some(z);
        }
        let (oj, ok) = (self.ops(j), self.ops(k));
        if ok.iter().all(|v| oj.contains(v)) {
            return Some(j);
        }
        if oj.iter().all(|v| ok.contains(v)) {
            return Some(k);
        }
        let mut union = oj;
        union.extend(ok);
        union.sort_unstable();
        union.dedup();
        self.by_operands.get(&union).copied()
    }

    /// Variables `w` with `w <= x_j x_k`.
    pub fn lower_products(&self, j: Var, k: Var) -> &[Var] {
        self.get(j, k).map_or(&[], |e| &e.relaxed)
    }
}

pub fn build_product_table(and_defs: &[AndDef]) -> ProductTable {
    let mut t = ProductTable::default();
    for d in and_defs {
        let mut ops = d.operands.clone();
        ops.sort_unstable();
        t.operands.insert(d.z, ops.clone());
        t.by_operands.insert(ops.clone(), d.z);
        if ops.len() == 2 {
            t.pairs.entry(key(ops[0], ops[1])).or_default().exact = Some(d.z);
        } else {
            for a in 0..ops.len() {
                for b in a + 1..ops.len() {
                    t.pairs.entry(key(ops[a], ops[b])).or_default().relaxed.push(d.z);
                }
            }
        }
    }
    t
}

/// Linear inequality under construction: `sum lin >= rhs`.
struct Builder {
    lin: HashMap<Var, i64>,
    rhs: i64,
}

impl Builder {
    fn add(&mut self, v: Var, c: i64) {
        *self.lin.entry(v).or_insert(0) += c;
    }

    /// Replaces `g * x_j x_k` by a linear term that keeps the inequality
    /// valid at every feasible 0/1 point.
    fn product(&mut self, g: i64, j: Var, k: Var, table: &ProductTable, x: &[f64]) {
        if let Some(w) = table.exact_product(j, k) {
            self.add(w, g);
        } else if g > 0 {
            // overestimate: x_j x_k <= min(x_j, x_k)
            let pick = if x[j] <= x[k] { j } else { k };
            self.add(pick, g);
        } else {
            // underestimate: x_j x_k >= max(0, x_j + x_k - 1, z_e for e containing j,k)
            let mccormick = x[j] + x[k] - 1.0;
            let relaxed = table
                .lower_products(j, k)
                .iter()
                .copied()
                .max_by(|a, b| x[*a].total_cmp(&x[*b]).then(b.cmp(a)));
            let relaxed_val = relaxed.map_or(f64::NEG_INFINITY, |z| x[z]);
            if relaxed_val > mccormick.max(0.0) {
                self.add(relaxed.unwrap(), g);
            } else if mccormick > 0.0 {
                self.add(j, g);
                self.add(k, g);
                self.rhs += g;
            }
        }
    }

    fn finish(self) -> Cut {
        Cut::new(self.lin.into_iter().collect(), self.rhs, CutKind::Rlt)
    }
}

/// Multiplies `row` by `x_k` and by `1 - x_k` and returns the linearized
/// inequalities violated at `x` by more than [`MIN_VIOLATION`].
pub fn separate_rlt(row: &NormConstraint, k: Var, table: &ProductTable, x: &[f64]) -> Vec<Cut> {
    rlt_products(row, k, table, x)
        .into_iter()
        .filter(|c| !c.is_trivial() && c.violation(x) > MIN_VIOLATION)
        .collect()
}

/// Both linearized products, unfiltered.
pub fn rlt_products(row: &NormConstraint, k: Var, table: &ProductTable, x: &[f64]) -> [Cut; 2] {
    let (lin, b) = row.to_linear();
    // x_k * (sum c_j x_j - b) >= 0
    let mut lower = Builder {
        lin: HashMap::new(),
        rhs: 0,
    };
    lower.add(k, -b);
    for &(j, c) in &lin {
        lower.product(c, j, k, table, x);
    }
    // (1 - x_k) * (sum c_j x_j - b) >= 0
    let mut upper = Builder {
        lin: HashMap::new(),
        rhs: b,
    };
    upper.add(k, b);
    for &(j, c) in &lin {
        upper.add(j, c);
        upper.product(-c, j, k, table, x);
    }
    [lower.finish(), upper.finish()]
}

/// One separation round: at most [`MAX_ROWS`] rows times [`MAX_FACTORS`]
/// factor variables. Factors are drawn from `factor_vars` (the variables in
/// some AND definition) and ranked by fractionality; rows are ranked by
/// their slack at `x`, tightest first, among rows that touch a factor.
pub fn separate_rlt_round(
    rows: &[NormConstraint],
    factor_vars: &[Var],
    table: &ProductTable,
    x: &[f64],
    max_cuts: usize,
) -> Vec<Cut> {
    let mut factors: Vec<Var> = factor_vars
        .iter()
        .copied()
        .filter(|&v| x[v] > 1e-6 && x[v] < 1.0 - 1e-6)
        .collect();
    factors.sort_by(|&a, &b| (x[a] - 0.5).abs().total_cmp(&(x[b] - 0.5).abs()).then(a.cmp(&b)));
    factors.truncate(MAX_FACTORS);
    if factors.is_empty() {
        return Vec::new();
    }
    let factor_set: HashSet<Var> = factors.iter().copied().collect();
    let touches = |r: &NormConstraint| {
        r.terms.iter().any(|&(_, l)| {
            factor_set.contains(&l.var()) || factors.iter().any(|&k| table.get(l.var(), k).is_some())
        })
    };
    let mut ranked: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.terms.len() >= 2 && touches(r))
        .map(|(i, r)| (r.lp_activity(x) - r.degree as f64, i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut seen = HashSet::new();
    let mut cuts: Vec<(f64, Cut)> = Vec::new();
    for &(_, ri) in ranked.iter().take(MAX_ROWS) {
        for &k in &factors {
            for c in separate_rlt(&rows[ri], k, table, x) {
                if seen.insert(c.fingerprint()) {
                    cuts.push((c.violation(x), c));
                }
            }
        }
    }
    cuts.sort_by(|a, b| b.0.total_cmp(&a.0));
    cuts.truncate(max_cuts);
    cuts.into_iter().map(|(_, c)| c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lit::Lit;

    fn clause12() -> NormConstraint {
        NormConstraint {
            terms: vec![(1, Lit::pos(1)), (1, Lit::pos(2))],
            degree: 1,
        }
    }

    fn table12() -> ProductTable {
        build_product_table(&[AndDef {
            z: 5,
            operands: vec![1, 2],
        }])
    }

    #[test]
    fn table_entries() {
        let t = table12();
        assert_eq!(t.get(2, 1).unwrap().exact, Some(5));
        let t = build_product_table(&[AndDef {
            z: 9,
            operands: vec![1, 2, 3],
        }]);
        for (a, b) in [(1, 2), (1, 3), (2, 3)] {
            assert_eq!(t.get(a, b).unwrap().relaxed, vec![9]);
            assert_eq!(t.get(a, b).unwrap().exact, None);
        }
        assert!(build_product_table(&[]).is_empty());
    }

    #[test]
    fn lower_factor_is_trivial() {
        // (x1 + x2) x2 >= x2  ->  z + x2 >= x2  ->  z >= 0
        let x = vec![0.0, 0.5, 0.5, 0.0, 0.0, 0.0];
        let [lower, _] = rlt_products(&clause12(), 2, &table12(), &x);
        assert_eq!(lower.coefs, vec![(5, 1)]);
        assert_eq!(lower.rhs, 0);
        assert!(lower.is_trivial());
    }

    #[test]
    fn upper_factor_gives_product_cut() {
        // (x1 + x2)(1 - x2) >= 1 - x2  ->  x1 + x2 - z >= 1
        let x = vec![0.0, 0.5, 0.5, 0.0, 0.0, 0.5];
        let [_, upper] = rlt_products(&clause12(), 2, &table12(), &x);
        assert_eq!(upper.coefs, vec![(1, 1), (2, 1), (5, -1)]);
        assert_eq!(upper.rhs, 1);
        // brute-force validity with z = x1 x2
        for bits in 0..4u32 {
            let (a, b) = (bits & 1 == 1, bits & 2 == 2);
            let mut p = vec![false; 6];
            p[1] = a;
            p[2] = b;
            p[5] = a && b;
            if a || b {
                assert!(upper.is_satisfied(&p));
            }
        }
        let cuts = separate_rlt(&clause12(), 2, &table12(), &x);
        assert_eq!(cuts, vec![upper]);
    }

    #[test]
    fn squares_collapse() {
        // factor inside the row support: no product of k with itself remains
        let row = NormConstraint {
            terms: vec![(2, Lit::pos(0)), (1, Lit::pos(1)), (1, Lit::neg(2))],
            degree: 2,
        };
        let t = build_product_table(&[]);
        let x = vec![0.3, 0.6, 0.2];
        for c in rlt_products(&row, 0, &t, &x) {
            // every coefficient is on a plain variable and is an integer
            assert!(c.coefs.iter().all(|&(v, _)| v < 3));
        }
    }
}

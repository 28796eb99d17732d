//! Variable symmetries of the engine problem and their use in search.
//!
//! Detection colors a bipartite graph of variables and rows, refines the
//! coloring canonically, and searches individualization trees for leaves
//! matching the leftmost one. Every candidate is checked against the row set
//! and the objective before it is kept. Handling adds lex-leader reasoning
//! `x >=lex sigma(x)` for each generator under the variable index order.

use std::collections::{HashMap, HashSet};

use crate::lit::{Lit, Var};
use crate::model::{EngineProblem, NormConstraint, VarKind};
use crate::propcf::{Reason, RowRef, Trail};

pub const DEFAULT_NODE_LIMIT: u64 = 50_000;
/// Handling is switched off above this many generators.
pub const MAX_GENERATORS: usize = 10;
/// Detection is skipped for graphs with more edges than this.
pub const MAX_EDGES: usize = 200_000;

type Perm = Vec<Var>;

/// Row in variable form `sum c_j x_j >= rhs`, terms sorted by variable.
type LinRow = (Vec<(Var, i64)>, i64);

struct Graph {
    n_vars: usize,
    adj: Vec<Vec<(u32, u32)>>,
    initial: Vec<u32>,
}

fn build_graph(problem: &EngineProblem, rows: &[LinRow]) -> Graph {
    let n = problem.n_total;
    let mut adj = vec![Vec::new(); n + rows.len()];
    let mut coef_ids: HashMap<i64, u32> = HashMap::new();
    let mut coefs: Vec<i64> = rows.iter().flat_map(|r| r.0.iter().map(|t| t.1)).collect();
    coefs.sort_unstable();
    coefs.dedup();
    for (i, c) in coefs.into_iter().enumerate() {
        coef_ids.insert(c, i as u32);
    }
    for (ri, (terms, _)) in rows.iter().enumerate() {
        let node = (n + ri) as u32;
        for &(v, c) in terms {
            let ec = coef_ids[&c];
            adj[v].push((ec, node));
            adj[node as usize].push((ec, v as u32));
        }
    }
    // variable labels: kind and objective coefficient; row labels: rhs and
    // coefficient multiset. Variables always sort before rows.
    let obj = |v: Var| problem.objective.as_ref().map_or(0, |o| o.coefs[v]);
    let kind = |v: Var| match problem.kinds[v] {
        VarKind::Original => 0u8,
        VarKind::And(_) => 1,
        VarKind::Indicator(_) => 2,
    };
    let mut labels: Vec<(u8, i64, u8, Vec<i64>)> = (0..n).map(|v| (0, obj(v), kind(v), Vec::new())).collect();
    for (terms, rhs) in rows {
        let mut cs: Vec<i64> = terms.iter().map(|t| t.1).collect();
        cs.sort_unstable();
        labels.push((1, *rhs, 0, cs));
    }
    let initial = rank(&labels);
    Graph {
        n_vars: n,
        adj,
        initial,
    }
}

/// Canonical relabeling: each item gets the rank of its key among the
/// distinct keys.
fn rank<K: Ord>(keys: &[K]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut out = vec![0u32; keys.len()];
    let mut r = 0u32;
    for w in 0..idx.len() {
        if w > 0 && keys[idx[w]] != keys[idx[w - 1]] {
            r += 1;
        }
        out[idx[w]] = r;
    }
    out
}

fn n_colors(colors: &[u32]) -> usize {
    colors.iter().max().map_or(0, |&m| m as usize + 1)
}

impl Graph {
    fn refine(&self, mut colors: Vec<u32>) -> Vec<u32> {
        let mut k = n_colors(&colors);
        loop {
            let keys: Vec<(u32, Vec<(u32, u32)>)> = (0..colors.len())
                .map(|u| {
                    let mut sig: Vec<(u32, u32)> = self.adj[u].iter().map(|&(ec, nb)| (ec, colors[nb as usize])).collect();
                    sig.sort_unstable();
                    (colors[u], sig)
                })
                .collect();
            colors = rank(&keys);
            let nk = n_colors(&colors);
            if nk == k {
                return colors;
            }
            k = nk;
        }
    }
}

fn individualize(colors: &[u32], v: usize) -> Vec<u32> {
    let keys: Vec<(u32, bool)> = colors.iter().enumerate().map(|(u, &c)| (c, u != v)).collect();
    rank(&keys)
}

fn shape(colors: &[u32]) -> Vec<u32> {
    let mut s = vec![0u32; n_colors(colors)];
    for &c in colors {
        s[c as usize] += 1;
    }
    s
}

/// Smallest color whose cell has more than one member.
fn target_cell(colors: &[u32]) -> Option<u32> {
    shape(colors).iter().position(|&s| s > 1).map(|c| c as u32)
}

fn cell_members(colors: &[u32], c: u32) -> Vec<usize> {
    (0..colors.len()).filter(|&u| colors[u] == c).collect()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Detection {
    /// Verified variable permutations.
    pub generators: Vec<Perm>,
    pub nodes: u64,
    /// The node budget ran out; the generators found are still valid.
    pub aborted: bool,
    pub skipped_large: bool,
}

struct Search<'a> {
    graph: &'a Graph,
    rows: &'a HashSet<LinRow>,
    obj: Vec<i64>,
    shapes: Vec<Vec<u32>>,
    leaf: Vec<u32>,
    nodes: u64,
    limit: u64,
}

impl Search<'_> {
    fn leaf_perm(&self, colors: &[u32]) -> Perm {
        let mut at = vec![0usize; colors.len()];
        for (u, &c) in colors.iter().enumerate() {
            at[c as usize] = u;
        }
        (0..self.graph.n_vars).map(|v| at[self.leaf[v] as usize]).collect()
    }

    fn find_leaf(&mut self, colors: Vec<u32>, depth: usize) -> Option<Perm> {
        if self.nodes >= self.limit {
            return None;
        }
        self.nodes += 1;
        let colors = self.graph.refine(colors);
        if depth >= self.shapes.len() || shape(&colors) != self.shapes[depth] {
            return None;
        }
        match target_cell(&colors) {
            None => {
                let p = self.leaf_perm(&colors);
                is_automorphism(&p, self.rows, &self.obj).then_some(p)
            }
            Some(c) => {
                for w in cell_members(&colors, c) {
                    if let Some(p) = self.find_leaf(individualize(&colors, w), depth + 1) {
                        return Some(p);
                    }
                }
                None
            }
        }
    }
}

fn lin_rows(problem: &EngineProblem) -> Vec<LinRow> {
    let mut rows: Vec<LinRow> = problem.all_rows().iter().map(|r| r.to_linear()).collect();
    rows.sort();
    rows.dedup();
    rows
}

fn map_row(p: &[Var], row: &LinRow) -> LinRow {
    let mut terms: Vec<(Var, i64)> = row.0.iter().map(|&(v, c)| (p[v], c)).collect();
    terms.sort_unstable();
    (terms, row.1)
}

fn is_automorphism(p: &[Var], rows: &HashSet<LinRow>, obj: &[i64]) -> bool {
    let mut seen = vec![false; p.len()];
    for &t in p {
        if t >= p.len() || std::mem::replace(&mut seen[t], true) {
            return false;
        }
    }
    (0..p.len()).all(|v| obj[p[v]] == obj[v]) && rows.iter().all(|r| rows.contains(&map_row(p, r)))
}

/// Checks a permutation against the problem's rows and objective.
pub fn verify_symmetry(problem: &EngineProblem, p: &[Var]) -> bool {
    let rows: HashSet<LinRow> = lin_rows(problem).into_iter().collect();
    let obj = problem.objective.as_ref().map_or_else(|| vec![0; problem.n_total], |o| o.coefs.clone());
    p.len() == problem.n_total && is_automorphism(p, &rows, &obj)
}

pub fn detect(problem: &EngineProblem, node_limit: u64) -> Detection {
    let rows = lin_rows(problem);
    let n_edges: usize = rows.iter().map(|r| r.0.len()).sum();
    if n_edges > MAX_EDGES {
        return Detection {
            skipped_large: true,
            ..Detection::default()
        };
    }
    let graph = build_graph(problem, &rows);
    let row_set: HashSet<LinRow> = rows.into_iter().collect();
    let obj = problem.objective.as_ref().map_or_else(|| vec![0; problem.n_total], |o| o.coefs.clone());

    // leftmost path
    let mut levels: Vec<Vec<u32>> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    let mut colors = graph.refine(graph.initial.clone());
    let mut nodes = 1u64;
    while let Some(c) = target_cell(&colors) {
        let v = cell_members(&colors, c)[0];
        levels.push(colors.clone());
        chosen.push(v);
        colors = graph.refine(individualize(&colors, v));
        nodes += 1;
    }
    let mut shapes: Vec<Vec<u32>> = levels.iter().map(|c| shape(c)).collect();
    shapes.push(shape(&colors));

    let mut search = Search {
        graph: &graph,
        rows: &row_set,
        obj,
        shapes,
        leaf: colors,
        nodes,
        limit: node_limit,
    };
    let n_nodes = graph.adj.len();
    let mut uf = UnionFind::new(n_nodes);
    let mut generators: Vec<Perm> = Vec::new();
    for depth in (0..levels.len()).rev() {
        let c = target_cell(&levels[depth]).unwrap();
        let v = chosen[depth];
        let mut tried: HashSet<usize> = HashSet::new();
        tried.insert(uf.find(v));
        for w in cell_members(&levels[depth], c) {
            if search.nodes >= search.limit {
                break;
            }
            let rw = uf.find(w);
            if !tried.insert(rw) || rw == uf.find(v) {
                continue;
            }
            if let Some(p) = search.find_leaf(individualize(&levels[depth], w), depth + 1) {
                if p.iter().enumerate().all(|(a, &b)| a == b) {
                    continue;
                }
                for (a, &b) in p.iter().enumerate() {
                    uf.union(a, b);
                }
                // vertex w is now in the orbit of v through the row nodes too
                uf.union(v, w);
                generators.push(p);
            }
        }
    }
    Detection {
        generators,
        nodes: search.nodes,
        aborted: search.nodes >= search.limit,
        skipped_large: false,
    }
}

/// Orbits of the generated group on the variables, as representative ids.
pub fn orbits(n_vars: usize, generators: &[Perm]) -> Vec<usize> {
    let mut uf = UnionFind::new(n_vars);
    for g in generators {
        for (a, &b) in g.iter().enumerate() {
            uf.union(a, b);
        }
    }
    (0..n_vars).map(|v| uf.find(v)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SymStats {
    pub generators: usize,
    pub lex_propagations: u64,
    pub lex_conflicts: u64,
    pub orbital_fixings: u64,
}

/// Lex-leader reasoning for a fixed generator set.
#[derive(Debug, Clone, Default)]
pub struct SymmetryHandler {
    gens: Vec<Perm>,
    supports: Vec<Vec<Var>>,
    pub stats: SymStats,
}

impl SymmetryHandler {
    /// Returns `None` when there is nothing to handle or too many generators.
    pub fn new(generators: Vec<Perm>) -> Option<SymmetryHandler> {
        if generators.is_empty() || generators.len() > MAX_GENERATORS {
            return None;
        }
        let supports = generators
            .iter()
            .map(|g| (0..g.len()).filter(|&v| g[v] != v).collect())
            .collect();
        Some(SymmetryHandler {
            stats: SymStats {
                generators: generators.len(),
                ..SymStats::default()
            },
            gens: generators,
            supports,
        })
    }

    pub fn generators(&self) -> &[Perm] {
        &self.gens
    }

    /// Propagates every lex constraint once. `Ok(true)` when something was
    /// assigned.
    pub fn propagate(&mut self, trail: &mut Trail) -> Result<bool, RowRef> {
        let mut changed = false;
        for g in 0..self.gens.len() {
            changed |= self.propagate_one(g, trail)?;
        }
        Ok(changed)
    }

    fn propagate_one(&mut self, g: usize, trail: &mut Trail) -> Result<bool, RowRef> {
        let perm = &self.gens[g];
        // false literals of the equal prefix
        let mut prefix: Vec<Lit> = Vec::new();
        let mut changed = false;
        for &i in &self.supports[g] {
            let j = perm[i];
            let (a, b) = (trail.var_value(i), trail.var_value(j));
            match (a, b) {
                (Some(true), Some(false)) => return Ok(changed),
                (Some(false), Some(true)) => {
                    let clause = explanation(&prefix, &[Lit::pos(i), Lit::neg(j)]);
                    self.stats.lex_conflicts += 1;
                    return Err(trail.push_explanation(clause));
                }
                (Some(x), Some(_)) => {
                    push_equal(&mut prefix, i, j, x);
                }
                (Some(false), None) => {
                    let clause = explanation(&prefix, &[Lit::pos(i), Lit::neg(j)]);
                    let r = trail.push_explanation(clause);
                    trail.assign(Lit::neg(j), Reason::Row(r));
                    self.stats.lex_propagations += 1;
                    changed = true;
                    push_equal(&mut prefix, i, j, false);
                }
                (None, Some(true)) => {
                    let clause = explanation(&prefix, &[Lit::pos(i), Lit::neg(j)]);
                    let r = trail.push_explanation(clause);
                    trail.assign(Lit::pos(i), Reason::Row(r));
                    self.stats.lex_propagations += 1;
                    changed = true;
                    push_equal(&mut prefix, i, j, true);
                }
                _ => return Ok(changed),
            }
        }
        Ok(changed)
    }

    /// Fixes every variable in the orbit of a root-fixed variable to the same
    /// value. `fixed` must hold root fixings implied by the problem rows
    /// alone, not by lex reasoning.
    pub fn orbital_fixing(&mut self, fixed: &[Lit], trail: &mut Trail) -> Result<(), ()> {
        assert_eq!(trail.decision_level(), 0);
        let orb = orbits(trail.n_vars(), &self.gens);
        let mut val: HashMap<usize, bool> = HashMap::new();
        for &l in fixed {
            let prev = val.insert(orb[l.var()], !l.is_neg());
            if prev.is_some_and(|p| p == l.is_neg()) {
                return Err(());
            }
        }
        for v in 0..trail.n_vars() {
            if let Some(&b) = val.get(&orb[v]) {
                match trail.var_value(v) {
                    None => {
                        trail.assign(Lit::new(v, !b), Reason::Root);
                        self.stats.orbital_fixings += 1;
                    }
                    Some(x) if x != b => return Err(()),
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

fn push_equal(prefix: &mut Vec<Lit>, i: Var, j: Var, value: bool) {
    // both variables equal `value`; the clause needs their negations false
    prefix.push(Lit::new(i, value));
    prefix.push(Lit::new(j, value));
}

/// Clause `(some prefix pair differs) or extra`, as a row.
fn explanation(prefix: &[Lit], extra: &[Lit]) -> NormConstraint {
    let mut lits: Vec<Lit> = prefix.iter().chain(extra).copied().collect();
    lits.sort_unstable();
    lits.dedup();
    NormConstraint {
        terms: lits.into_iter().map(|l| (1, l)).collect(),
        degree: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linearize;
    use crate::opb::parse;

    #[test]
    fn detects_interchangeable_variables() {
        let inst = parse(b"min: +1 x1 +1 x2 +1 x3;\n+1 x1 +1 x2 +1 x3 >= 2;").unwrap();
        let p = linearize(&inst).unwrap();
        let d = detect(&p, DEFAULT_NODE_LIMIT);
        assert!(!d.generators.is_empty());
        for g in &d.generators {
            assert!(verify_symmetry(&p, g));
        }
        let orb = orbits(3, &d.generators);
        assert!(orb.iter().all(|&o| o == orb[0]));
    }

    #[test]
    fn objective_breaks_symmetry() {
        let inst = parse(b"min: +1 x1 +2 x2;\n+1 x1 +1 x2 >= 1;").unwrap();
        let p = linearize(&inst).unwrap();
        assert!(detect(&p, DEFAULT_NODE_LIMIT).generators.is_empty());
        assert!(!verify_symmetry(&p, &[1, 0]));
    }

    #[test]
    fn lex_propagation_and_explanation() {
        let mut h = SymmetryHandler::new(vec![vec![1, 0]]).unwrap();
        let mut t = Trail::new(2);
        // x0 >= x1: x0 = 0 forces x1 = 0
        t.decide(Lit::neg(0));
        assert_eq!(h.propagate(&mut t), Ok(true));
        assert!(t.is_false(Lit::pos(1)));
        let Reason::Row(RowRef::Expl(e)) = t.reason(1) else {
            panic!()
        };
        assert_eq!(
            t.explanation(e).terms,
            vec![(1, Lit::pos(0)), (1, Lit::neg(1))]
        );
        t.backtrack_to(0);
        t.decide(Lit::pos(1));
        assert_eq!(h.propagate(&mut t), Ok(true));
        assert!(t.is_true(Lit::pos(0)));
    }
}

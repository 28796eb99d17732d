//! Hypergraph of AND constraints and k-flower separation for k = 1, 2.
//!
//! Nodes are the variables occurring in some AND definition and every
//! definition `z_e = prod_{v in e} x_v` is a hyperedge. For a center edge `e`
//! and neighbors `f_1..f_k` that each intersect `e`,
//!
//! ```text
//! z_e + sum_i (1 - z_{f_i}) + sum_{v in R} (1 - x_v) >= 1,   R = e \ (f_1 u .. u f_k)
//! ```
//!
//! is valid. Neighbors are only ever reached through the overlap sets
//! `e n f` stored with the graph.

use std::collections::{HashMap, HashSet};

use crate::cut::{Cut, CutKind};
use crate::lit::Var;
use crate::model::AndDef;

pub const MIN_VIOLATION: f64 = 1e-6;

/// Compressed sparse rows: `items[ptr[i]..ptr[i + 1]]` belong to row `i`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Csr {
    pub ptr: Vec<usize>,
    pub items: Vec<usize>,
}

impl Csr {
    fn from_lists(lists: &[Vec<usize>]) -> Csr {
        let mut ptr = Vec::with_capacity(lists.len() + 1);
        let mut items = Vec::new();
        ptr.push(0);
        for l in lists {
            items.extend_from_slice(l);
            ptr.push(items.len());
        }
        Csr { ptr, items }
    }

    /// Transpose with `n_cols` columns, built in one counting pass.
    fn transpose(&self, n_cols: usize) -> Csr {
        let mut count = vec![0usize; n_cols + 1];
        for &c in &self.items {
            count[c + 1] += 1;
        }
        for i in 0..n_cols {
            count[i + 1] += count[i];
        }
        let ptr = count.clone();
        let mut fill = count;
        let mut items = vec![0; self.items.len()];
        for r in 0..self.len() {
            for &c in self.row(r) {
                items[fill[c]] = r;
                fill[c] += 1;
            }
        }
        Csr { ptr, items }
    }

    pub fn len(&self) -> usize {
        self.ptr.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.items[self.ptr[i]..self.ptr[i + 1]]
    }
}

#[derive(Debug, Clone, Default)]
pub struct Hypergraph {
    /// Engine variable of each node, sorted.
    pub nodes: Vec<Var>,
    /// Product variable of each edge.
    pub edge_z: Vec<Var>,
    /// Edge -> node indices (sorted).
    pub edge_nodes: Csr,
    /// Node -> edges; transpose of `edge_nodes`.
    pub node_edges: Csr,
    /// Overlap set -> node indices (sorted).
    pub overlap_nodes: Csr,
    /// Overlap set -> every edge containing it.
    pub overlap_edges: Csr,
    /// Edge -> overlap sets it contains; transpose of `overlap_edges`.
    pub edge_overlaps: Csr,
}

impl Hypergraph {
    pub fn n_edges(&self) -> usize {
        self.edge_z.len()
    }

    pub fn n_overlaps(&self) -> usize {
        self.overlap_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_z.is_empty()
    }

    pub fn edge(&self, e: usize) -> &[usize] {
        self.edge_nodes.row(e)
    }

    /// Total number of (overlap, edge) incidences.
    pub fn overlap_incidences(&self) -> usize {
        self.overlap_edges.items.len()
    }

    /// Upper bound on the neighbor candidates one separation round visits.
    pub fn candidate_bound(&self) -> usize {
        (0..self.n_edges())
            .map(|e| {
                self.edge_overlaps
                    .row(e)
                    .iter()
                    .map(|&o| self.overlap_edges.row(o).len())
                    .sum::<usize>()
            })
            .sum()
    }
}

fn intersect_sorted(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

fn is_subset_sorted(small: &[usize], big: &[usize]) -> bool {
    let mut j = 0;
    for &s in small {
        while j < big.len() && big[j] < s {
            j += 1;
        }
        if j == big.len() || big[j] != s {
            return false;
        }
        j += 1;
    }
    true
}

pub fn build_hypergraph(and_defs: &[AndDef]) -> Hypergraph {
    if and_defs.is_empty() {
        return Hypergraph::default();
    }
    let mut nodes: Vec<Var> = and_defs.iter().flat_map(|d| d.operands.iter().copied()).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let index: HashMap<Var, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let edges: Vec<Vec<usize>> = and_defs
        .iter()
        .map(|d| {
            let mut e: Vec<usize> = d.operands.iter().map(|v| index[v]).collect();
            e.sort_unstable();
            e
        })
        .collect();
    let edge_nodes = Csr::from_lists(&edges);
    let node_edges = edge_nodes.transpose(nodes.len());

    // distinct pairwise intersections, keyed by their sorted node list
    let mut overlap_id: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut overlaps: Vec<Vec<usize>> = Vec::new();
    let mut stamp = vec![usize::MAX; edges.len()];
    let mut buf = Vec::new();
    for (e, ev) in edges.iter().enumerate() {
        for &v in ev {
            for &f in node_edges.row(v) {
                if f <= e || stamp[f] == e {
                    continue;
                }
                stamp[f] = e;
                intersect_sorted(ev, &edges[f], &mut buf);
                if !overlap_id.contains_key(&buf) {
                    overlap_id.insert(buf.clone(), overlaps.len());
                    overlaps.push(buf.clone());
                }
            }
        }
    }
    let containing: Vec<Vec<usize>> = overlaps
        .iter()
        .map(|o| {
            node_edges
                .row(o[0])
                .iter()
                .copied()
                .filter(|&f| is_subset_sorted(o, &edges[f]))
                .collect()
        })
        .collect();
    let overlap_nodes = Csr::from_lists(&overlaps);
    let overlap_edges = Csr::from_lists(&containing);
    let edge_overlaps = overlap_edges.transpose(edges.len());
    Hypergraph {
        nodes,
        edge_z: and_defs.iter().map(|d| d.z).collect(),
        edge_nodes,
        node_edges,
        overlap_nodes,
        overlap_edges,
        edge_overlaps,
    }
}

#[derive(Debug, Clone, Default)]
pub struct FlowerCuts {
    /// Violated cuts, most violated first.
    pub cuts: Vec<Cut>,
    /// Violation of each cut at the separated point.
    pub violations: Vec<f64>,
    /// (overlap, neighbor) candidates inspected.
    pub candidates_visited: usize,
    /// Neighbor pairs evaluated for k = 2.
    pub pairs_evaluated: usize,
}

struct Neighbor {
    edge: usize,
    /// `e n f` as node indices.
    footprint: Vec<usize>,
}

/// Separates k-flower inequalities (k in {1, 2}) at the point `x`, which
/// holds a value for every engine variable.
pub fn separate_flower(h: &Hypergraph, x: &[f64], k: usize, max_cuts: usize) -> FlowerCuts {
    assert!(k == 1 || k == 2, "only 1- and 2-flowers are separated");
    let mut out = FlowerCuts::default();
    let mut found: Vec<(f64, Cut)> = Vec::new();
    let mut seen: HashSet<(Vec<(Var, i64)>, i64)> = HashSet::new();
    let mut stamp = vec![usize::MAX; h.n_edges()];
    let node_val = |i: usize| x[h.nodes[i]];
    let mut buf = Vec::new();

    for e in 0..h.n_edges() {
        let ev = h.edge(e);
        let ze = x[h.edge_z[e]];
        // best neighbor (largest z_f) per distinct footprint
        let mut by_footprint: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut neighbors: Vec<Neighbor> = Vec::new();
        for &o in h.edge_overlaps.row(e) {
            for &f in h.overlap_edges.row(o) {
                out.candidates_visited += 1;
                if f == e || stamp[f] == e {
                    continue;
                }
                stamp[f] = e;
                intersect_sorted(ev, h.edge(f), &mut buf);
                match by_footprint.get(&buf) {
                    Some(&idx) => {
                        if x[h.edge_z[f]] > x[h.edge_z[neighbors[idx].edge]] {
                            neighbors[idx].edge = f;
                        }
                    }
                    None => {
                        by_footprint.insert(buf.clone(), neighbors.len());
                        neighbors.push(Neighbor {
                            edge: f,
                            footprint: buf.clone(),
                        });
                    }
                }
            }
        }
        let r_sum = |covered: &dyn Fn(usize) -> bool| -> (f64, Vec<usize>) {
            let rest: Vec<usize> = ev.iter().copied().filter(|&v| !covered(v)).collect();
            (rest.iter().map(|&v| 1.0 - node_val(v)).sum(), rest)
        };
        let mut emit = |fs: &[usize], rest: &[usize], lhs: f64| {
            let viol = 1.0 - lhs;
            if viol <= MIN_VIOLATION {
                return;
            }
            let mut coefs = vec![(h.edge_z[e], 1i64)];
            coefs.extend(fs.iter().map(|&f| (h.edge_z[f], -1i64)));
            coefs.extend(rest.iter().map(|&v| (h.nodes[v], -1i64)));
            let kind = if fs.len() == 1 { CutKind::Flower1 } else { CutKind::Flower2 };
            let cut = Cut::new(coefs, 1 - fs.len() as i64 - rest.len() as i64, kind);
            if seen.insert(cut.fingerprint()) {
                found.push((viol, cut));
            }
        };
        if k == 1 {
            for nb in &neighbors {
                let (rs, rest) = r_sum(&|v| nb.footprint.binary_search(&v).is_ok());
                let lhs = ze + (1.0 - x[h.edge_z[nb.edge]]) + rs;
                emit(&[nb.edge], &rest, lhs);
            }
        } else {
            for a in 0..neighbors.len() {
                for b in a + 1..neighbors.len() {
                    out.pairs_evaluated += 1;
                    let (na, nb) = (&neighbors[a], &neighbors[b]);
                    let (rs, rest) = r_sum(&|v| {
                        na.footprint.binary_search(&v).is_ok() || nb.footprint.binary_search(&v).is_ok()
                    });
                    let lhs = ze + (1.0 - x[h.edge_z[na.edge]]) + (1.0 - x[h.edge_z[nb.edge]]) + rs;
                    emit(&[na.edge, nb.edge], &rest, lhs);
                }
            }
        }
    }
    found.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.coefs.cmp(&b.1.coefs)));
    found.truncate(max_cuts);
    for (v, c) in found {
        out.violations.push(v);
        out.cuts.push(c);
    }
    out
}

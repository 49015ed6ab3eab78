//! Primal graphs over quantified variables.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::formula::{QuantFormula, Var};

/// Simple undirected graph on variables. Adjacency is kept symmetric and
/// loop-free; iteration order follows `Var` index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    adj: BTreeMap<Var, BTreeSet<Var>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vertices(vs: impl IntoIterator<Item = Var>) -> Self {
        let mut g = Graph::new();
        for v in vs {
            g.add_vertex(v);
        }
        g
    }

    pub fn from_edges(vs: impl IntoIterator<Item = Var>, edges: &[(Var, Var)]) -> Self {
        let mut g = Graph::with_vertices(vs);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn add_vertex(&mut self, v: Var) {
        self.adj.entry(v).or_default();
    }

    /// Adds `u -- v`, inserting missing endpoints. Self-loops are ignored.
    pub fn add_edge(&mut self, u: Var, v: Var) {
        self.add_vertex(u);
        self.add_vertex(v);
        if u != v {
            self.adj.get_mut(&u).unwrap().insert(v);
            self.adj.get_mut(&v).unwrap().insert(u);
        }
    }

    pub fn add_clique<'a>(&mut self, vs: impl IntoIterator<Item = &'a Var>) {
        let vs: Vec<Var> = vs.into_iter().copied().collect();
        for (i, &u) in vs.iter().enumerate() {
            self.add_vertex(u);
            for &v in &vs[i + 1..] {
                self.add_edge(u, v);
            }
        }
    }

    pub fn vertices(&self) -> impl Iterator<Item = Var> + '_ {
        self.adj.keys().copied()
    }

    pub fn vertex_set(&self) -> BTreeSet<Var> {
        self.adj.keys().copied().collect()
    }

    pub fn contains(&self, v: Var) -> bool {
        self.adj.contains_key(&v)
    }

    pub fn neighbors(&self, v: Var) -> &BTreeSet<Var> {
        static EMPTY: BTreeSet<Var> = BTreeSet::new();
        self.adj.get(&v).unwrap_or(&EMPTY)
    }

    pub fn degree(&self, v: Var) -> usize {
        self.neighbors(v).len()
    }

    pub fn has_edge(&self, u: Var, v: Var) -> bool {
        self.adj.get(&u).is_some_and(|n| n.contains(&v))
    }

    pub fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(Var, Var)> {
        let mut out = Vec::new();
        for (&u, ns) in &self.adj {
            for &v in ns.range(u..) {
                if v != u {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn is_clique<'a>(&self, vs: impl IntoIterator<Item = &'a Var>) -> bool {
        let vs: Vec<Var> = vs.into_iter().copied().collect();
        vs.iter()
            .enumerate()
            .all(|(i, &u)| vs[i + 1..].iter().all(|&v| self.has_edge(u, v)))
    }

    pub fn induced(&self, vs: &BTreeSet<Var>) -> Graph {
        let mut g = Graph::new();
        for &v in vs {
            if let Some(ns) = self.adj.get(&v) {
                g.add_vertex(v);
                for &u in ns.intersection(vs) {
                    g.add_edge(v, u);
                }
            }
        }
        g
    }

    /// Every edge of `self` is an edge of `other` and every vertex a vertex.
    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.vertices().all(|v| other.contains(v))
            && self.edges().iter().all(|&(u, v)| other.has_edge(u, v))
    }

    pub fn is_connected(&self) -> bool {
        connected_components(self).len() <= 1
    }
}

/// Primal graph: quantified variables, adjacent when they share an atom.
pub fn build_primal(f: &QuantFormula) -> Graph {
    let quantified = f.quantified_set();
    primal_from_sets(&quantified, f.atoms().var_sets())
}

pub fn primal_from_sets(
    quantified: &BTreeSet<Var>,
    sets: impl IntoIterator<Item = BTreeSet<Var>>,
) -> Graph {
    let mut g = Graph::with_vertices(quantified.iter().copied());
    for s in sets {
        let q: Vec<&Var> = s.intersection(quantified).collect();
        g.add_clique(q);
    }
    g
}

/// Connected components, ordered by their smallest vertex.
pub fn connected_components(g: &Graph) -> Vec<Graph> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for start in g.vertices() {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &w in g.neighbors(u) {
                if seen.insert(w) {
                    comp.insert(w);
                    queue.push_back(w);
                }
            }
        }
        out.push(g.induced(&comp));
    }
    out
}

//! Tree decompositions: construction from elimination orderings, validation,
//! measurement, and conversion to nice form.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::ops::Deref;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formula::Var;
use crate::graph::{connected_components, Graph};

pub type BagId = usize;

/// A rooted tree of bags.
///
/// Children of every bag are kept sorted by (smallest variable, bag
/// contents, id); all traversals use this order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDecomp {
    bags: Vec<BTreeSet<Var>>,
    parent: Vec<Option<BagId>>,
    children: Vec<Vec<BagId>>,
    root: BagId,
}

impl TreeDecomp {
    /// Builds a decomposition from a parent array with exactly one root.
    pub fn new(bags: Vec<BTreeSet<Var>>, parent: Vec<Option<BagId>>) -> Result<Self> {
        let invalid = |m: &str| Error::InvalidDecomposition(m.to_string());
        if bags.is_empty() {
            return Err(invalid("no bags"));
        }
        if bags.len() != parent.len() {
            return Err(invalid("parent array length differs from bag count"));
        }
        let roots: Vec<BagId> = (0..bags.len()).filter(|&b| parent[b].is_none()).collect();
        if roots.len() != 1 {
            return Err(invalid("expected exactly one root"));
        }
        let mut children = vec![Vec::new(); bags.len()];
        for (b, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= bags.len() || p == b {
                    return Err(invalid("parent out of range"));
                }
                children[p].push(b);
            }
        }
        let key = |b: BagId| {
            let bag = &bags[b];
            (bag.iter().next().map_or(u32::MAX, |v| v.0), bag.clone(), b)
        };
        for cs in &mut children {
            cs.sort_by_key(|&c| key(c));
        }
        let t = TreeDecomp { bags, parent, children, root: roots[0] };
        if t.bfs().len() != t.bags.len() {
            return Err(invalid("parent array contains a cycle"));
        }
        Ok(t)
    }

    /// Builds a decomposition from undirected tree edges, rooted at `root`.
    pub fn from_edges(bags: Vec<BTreeSet<Var>>, edges: &[(BagId, BagId)], root: BagId) -> Result<Self> {
        let invalid = |m: &str| Error::InvalidDecomposition(m.to_string());
        let n = bags.len();
        if root >= n {
            return Err(invalid("root out of range"));
        }
        if edges.len() + 1 != n {
            return Err(invalid("a tree on n bags has n - 1 edges"));
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(invalid("edge endpoint out of range"));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(u);
                    queue.push_back(w);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(invalid("bag tree is disconnected"));
        }
        TreeDecomp::new(bags, parent)
    }

    pub fn single(bag: BTreeSet<Var>) -> Self {
        TreeDecomp::new(vec![bag], vec![None]).unwrap()
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> BagId {
        self.root
    }

    pub fn bags(&self) -> &[BTreeSet<Var>] {
        &self.bags
    }

    pub fn bag(&self, b: BagId) -> &BTreeSet<Var> {
        &self.bags[b]
    }

    pub fn parent(&self, b: BagId) -> Option<BagId> {
        self.parent[b]
    }

    pub fn parents(&self) -> &[Option<BagId>] {
        &self.parent
    }

    pub fn children(&self, b: BagId) -> &[BagId] {
        &self.children[b]
    }

    /// Tree edges as `(parent, child)`.
    pub fn edges(&self) -> Vec<(BagId, BagId)> {
        (0..self.len()).filter_map(|b| self.parent[b].map(|p| (p, b))).collect()
    }

    pub fn vertices(&self) -> BTreeSet<Var> {
        self.bags.iter().flatten().copied().collect()
    }

    /// Largest bag size minus one (0 when every bag is empty).
    pub fn width(&self) -> usize {
        self.bags.iter().map(BTreeSet::len).max().unwrap_or(0).saturating_sub(1)
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.len()];
        for b in self.bfs() {
            if let Some(p) = self.parent[b] {
                depth[b] = depth[p] + 1;
            }
        }
        depth
    }

    /// Breadth-first order from the root.
    pub fn bfs(&self) -> Vec<BagId> {
        let mut out = Vec::with_capacity(self.len());
        let mut queue = VecDeque::from([self.root]);
        let mut seen = vec![false; self.len()];
        seen[self.root] = true;
        while let Some(b) = queue.pop_front() {
            out.push(b);
            for &c in &self.children[b] {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        out
    }

    /// Children before parents.
    pub fn post_order(&self) -> Vec<BagId> {
        let mut out = self.bfs();
        out.reverse();
        out
    }

    pub fn rerooted(&self, root: BagId) -> TreeDecomp {
        TreeDecomp::from_edges(self.bags.clone(), &self.edges(), root).expect("rerooting a valid tree")
    }

    /// Number of edges from `b` to the farthest bag.
    pub fn eccentricity(&self, b: BagId) -> usize {
        let mut adj = vec![Vec::new(); self.len()];
        for (p, c) in self.edges() {
            adj[p].push(c);
            adj[c].push(p);
        }
        let mut dist = vec![usize::MAX; self.len()];
        dist[b] = 0;
        let mut queue = VecDeque::from([b]);
        let mut far = 0;
        while let Some(u) = queue.pop_front() {
            far = far.max(dist[u]);
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        far
    }

    /// The bag closest to the root that contains `v`.
    pub fn top_bag(&self, v: Var) -> Option<BagId> {
        self.bfs().into_iter().find(|&b| self.bags[b].contains(&v))
    }
}

/// A failed tree decomposition condition with a witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// A bag mentions a vertex that is not in the graph.
    UnknownVertex { bag: BagId, vertex: Var },
    UncoveredVertex(Var),
    UncoveredEdge(Var, Var),
    /// The bags containing this vertex do not form a connected subtree.
    DisconnectedOccurrence(Var),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownVertex { bag, vertex } => {
                write!(f, "bag {bag} contains {vertex:?}, which is not a graph vertex")
            }
            Violation::UncoveredVertex(v) => write!(f, "vertex {v:?} is in no bag"),
            Violation::UncoveredEdge(u, v) => write!(f, "edge ({u:?}, {v:?}) is in no bag"),
            Violation::DisconnectedOccurrence(v) => {
                write!(f, "bags containing {v:?} are not connected")
            }
        }
    }
}

pub fn validate_td(g: &Graph, t: &TreeDecomp) -> std::result::Result<(), Violation> {
    for (b, bag) in t.bags().iter().enumerate() {
        if let Some(&v) = bag.iter().find(|&&v| !g.contains(v)) {
            return Err(Violation::UnknownVertex { bag: b, vertex: v });
        }
    }
    // A vertex occurs in a connected subtree iff exactly one of its bags
    // has a parent not containing it.
    let mut tops: BTreeMap<Var, usize> = BTreeMap::new();
    for (b, bag) in t.bags().iter().enumerate() {
        for &v in bag {
            let is_top = t.parent(b).map_or(true, |p| !t.bag(p).contains(&v));
            if is_top {
                *tops.entry(v).or_default() += 1;
            }
        }
    }
    for v in g.vertices() {
        match tops.get(&v) {
            None => return Err(Violation::UncoveredVertex(v)),
            Some(&n) if n > 1 => return Err(Violation::DisconnectedOccurrence(v)),
            _ => {}
        }
    }
    for (u, v) in g.edges() {
        if !t.bags().iter().any(|bag| bag.contains(&u) && bag.contains(&v)) {
            return Err(Violation::UncoveredEdge(u, v));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TdStrategy {
    MinDegree,
    #[default]
    MinFill,
}

/// Elimination ordering chosen greedily by `strategy`. Ties go to the lowest
/// index when `seed` is 0 and are broken at random otherwise.
pub fn elimination_order(g: &Graph, strategy: TdStrategy, seed: u64) -> Vec<Var> {
    let mut fill: BTreeMap<Var, BTreeSet<Var>> =
        g.vertices().map(|v| (v, g.neighbors(v).clone())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(fill.len());
    while !fill.is_empty() {
        let score = |v: Var| -> usize {
            let ns = &fill[&v];
            match strategy {
                TdStrategy::MinDegree => ns.len(),
                TdStrategy::MinFill => {
                    let ns: Vec<Var> = ns.iter().copied().collect();
                    let mut missing = 0;
                    for (i, a) in ns.iter().enumerate() {
                        for b in &ns[i + 1..] {
                            if !fill[a].contains(b) {
                                missing += 1;
                            }
                        }
                    }
                    missing
                }
            }
        };
        let scored: Vec<(usize, Var)> = fill.keys().map(|&v| (score(v), v)).collect();
        let best = scored.iter().map(|s| s.0).min().unwrap();
        let ties: Vec<Var> = scored.iter().filter(|s| s.0 == best).map(|s| s.1).collect();
        let v = if seed == 0 { ties[0] } else { *ties.choose(&mut rng).unwrap() };
        let ns = fill.remove(&v).unwrap();
        for &a in &ns {
            let set = fill.get_mut(&a).unwrap();
            set.remove(&v);
            set.extend(ns.iter().copied().filter(|&b| b != a));
        }
        order.push(v);
    }
    order
}

/// Decomposition induced by an elimination ordering: the bag of `v` is `v`
/// with its neighbours at elimination time, attached to the bag of the
/// earliest-eliminated such neighbour. Bags contained in a neighbour are
/// contracted away.
pub fn td_from_order(g: &Graph, order: &[Var]) -> TreeDecomp {
    if order.is_empty() {
        return TreeDecomp::single(BTreeSet::new());
    }
    let pos: BTreeMap<Var, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut fill: BTreeMap<Var, BTreeSet<Var>> =
        g.vertices().map(|v| (v, g.neighbors(v).clone())).collect();
    let mut bags = Vec::with_capacity(order.len());
    let mut parent = Vec::with_capacity(order.len());
    for &v in order {
        let higher = fill.remove(&v).unwrap_or_default();
        for &a in &higher {
            let set = fill.get_mut(&a).unwrap();
            set.remove(&v);
            set.extend(higher.iter().copied().filter(|&b| b != a));
        }
        parent.push(higher.iter().map(|w| pos[w]).min());
        let mut bag = higher;
        bag.insert(v);
        bags.push(bag);
    }
    // Separate components end in separate roots; hang them under the last.
    let last = order.len() - 1;
    for (b, p) in parent.iter_mut().enumerate() {
        if p.is_none() && b != last {
            *p = Some(last);
        }
    }
    contract(bags, parent, |child, par| child.is_subset(par) || par.is_subset(child))
}

/// Merges adjacent bags for which `mergeable(child, parent)` holds; the
/// merged bag is their union.
fn contract(
    mut bags: Vec<BTreeSet<Var>>,
    mut parent: Vec<Option<BagId>>,
    mergeable: impl Fn(&BTreeSet<Var>, &BTreeSet<Var>) -> bool,
) -> TreeDecomp {
    let n = bags.len();
    let mut alive = vec![true; n];
    loop {
        let mut changed = false;
        for c in 0..n {
            if !alive[c] {
                continue;
            }
            let Some(p) = parent[c] else { continue };
            if mergeable(&bags[c], &bags[p]) {
                let moved = std::mem::take(&mut bags[c]);
                bags[p].extend(moved);
                alive[c] = false;
                for q in parent.iter_mut() {
                    if *q == Some(c) {
                        *q = Some(p);
                    }
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let ids: Vec<BagId> = (0..n).filter(|&b| alive[b]).collect();
    let remap: BTreeMap<BagId, BagId> = ids.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let new_bags = ids.iter().map(|&b| bags[b].clone()).collect();
    let new_parent = ids.iter().map(|&b| parent[b].map(|p| remap[&p])).collect();
    TreeDecomp::new(new_bags, new_parent).expect("contraction keeps a tree")
}

/// Tree decomposition of a connected graph from a min-degree or min-fill
/// elimination ordering.
pub fn heuristic_td(g: &Graph, strategy: TdStrategy, seed: u64) -> Result<TreeDecomp> {
    if !g.is_connected() {
        return Err(Error::DisconnectedGraph);
    }
    Ok(td_from_order(g, &elimination_order(g, strategy, seed)))
}

/// Like [`heuristic_td`] but accepts disconnected graphs: each component is
/// decomposed separately and the component roots are attached to the first
/// one. Components share no vertices, so the result stays valid.
pub fn decompose_graph(g: &Graph, strategy: TdStrategy, seed: u64) -> TreeDecomp {
    let comps = connected_components(g);
    if comps.is_empty() {
        return TreeDecomp::single(BTreeSet::new());
    }
    let mut bags = Vec::new();
    let mut parent = Vec::new();
    let mut first_root = None;
    for comp in &comps {
        let t = heuristic_td(comp, strategy, seed).expect("components are connected");
        let offset = bags.len();
        for b in 0..t.len() {
            bags.push(t.bag(b).clone());
            parent.push(match t.parent(b) {
                Some(p) => Some(p + offset),
                None => first_root,
            });
        }
        first_root.get_or_insert(t.root() + offset);
    }
    TreeDecomp::new(bags, parent).expect("linked components form a tree")
}

/// The graph with every bag turned into a clique.
pub fn chordal_completion(g: &Graph, t: &TreeDecomp) -> Graph {
    let mut h = g.clone();
    for bag in t.bags() {
        h.add_clique(bag);
    }
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BagKind {
    Leaf,
    Introduce(Var),
    Forget(Var),
    Join,
}

/// A rooted decomposition whose bags are tagged leaf, introduce, forget or
/// join, with an empty root bag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NiceTreeDecomp {
    td: TreeDecomp,
    kinds: Vec<BagKind>,
}

impl Deref for NiceTreeDecomp {
    type Target = TreeDecomp;

    fn deref(&self) -> &TreeDecomp {
        &self.td
    }
}

impl NiceTreeDecomp {
    /// Tags the bags of `td`, failing if it is not nice.
    pub fn from_td(td: TreeDecomp) -> Result<Self> {
        let mut kinds = Vec::with_capacity(td.len());
        for b in 0..td.len() {
            kinds.push(infer_kind(&td, b));
        }
        let nt = NiceTreeDecomp { td, kinds };
        check_nice(&nt).map_err(Error::InvalidDecomposition)?;
        Ok(nt)
    }

    pub fn as_td(&self) -> &TreeDecomp {
        &self.td
    }

    pub fn into_td(self) -> TreeDecomp {
        self.td
    }

    pub fn kind(&self, b: BagId) -> BagKind {
        self.kinds[b]
    }

    pub fn kinds(&self) -> &[BagKind] {
        &self.kinds
    }
}

fn infer_kind(td: &TreeDecomp, b: BagId) -> BagKind {
    let bag = td.bag(b);
    match td.children(b) {
        [] => BagKind::Leaf,
        [c] => {
            let child = td.bag(*c);
            if bag.len() == child.len() + 1 {
                BagKind::Introduce(*bag.difference(child).next().unwrap())
            } else if let Some(&v) = child.difference(bag).next() {
                BagKind::Forget(v)
            } else {
                // Identical or otherwise malformed; reported by check_nice.
                BagKind::Join
            }
        }
        _ => BagKind::Join,
    }
}

/// Checks the structural conditions of a nice decomposition.
pub fn check_nice(nt: &NiceTreeDecomp) -> std::result::Result<(), String> {
    let t = nt.as_td();
    if !t.bag(t.root()).is_empty() {
        return Err("root bag is not empty".into());
    }
    for b in 0..t.len() {
        let bag = t.bag(b);
        let cs = t.children(b);
        let ok = match nt.kind(b) {
            BagKind::Leaf => cs.is_empty() && (bag.len() == 1 || (t.len() == 1 && bag.is_empty())),
            BagKind::Join => cs.len() == 2 && cs.iter().all(|&c| t.bag(c) == bag),
            BagKind::Introduce(v) => {
                cs.len() == 1 && !t.bag(cs[0]).contains(&v) && {
                    let mut want = t.bag(cs[0]).clone();
                    want.insert(v);
                    &want == bag
                }
            }
            BagKind::Forget(v) => {
                cs.len() == 1 && t.bag(cs[0]).contains(&v) && {
                    let mut want = t.bag(cs[0]).clone();
                    want.remove(&v);
                    &want == bag
                }
            }
        };
        if !ok {
            return Err(format!("bag {b} {:?} is not a valid {:?} bag", bag, nt.kind(b)));
        }
    }
    Ok(())
}

/// Root used by [`nicify`]: a largest bag, preferring bags near the centre
/// of the tree, then the lowest id.
pub fn choose_root(t: &TreeDecomp) -> BagId {
    (0..t.len())
        .min_by_key(|&b| (std::cmp::Reverse(t.bag(b).len()), t.eccentricity(b), b))
        .unwrap()
}

pub fn nicify(t: &TreeDecomp) -> NiceTreeDecomp {
    nicify_at(t, choose_root(t))
}

/// Converts `t`, rerooted at `root`, into a nice decomposition.
///
/// Identical adjacent bags are merged and empty bags dropped first. A bag
/// with several children becomes a chain of join bags, each child hanging
/// below its own copy of the bag. Between a bag and a differing child,
/// variables are removed in ascending order and then the child's new
/// variables added in ascending order. Below an original leaf, variables are
/// removed until one remains, those shared with the parent going first.
/// Above the root a chain of forget bags leads to the empty root.
pub fn nicify_at(t: &TreeDecomp, root: BagId) -> NiceTreeDecomp {
    let t = simplify_for_nicify(&t.rerooted(root));
    let mut b = Builder::default();
    let top = t.bag(t.root());
    let mut cur = b.push(BTreeSet::new(), None);
    if !top.is_empty() {
        let mut acc = BTreeSet::new();
        for &v in top {
            acc.insert(v);
            cur = b.push(acc.clone(), Some(cur));
        }
        b.emit(&t, t.root(), cur);
    }
    let td = TreeDecomp::new(b.bags, b.parent).expect("builder produces a tree");
    let kinds = (0..td.len()).map(|x| infer_kind(&td, x)).collect();
    NiceTreeDecomp { td, kinds }
}

/// Reroots nothing; merges identical adjacent bags and removes empty bags
/// below the root.
fn simplify_for_nicify(t: &TreeDecomp) -> TreeDecomp {
    let bags = t.bags().to_vec();
    let parent = t.parents().to_vec();
    let t = contract(bags, parent, |c, p| c == p || c.is_empty());
    // An empty root with nonempty descendants: hoist the first child.
    if t.bag(t.root()).is_empty() && t.len() > 1 {
        let c = t.children(t.root())[0];
        let r = t.rerooted(c);
        return contract(r.bags().to_vec(), r.parents().to_vec(), |c, p| c == p || c.is_empty());
    }
    t
}

#[derive(Default)]
struct Builder {
    bags: Vec<BTreeSet<Var>>,
    parent: Vec<Option<BagId>>,
}

impl Builder {
    fn push(&mut self, bag: BTreeSet<Var>, parent: Option<BagId>) -> BagId {
        self.bags.push(bag);
        self.parent.push(parent);
        self.bags.len() - 1
    }

    /// `node` already holds `t.bag(orig)`; build everything below it.
    fn emit(&mut self, t: &TreeDecomp, orig: BagId, node: BagId) {
        let bag = t.bag(orig).clone();
        let cs = t.children(orig);
        match cs.len() {
            0 => {
                let shared: BTreeSet<Var> = match t.parent(orig) {
                    Some(p) => bag.intersection(t.bag(p)).copied().collect(),
                    None => BTreeSet::new(),
                };
                let mut removal: Vec<Var> = shared.iter().rev().copied().collect();
                removal.extend(bag.iter().rev().filter(|v| !shared.contains(v)));
                let mut cur_bag = bag;
                let mut cur = node;
                for v in removal {
                    if cur_bag.len() <= 1 {
                        break;
                    }
                    cur_bag.remove(&v);
                    cur = self.push(cur_bag.clone(), Some(cur));
                }
            }
            1 => self.chain(t, node, &bag, cs[0]),
            k => {
                let mut join = node;
                for (i, &c) in cs[..k - 1].iter().enumerate() {
                    let left = self.push(bag.clone(), Some(join));
                    self.chain(t, left, &bag, c);
                    if i < k - 2 {
                        join = self.push(bag.clone(), Some(join));
                    }
                }
                let right = self.push(bag.clone(), Some(join));
                self.chain(t, right, &bag, cs[k - 1]);
            }
        }
    }

    /// Forget/introduce steps from `from` (holding `from_bag`) down to the
    /// bag of `child`, then recurse.
    fn chain(&mut self, t: &TreeDecomp, from: BagId, from_bag: &BTreeSet<Var>, child: BagId) {
        let target = t.bag(child);
        let mut cur = from;
        let mut cur_bag = from_bag.clone();
        for v in from_bag.difference(target) {
            cur_bag.remove(v);
            cur = self.push(cur_bag.clone(), Some(cur));
        }
        for &v in target.difference(from_bag) {
            cur_bag.insert(v);
            cur = self.push(cur_bag.clone(), Some(cur));
        }
        self.emit(t, child, cur);
    }
}

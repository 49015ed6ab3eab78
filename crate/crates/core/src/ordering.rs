//! Variable elimination orderings: extraction from tree decompositions and
//! the greedy, Brown and random baselines.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cad::PolySet;
use crate::fme::{fme_step, fme_step_capped, ConstraintSet, RawSystem};
use crate::error::Result;
use crate::formula::{LinearAtom, Var};
use crate::graph::Graph;
use crate::treedecomp::TreeDecomp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    FromTd,
    TdGreedy,
    Greedy,
    Random { seed: u64, trial: u64 },
    Brown,
    Natural,
    Given,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElimOrder {
    pub vars: Vec<Var>,
    pub provenance: Provenance,
}

impl ElimOrder {
    pub fn new(vars: Vec<Var>, provenance: Provenance) -> Self {
        ElimOrder { vars, provenance }
    }
}

/// Breadth-first over the decomposition collecting each bag's variables
/// not in its parent (ascending), then reversed.
pub fn order_from_td(t: &TreeDecomp) -> ElimOrder {
    let mut seq = Vec::new();
    for b in t.bfs() {
        let parent = t.parent(b).map(|p| t.bag(p));
        seq.extend(t.bag(b).iter().filter(|v| parent.map_or(true, |p| !p.contains(v))));
    }
    seq.reverse();
    ElimOrder::new(seq, Provenance::FromTd)
}

/// True iff the later neighbours of every vertex form a clique.
pub fn is_peo(g: &Graph, order: &[Var]) -> bool {
    let pos: BTreeMap<Var, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    if pos.len() != order.len() || g.vertices().any(|v| !pos.contains_key(&v)) {
        return false;
    }
    order.iter().enumerate().all(|(i, &v)| {
        let later: Vec<&Var> = g.neighbors(v).iter().filter(|w| pos.get(w).is_some_and(|&j| j > i)).collect();
        g.is_clique(later)
    })
}

/// Result of a greedy run: the order together with the sets it produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedyRun {
    pub order: ElimOrder,
    pub result: ConstraintSet,
    pub per_step: Vec<usize>,
}

/// Picks, among `candidates`, the variable whose elimination leaves the
/// fewest atoms, ties to the lowest index.
fn best_step(c: &ConstraintSet, candidates: impl IntoIterator<Item = Var>, cap: Option<usize>) -> Result<(Var, ConstraintSet)> {
    let mut best: Option<(usize, Var, ConstraintSet)> = None;
    let mut last_err = None;
    for x in candidates {
        match fme_step_capped(c, x, cap) {
            Ok(next) => {
                if best.as_ref().map_or(true, |(n, _, _)| next.len() < *n) {
                    best = Some((next.len(), x, next));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some((_, x, next)), _) => Ok((x, next)),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("no candidates"),
    }
}

/// Repeatedly eliminates the variable producing the smallest set.
pub fn greedy_order(c: &ConstraintSet, vars: &BTreeSet<Var>) -> GreedyRun {
    greedy_order_capped(c, vars, None).expect("no cap")
}

/// [`greedy_order`] where simulated steps that would exceed `cap` are
/// skipped; fails only if every remaining candidate exceeds it.
pub fn greedy_order_capped(c: &ConstraintSet, vars: &BTreeSet<Var>, cap: Option<usize>) -> Result<GreedyRun> {
    let mut remaining = vars.clone();
    let mut cur = c.clone();
    let mut order = Vec::new();
    let mut per_step = Vec::new();
    while !remaining.is_empty() {
        let (x, next) = best_step(&cur, remaining.iter().copied(), cap)?;
        remaining.remove(&x);
        order.push(x);
        per_step.push(next.len());
        cur = next;
    }
    Ok(GreedyRun { order: ElimOrder::new(order, Provenance::Greedy), result: cur, per_step })
}

/// Greedy selection under raw counting: each candidate is scored by the
/// size of the undeduplicated system its elimination produces. Candidates
/// whose step would exceed `cap` are skipped.
pub fn greedy_order_raw(atoms: &[LinearAtom], vars: &BTreeSet<Var>, cap: Option<usize>) -> Result<(ElimOrder, Vec<usize>)> {
    let mut remaining = vars.clone();
    let mut cur = RawSystem::new(atoms);
    let mut order = Vec::new();
    let mut per_step = Vec::new();
    while !remaining.is_empty() {
        let mut best: Option<(Var, RawSystem)> = None;
        let mut last_err = None;
        for &x in &remaining {
            match cur.step(x, cap) {
                Ok(next) => {
                    if best.as_ref().map_or(true, |(_, b)| next.len() < b.len()) {
                        best = Some((x, next));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        let (x, next) = match (best, last_err) {
            (Some(b), _) => b,
            (None, Some(e)) => return Err(e),
            (None, None) => unreachable!("no candidates"),
        };
        remaining.remove(&x);
        order.push(x);
        per_step.push(next.len());
        cur = next;
    }
    Ok((ElimOrder::new(order, Provenance::Greedy), per_step))
}

/// Greedy choice restricted to the orders the decomposition allows: a
/// variable becomes eligible once every variable whose top bag lies
/// strictly below its own top bag has been eliminated.
pub fn td_greedy_order(c: &ConstraintSet, t: &TreeDecomp, cap: Option<usize>) -> Result<GreedyRun> {
    let vars: Vec<Var> = t.vertices().into_iter().collect();
    let top: BTreeMap<Var, usize> = vars.iter().map(|&v| (v, t.top_bag(v).unwrap())).collect();
    let mut below: BTreeMap<usize, BTreeSet<Var>> = BTreeMap::new();
    for &v in &vars {
        let mut b = top[&v];
        while let Some(p) = t.parent(b) {
            below.entry(p).or_default().insert(v);
            b = p;
        }
    }
    let mut remaining: BTreeSet<Var> = vars.iter().copied().collect();
    let mut cur = c.clone();
    let mut order = Vec::new();
    let mut per_step = Vec::new();
    while !remaining.is_empty() {
        let eligible: Vec<Var> = remaining
            .iter()
            .copied()
            .filter(|v| below.get(&top[v]).map_or(true, |s| s.is_disjoint(&remaining)))
            .collect();
        let (x, next) = best_step(&cur, eligible, cap)?;
        remaining.remove(&x);
        order.push(x);
        per_step.push(next.len());
        cur = next;
    }
    Ok(GreedyRun { order: ElimOrder::new(order, Provenance::TdGreedy), result: cur, per_step })
}

/// `n_trials` independent uniform permutations; trial `i` uses stream `i`
/// of a generator seeded with `seed`.
pub fn random_orders(vars: &BTreeSet<Var>, n_trials: u64, seed: u64) -> Vec<ElimOrder> {
    (0..n_trials)
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let mut vs: Vec<Var> = vars.iter().copied().collect();
            vs.shuffle(&mut rng);
            ElimOrder::new(vs, Provenance::Random { seed, trial })
        })
        .collect()
}

/// Brown's heuristic: repeatedly take the variable with the lowest maximum
/// degree over the polynomials; ties go to the lowest maximum total degree
/// of a term containing it, then the fewest terms containing it, then the
/// lowest index. Statistics are taken on the input set.
pub fn brown_order(p: &PolySet, vars: &BTreeSet<Var>) -> ElimOrder {
    let key = |v: Var| {
        let mut max_deg = 0;
        let mut max_tdeg = 0;
        let mut n_terms = 0usize;
        for f in p.iter() {
            max_deg = max_deg.max(f.degree(v));
            for (m, _) in f.terms() {
                if m.contains(v) {
                    max_tdeg = max_tdeg.max(m.total_degree());
                    n_terms += 1;
                }
            }
        }
        (max_deg, max_tdeg, n_terms, v)
    };
    let mut keyed: Vec<_> = vars.iter().map(|&v| key(v)).collect();
    keyed.sort();
    ElimOrder::new(keyed.into_iter().map(|k| k.3).collect(), Provenance::Brown)
}

/// Quantified variables in index order.
pub fn natural_order(vars: &BTreeSet<Var>) -> ElimOrder {
    ElimOrder::new(vars.iter().copied().collect(), Provenance::Natural)
}

/// Single-step sizes of eliminating each variable from `c`.
pub fn single_step_sizes(c: &ConstraintSet, vars: &BTreeSet<Var>) -> BTreeMap<Var, usize> {
    vars.iter().map(|&x| (x, fme_step(c, x).len())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{LinearAtom, Relation};
    use crate::poly::Poly;

    fn v(i: u32) -> Var {
        Var(i - 1)
    }

    fn example_graph() -> Graph {
        let es = [(1, 3), (1, 2), (2, 3), (2, 4), (3, 4), (2, 5), (4, 5), (4, 6), (5, 6), (6, 7), (8, 2), (8, 5)];
        let es: Vec<(Var, Var)> = es.iter().map(|&(a, b)| (v(a), v(b))).collect();
        Graph::from_edges([], &es)
    }

    fn ord(is: &[u32]) -> Vec<Var> {
        is.iter().map(|&i| v(i)).collect()
    }

    #[test]
    fn peo_examples() {
        assert!(is_peo(&example_graph(), &ord(&[1, 3, 8, 7, 6, 5, 4, 2])));
        assert!(!is_peo(&example_graph(), &ord(&[2, 1, 3, 4, 5, 6, 7, 8])));
        let mut k4 = Graph::new();
        k4.add_clique(&ord(&[1, 2, 3, 4]));
        assert!(is_peo(&k4, &ord(&[3, 1, 4, 2])));
    }

    #[test]
    fn order_from_path_decomposition() {
        let bags = vec![ord(&[3, 4]), ord(&[2, 3]), ord(&[1, 2])];
        let bags = bags.into_iter().map(|b| b.into_iter().collect()).collect();
        let t = TreeDecomp::new(bags, vec![None, Some(0), Some(1)]).unwrap();
        let o = order_from_td(&t);
        assert_eq!(o.vars, ord(&[1, 2, 4, 3]));
        let path = Graph::from_edges([], &[(v(1), v(2)), (v(2), v(3)), (v(3), v(4))]);
        assert!(is_peo(&path, &o.vars));

        let single = TreeDecomp::single(ord(&[2, 1, 3]).into_iter().collect());
        assert_eq!(order_from_td(&single).vars, ord(&[3, 2, 1]));
    }

    #[test]
    fn greedy_prefers_equality_variable() {
        // x2 only occurs in an equality, so eliminating it just drops that
        // atom; eliminating x1 creates four new ones.
        let c = ConstraintSet::from_atoms([
            LinearAtom::from_ints(&[(v(2), 1), (v(3), -1)], 0, Relation::Eq),
            LinearAtom::from_ints(&[(v(1), 1), (v(3), 1)], 1, Relation::Le),
            LinearAtom::from_ints(&[(v(1), 1), (v(3), 2)], 5, Relation::Le),
            LinearAtom::from_ints(&[(v(1), -1), (v(3), 3)], 1, Relation::Le),
            LinearAtom::from_ints(&[(v(1), -1), (v(3), -5)], 7, Relation::Le),
        ]);
        let vs: BTreeSet<Var> = ord(&[1, 2]).into_iter().collect();
        let sizes = single_step_sizes(&c, &vs);
        assert_eq!((sizes[&v(1)], sizes[&v(2)]), (5, 4));
        let run = greedy_order(&c, &vs);
        assert_eq!(run.order.vars, ord(&[2, 1]));
        let run = greedy_order(&c, &ord(&[3]).into_iter().collect());
        assert_eq!(run.order.vars, ord(&[3]));
    }

    #[test]
    fn random_orders_are_reproducible() {
        let vs: BTreeSet<Var> = ord(&[1, 2, 3, 4, 5]).into_iter().collect();
        let a = random_orders(&vs, 5, 42);
        assert_eq!(a, random_orders(&vs, 5, 42));
        assert_eq!(a.len(), 5);
        let one: BTreeSet<Var> = [v(1)].into_iter().collect();
        assert!(random_orders(&one, 3, 7).iter().all(|o| o.vars == vec![v(1)]));
    }

    #[test]
    fn brown_examples() {
        let (x, y, z) = (Poly::var(v(1)), Poly::var(v(2)), Poly::var(v(3)));
        let p: PolySet = [&x.pow(3) + &y, &y.pow(2) + &z].into_iter().collect();
        let vs: BTreeSet<Var> = ord(&[1, 2, 3]).into_iter().collect();
        assert_eq!(brown_order(&p, &vs).vars, ord(&[3, 2, 1]));
        let sym: PolySet = [&(&x + &y) + &z].into_iter().collect();
        assert_eq!(brown_order(&sym, &vs).vars, ord(&[1, 2, 3]));
    }
}

//! CAD projection: the McCallum operator, order-driven projection sequences,
//! the projection dynamic program, and (m, d)-property certificates.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::fme::assign_items;
use crate::formula::{QuantFormula, Var};
use crate::graph::build_primal;
use crate::poly::Poly;
use crate::polyalg::{content_primitive, discriminant, resultant, squarefree_basis};
use crate::treedecomp::{validate_td, BagId, BagKind, NiceTreeDecomp};

/// Nonconstant polynomials in primitive integer form with positive leading
/// coefficient, so sets compare modulo nonzero constant factors.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolySet {
    polys: BTreeSet<Poly>,
}

impl PolySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Normalizes and adds `p`; constants are dropped.
    pub fn insert(&mut self, p: &Poly) {
        if !p.is_constant() {
            self.polys.insert(p.normalized());
        }
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Poly> {
        self.polys.iter()
    }

    pub fn contains(&self, p: &Poly) -> bool {
        self.polys.contains(&p.normalized())
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.polys.iter().flat_map(Poly::vars).collect()
    }

    pub fn union_with(&mut self, other: &PolySet) {
        self.polys.extend(other.polys.iter().cloned());
    }

    /// Largest degree of any member in `v`.
    pub fn max_degree(&self, v: Var) -> u32 {
        self.polys.iter().map(|p| p.degree(v)).max().unwrap_or(0)
    }
}

impl<'a> FromIterator<&'a Poly> for PolySet {
    fn from_iter<I: IntoIterator<Item = &'a Poly>>(iter: I) -> Self {
        let mut s = PolySet::new();
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl FromIterator<Poly> for PolySet {
    fn from_iter<I: IntoIterator<Item = Poly>>(iter: I) -> Self {
        let mut s = PolySet::new();
        for p in iter {
            s.insert(&p);
        }
        s
    }
}

/// Per-variable degree of the product of `polys`.
fn product_degrees<'a>(polys: impl IntoIterator<Item = &'a Poly>) -> BTreeMap<Var, u32> {
    let mut degs = BTreeMap::new();
    for p in polys {
        for v in p.vars() {
            *degs.entry(v).or_insert(0) += p.degree(v);
        }
    }
    degs
}

/// `max_i deg_{x_i}` of the product of the set.
pub fn combined_degree(p: &PolySet) -> Result<u32> {
    if p.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(product_degrees(p.iter()).into_values().max().unwrap_or(0))
}

/// McCallum projection of `p` with respect to `x`.
///
/// Members without `x` pass through. For the rest the result holds their
/// contents, and the coefficients, discriminants and pairwise resultants of
/// a square-free basis of their primitive parts.
pub fn mccallum_proj(p: &PolySet, x: Var) -> PolySet {
    let mut out = PolySet::new();
    let mut prims = Vec::new();
    for f in p.iter() {
        if !f.contains(x) {
            out.insert(f);
            continue;
        }
        let (cont, prim) = content_primitive(f, x).expect("members are nonzero");
        out.insert(&cont);
        prims.push(prim);
    }
    let basis = squarefree_basis(&prims, x);
    let b = basis.polys();
    for f in b {
        for c in f.coeffs(x) {
            out.insert(&c);
        }
        if f.degree(x) >= 2 {
            out.insert(&discriminant(f, x).expect("degree checked"));
        }
    }
    for (i, f) in b.iter().enumerate() {
        for g in &b[i + 1..] {
            out.insert(&resultant(f, g, x).expect("basis elements mention x"));
        }
    }
    out
}

/// `[P, Proj(P, order[0]), Proj(Proj(P, order[0]), order[1]), ...]`.
pub fn projection_sequence(p: &PolySet, order: &[Var]) -> Vec<PolySet> {
    let mut seq = vec![p.clone()];
    for &x in order {
        let next = mccallum_proj(seq.last().unwrap(), x);
        seq.push(next);
    }
    seq
}

/// Polynomials of a formula's atoms (`poly REL 0`), constants dropped.
pub fn formula_polys(f: &QuantFormula) -> Vec<Poly> {
    f.poly_atoms().into_iter().map(|a| a.poly().clone()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CadDpOutcome {
    pub result: PolySet,
    pub initial: Vec<PolySet>,
    pub value: Vec<PolySet>,
    pub order: Vec<Var>,
    pub per_step: Vec<usize>,
}

pub fn cad_dp(f: &QuantFormula, t: &NiceTreeDecomp) -> Result<PolySet> {
    Ok(cad_dp_traced(f, t, &t.bfs())?.result)
}

/// The FME dynamic program with the McCallum operator at forget bags.
pub fn cad_dp_traced(f: &QuantFormula, t: &NiceTreeDecomp, visit: &[BagId]) -> Result<CadDpOutcome> {
    let g = build_primal(f);
    validate_td(&g, t).map_err(|v| Error::InvalidDecomposition(v.to_string()))?;
    let polys: Vec<Poly> = formula_polys(f);
    let sets: Vec<BTreeSet<Var>> = polys.iter().map(Poly::vars).collect();
    let (per_bag, passthrough) = assign_items(t, &sets, &f.quantified_set(), visit)?;
    let initial: Vec<PolySet> = per_bag.iter().map(|ids| ids.iter().map(|&i| &polys[i]).collect()).collect();
    let mut value = vec![PolySet::new(); t.len()];
    let mut order = Vec::new();
    let mut per_step = Vec::new();
    for b in t.post_order() {
        let mut v = initial[b].clone();
        match t.kind(b) {
            BagKind::Leaf => {}
            BagKind::Introduce(_) | BagKind::Join => {
                for &c in t.children(b) {
                    v.union_with(&value[c]);
                }
            }
            BagKind::Forget(x) => {
                v.union_with(&mccallum_proj(&value[t.children(b)[0]], x));
                order.push(x);
                per_step.push(v.len());
            }
        }
        value[b] = v;
    }
    let mut result = value[t.root()].clone();
    for &i in &passthrough {
        result.insert(&polys[i]);
    }
    Ok(CadDpOutcome { result, initial, value, order, per_step })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SearchMode {
    Exhaustive,
    Greedy,
}

/// A partition of a polynomial set into groups with bounded combined degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MDCertificate {
    pub partition: Vec<PolySet>,
    pub m: usize,
    pub d: u32,
    pub mode: SearchMode,
}

/// Largest input size searched exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 15;

/// Partitions `p` into at most `max_groups` groups minimizing the largest
/// group combined degree.
///
/// Sets of at most [`EXHAUSTIVE_LIMIT`] polynomials are searched
/// exhaustively; larger ones use first-fit decreasing. With `bound`, returns
/// `None` when the search proves no partition achieves degree `<= bound`
/// (greedy results above the bound are also `None`). An empty set yields an
/// empty partition with `d = 0`.
pub fn md_certificate(p: &PolySet, max_groups: usize, bound: Option<u32>) -> Option<MDCertificate> {
    let polys: Vec<&Poly> = p.iter().collect();
    if polys.is_empty() {
        return Some(MDCertificate { partition: Vec::new(), m: 0, d: 0, mode: SearchMode::Exhaustive });
    }
    if max_groups == 0 {
        return None;
    }
    let vars: Vec<Var> = p.vars().into_iter().collect();
    let degs: Vec<Vec<u32>> = polys.iter().map(|f| vars.iter().map(|&v| f.degree(v)).collect()).collect();
    let (assign, d, mode) = if polys.len() <= EXHAUSTIVE_LIMIT {
        let (a, d) = exhaustive_partition(&degs, vars.len(), max_groups);
        (a, d, SearchMode::Exhaustive)
    } else {
        let (a, d) = greedy_partition(&degs, vars.len(), max_groups);
        (a, d, SearchMode::Greedy)
    };
    if bound.is_some_and(|b| d > b) {
        return None;
    }
    let groups = assign.iter().max().map_or(0, |m| m + 1);
    let mut partition = vec![PolySet::new(); groups];
    for (i, &g) in assign.iter().enumerate() {
        partition[g].insert(polys[i]);
    }
    Some(MDCertificate { m: partition.len(), partition, d, mode })
}

fn group_degree(sums: &[u32]) -> u32 {
    sums.iter().copied().max().unwrap_or(0)
}

fn exhaustive_partition(degs: &[Vec<u32>], nv: usize, max_groups: usize) -> (Vec<usize>, u32) {
    struct Search<'a> {
        degs: &'a [Vec<u32>],
        max_groups: usize,
        sums: Vec<Vec<u32>>,
        assign: Vec<usize>,
        best: u32,
        best_assign: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, cur: u32) {
            if cur >= self.best {
                return;
            }
            if i == self.degs.len() {
                self.best = cur;
                self.best_assign = self.assign.clone();
                return;
            }
            // Restricted growth: item i may open at most one new group.
            let open = self.sums.len();
            for g in 0..(open + 1).min(self.max_groups) {
                if g == open {
                    self.sums.push(vec![0; self.degs[i].len()]);
                }
                for (s, d) in self.sums[g].iter_mut().zip(&self.degs[i]) {
                    *s += d;
                }
                let next = cur.max(group_degree(&self.sums[g]));
                self.assign.push(g);
                self.go(i + 1, next);
                self.assign.pop();
                for (s, d) in self.sums[g].iter_mut().zip(&self.degs[i]) {
                    *s -= d;
                }
                if g == open {
                    self.sums.pop();
                }
            }
        }
    }
    let (greedy, gd) = greedy_partition(degs, nv, max_groups);
    let mut s = Search {
        degs,
        max_groups,
        sums: Vec::new(),
        assign: Vec::new(),
        best: gd + 1,
        best_assign: greedy,
    };
    s.go(0, 0);
    let best = s.best.min(gd);
    (s.best_assign, best)
}

/// First-fit decreasing by total degree into the group that grows the
/// current maximum least.
fn greedy_partition(degs: &[Vec<u32>], nv: usize, max_groups: usize) -> (Vec<usize>, u32) {
    let mut idx: Vec<usize> = (0..degs.len()).collect();
    idx.sort_by_key(|&i| (std::cmp::Reverse(degs[i].iter().sum::<u32>()), i));
    let mut sums: Vec<Vec<u32>> = Vec::new();
    let mut assign = vec![0; degs.len()];
    for i in idx {
        let mut best: Option<(u32, usize)> = None;
        for (g, s) in sums.iter().enumerate() {
            let d = s.iter().zip(&degs[i]).map(|(a, b)| a + b).max().unwrap_or(0);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, g));
            }
        }
        let fresh = degs[i].iter().copied().max().unwrap_or(0);
        let g = match best {
            Some((d, g)) if sums.len() >= max_groups || d <= fresh => g,
            _ => {
                sums.push(vec![0; nv]);
                sums.len() - 1
            }
        };
        for (s, d) in sums[g].iter_mut().zip(&degs[i]) {
            *s += d;
        }
        assign[i] = g;
    }
    let d = sums.iter().map(|s| group_degree(s)).max().unwrap_or(0);
    (assign, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> Var {
        Var(i)
    }
    fn p(i: u32) -> Poly {
        Poly::var(v(i))
    }
    fn c(k: i64) -> Poly {
        Poly::int(k)
    }

    fn set(ps: &[Poly]) -> PolySet {
        ps.iter().collect()
    }

    #[test]
    fn combined_degree_examples() {
        let x = p(0);
        let y = p(1);
        assert_eq!(combined_degree(&set(&[&x.pow(2) + &c(1)])), Ok(2));
        assert_eq!(combined_degree(&set(&[&x.pow(2) * &y, &x * &y.pow(3)])), Ok(4));
        assert_eq!(combined_degree(&set(&[&x + &y, &x - &y])), Ok(2));
        assert_eq!(combined_degree(&PolySet::new()), Err(Error::EmptySet));
    }

    #[test]
    fn projection_examples() {
        let (x, y) = (p(0), p(1));
        let circle = &(&x.pow(2) + &y.pow(2)) - &c(1);
        let want = set(&[&y.pow(2) - &c(1)]);
        assert_eq!(mccallum_proj(&set(&[circle.clone()]), v(0)), want);

        assert_eq!(mccallum_proj(&set(&[&x - &y]), v(0)), set(&[y.clone()]));

        let no_x = set(&[&y.pow(2) + &p(2), p(2)]);
        assert_eq!(mccallum_proj(&no_x, v(0)), no_x);

        let seq = projection_sequence(&set(&[circle]), &[v(0), v(1)]);
        assert_eq!(seq.len(), 3);
        assert_eq!(seq[1], want);
        assert!(seq[2].is_empty());

        assert!(projection_sequence(&PolySet::new(), &[v(0), v(1)]).iter().all(PolySet::is_empty));
    }

    #[test]
    fn projection_drops_projected_variable() {
        let (x, y, z) = (p(0), p(1), p(2));
        let f = &(&(&x.pow(2) * &y) + &(&x * &z)) - &c(3);
        let g = &(&x * &y) + &z.pow(2);
        let out = mccallum_proj(&set(&[f, g]), v(0));
        assert!(out.iter().all(|q| !q.contains(v(0))));
        assert!(out.vars().is_subset(&[v(1), v(2)].into_iter().collect()));
    }

    #[test]
    fn certificate_examples() {
        let (x, y) = (p(0), p(1));
        let cert = md_certificate(&set(&[x.pow(2), y.pow(2)]), 2, None).unwrap();
        assert_eq!(cert.d, 2);
        assert_eq!(cert.mode, SearchMode::Exhaustive);

        let cert = md_certificate(&set(&[x.clone(), x.pow(2), x.pow(3)]), 1, None).unwrap();
        assert_eq!((cert.m, cert.d), (1, 6));
        assert_eq!(md_certificate(&set(&[x.clone(), x.pow(2), x.pow(3)]), 1, Some(5)), None);

        let cert = md_certificate(&set(&[x.clone(), x.pow(2), x.pow(3)]), 2, None).unwrap();
        assert_eq!(cert.d, 3);
    }
}

//! Fourier-Motzkin elimination: single steps, order-driven folds, and the
//! bottom-up dynamic program over a nice tree decomposition.

use std::collections::{BTreeSet, HashMap};

use indexmap::IndexSet;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::formula::{ConstVerdict, LinearAtom, Normalized, QuantFormula, Rat, Relation, Var};
use crate::graph::build_primal;
use crate::treedecomp::{validate_td, BagId, BagKind, NiceTreeDecomp, TreeDecomp};

/// A conjunction of canonical, non-constant linear atoms, plus a flag set
/// once a trivially false atom has been derived.
///
/// Deriving FALSE does not discard the other atoms: elimination carries on
/// so that set sizes stay comparable across orders. Atoms keep insertion
/// order for printing; equality ignores it.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    atoms: IndexSet<LinearAtom>,
    falsified: bool,
}

impl PartialEq for ConstraintSet {
    fn eq(&self, other: &Self) -> bool {
        self.falsified == other.falsified
            && self.atoms.len() == other.atoms.len()
            && self.atoms.iter().all(|a| other.atoms.contains(a))
    }
}

impl Eq for ConstraintSet {}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn falsum() -> Self {
        ConstraintSet { atoms: IndexSet::new(), falsified: true }
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = LinearAtom>) -> Self {
        let mut c = ConstraintSet::new();
        for a in atoms {
            c.insert(a);
        }
        c
    }

    /// Normalizes and adds `a`. Trivially true atoms are dropped; a
    /// trivially false one sets the FALSE flag.
    pub fn insert(&mut self, a: LinearAtom) {
        match a.normalize() {
            Normalized::Atom(a) => {
                self.atoms.insert(a);
            }
            Normalized::Const(ConstVerdict::TriviallyTrue) => {}
            Normalized::Const(ConstVerdict::TriviallyFalse) => self.set_false(),
        }
    }

    fn insert_canonical(&mut self, a: &LinearAtom) {
        if !self.atoms.contains(a) {
            self.atoms.insert(a.clone());
        }
    }

    pub fn union_with(&mut self, other: &ConstraintSet) {
        if other.falsified {
            self.set_false();
        }
        for a in &other.atoms {
            self.insert_canonical(a);
        }
    }

    fn set_false(&mut self) {
        self.falsified = true;
    }

    pub fn is_false(&self) -> bool {
        self.falsified
    }

    /// Number of non-constant atoms; the FALSE flag is not counted.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &LinearAtom> {
        self.atoms.iter()
    }

    pub fn contains(&self, a: &LinearAtom) -> bool {
        match a.normalize() {
            Normalized::Atom(a) => self.atoms.contains(&a),
            Normalized::Const(_) => false,
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.atoms.iter().flat_map(LinearAtom::var_iter).collect()
    }

    /// Atoms in sorted order, for comparisons and deterministic output.
    pub fn canonical(&self) -> BTreeSet<LinearAtom> {
        self.atoms.iter().cloned().collect()
    }

    pub fn eval(&self, point: &HashMap<Var, Rat>) -> Result<bool> {
        if self.falsified {
            return Ok(false);
        }
        for a in &self.atoms {
            if !a.eval(point)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// An upper or lower bound on the eliminated variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bound {
    pub atom: LinearAtom,
    /// Coefficient of the variable in `atom`: positive for upper bounds,
    /// negative for lower bounds.
    pub coeff: BigInt,
}

/// `sum(coeff * var) + constant` over rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearTerm {
    pub coeffs: Vec<(Var, Rat)>,
    pub constant: Rat,
}

impl LinearTerm {
    pub fn eval(&self, point: &HashMap<Var, Rat>) -> Result<Rat> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            acc += c * point.get(v).ok_or(Error::MissingAssignment(*v))?;
        }
        Ok(acc)
    }
}

impl Bound {
    pub fn strict(&self) -> bool {
        self.atom.rel().is_strict()
    }

    /// The bounding term: `x <= term` for upper bounds, `term <= x` for
    /// lower bounds (strict when [`Bound::strict`]).
    pub fn term(&self, x: Var) -> LinearTerm {
        let a = Rat::from_integer(self.coeff.clone());
        let coeffs = self
            .atom
            .terms()
            .iter()
            .filter(|(v, _)| *v != x)
            .map(|(v, c)| (*v, -Rat::from_integer(c.clone()) / &a))
            .collect();
        LinearTerm { coeffs, constant: Rat::from_integer(self.atom.rhs().clone()) / &a }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bounds {
    pub lower: Vec<Bound>,
    pub upper: Vec<Bound>,
    pub eqs: Vec<LinearAtom>,
    pub rest: ConstraintSet,
}

/// Splits `c` by the role `x` plays in each atom.
pub fn bounds(c: &ConstraintSet, x: Var) -> Bounds {
    let mut out = Bounds::default();
    out.rest.falsified = c.falsified;
    for a in c.atoms() {
        match a.coeff(x) {
            None => out.rest.insert_canonical(a),
            Some(_) if a.rel() == Relation::Eq => out.eqs.push(a.clone()),
            Some(k) => {
                let b = Bound { atom: a.clone(), coeff: k.clone() };
                if k.is_positive() {
                    out.upper.push(b);
                } else {
                    out.lower.push(b);
                }
            }
        }
    }
    out
}

/// `ma * a + mb * b` with relation `rel`; the multipliers must not flip
/// either relation.
fn combine(a: &LinearAtom, ma: &BigInt, b: &LinearAtom, mb: &BigInt, rel: Relation) -> LinearAtom {
    let (ta, tb) = (a.terms(), b.terms());
    let mut terms = Vec::with_capacity(ta.len() + tb.len());
    let (mut i, mut j) = (0, 0);
    while i < ta.len() || j < tb.len() {
        let next = match (ta.get(i), tb.get(j)) {
            (Some((va, ca)), Some((vb, _))) if va < vb => {
                i += 1;
                (*va, ca * ma)
            }
            (Some((va, _)), Some((vb, cb))) if vb < va => {
                j += 1;
                (*vb, cb * mb)
            }
            (Some((va, ca)), Some((_, cb))) => {
                i += 1;
                j += 1;
                (*va, ca * ma + cb * mb)
            }
            (Some((va, ca)), None) => {
                i += 1;
                (*va, ca * ma)
            }
            (None, Some((vb, cb))) => {
                j += 1;
                (*vb, cb * mb)
            }
            (None, None) => unreachable!(),
        };
        if !next.1.is_zero() {
            terms.push(next);
        }
    }
    LinearAtom::from_sorted(terms, a.rhs() * ma + b.rhs() * mb, rel)
}

fn strictest(a: Relation, b: Relation) -> Relation {
    if a.is_strict() || b.is_strict() {
        Relation::Lt
    } else {
        Relation::Le
    }
}

/// The equality used to substitute `x` away: fewest variables, then
/// smallest canonical form.
fn pick_equality(eqs: &[LinearAtom]) -> Option<&LinearAtom> {
    eqs.iter().min_by(|a, b| (a.terms().len(), *a).cmp(&(b.terms().len(), *b)))
}

/// Rewrites `a` with the variable eliminated using equality `e`, whose
/// coefficient of `x` is `ce`.
fn substitute(a: &LinearAtom, e: &LinearAtom, ce: &BigInt, x: Var) -> LinearAtom {
    match a.coeff(x) {
        None => a.clone(),
        Some(ca) => {
            let factor = if ce.is_negative() { ca.clone() } else { -ca };
            combine(a, &ce.abs(), e, &factor, a.rel())
        }
    }
}

/// Eliminates `x` from `c`.
///
/// If an equality mentions `x` it is solved for `x` and substituted into
/// every other atom. Otherwise every lower bound is paired with every upper
/// bound; the combination is strict when either bound is. Atoms without `x`
/// are kept.
pub fn fme_step(c: &ConstraintSet, x: Var) -> ConstraintSet {
    fme_step_capped(c, x, None).expect("no cap")
}

/// [`fme_step`] that refuses to start when the step could produce more than
/// `cap` atoms before deduplication.
pub fn fme_step_capped(c: &ConstraintSet, x: Var, cap: Option<usize>) -> Result<ConstraintSet> {
    let b = bounds(c, x);
    if let Some(e) = pick_equality(&b.eqs) {
        let ce = e.coeff(x).unwrap().clone();
        let mut out = ConstraintSet { falsified: c.falsified, ..Default::default() };
        for a in c.atoms() {
            if a != e {
                out.insert(substitute(a, e, &ce, x));
            }
        }
        return Ok(out);
    }
    if let Some(cap) = cap {
        let bound = b.rest.len().saturating_add(b.lower.len().saturating_mul(b.upper.len()));
        if bound > cap {
            return Err(Error::CapExceeded { cap });
        }
    }
    let mut out = b.rest;
    for l in &b.lower {
        let ml = -&l.coeff;
        for u in &b.upper {
            out.insert(combine(&l.atom, &u.coeff, &u.atom, &ml, strictest(l.atom.rel(), u.atom.rel())));
        }
    }
    Ok(out)
}

pub fn fme_order(c: &ConstraintSet, order: &[Var]) -> ConstraintSet {
    order.iter().fold(c.clone(), |acc, &x| fme_step(&acc, x))
}

/// Sizes recorded along an elimination.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FmeTrace {
    pub result: ConstraintSet,
    pub initial: usize,
    /// Set size after each step.
    pub per_step: Vec<usize>,
    pub peak: usize,
    /// Index of the step that produced FALSE, if any.
    pub false_step: Option<usize>,
}

pub fn fme_trace(c: &ConstraintSet, order: &[Var], cap: Option<usize>) -> Result<FmeTrace> {
    let mut cur = c.clone();
    let mut t = FmeTrace { initial: c.len(), peak: c.len(), ..Default::default() };
    for (i, &x) in order.iter().enumerate() {
        let was_false = cur.is_false();
        cur = fme_step_capped(&cur, x, cap)?;
        if cur.is_false() && !was_false {
            t.false_step = Some(i);
        }
        t.per_step.push(cur.len());
        t.peak = t.peak.max(cur.len());
    }
    t.result = cur;
    Ok(t)
}

/// Elimination without canonicalization or deduplication, for comparing
/// against counts that keep every generated inequality.
///
/// `>`/`>=` are rewritten as `<`/`<=` but nothing is divided out, and
/// constant atoms are kept and counted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawSystem {
    atoms: Vec<LinearAtom>,
}

impl RawSystem {
    pub fn new<'a>(atoms: impl IntoIterator<Item = &'a LinearAtom>) -> Self {
        let atoms = atoms
            .into_iter()
            .map(|a| match a.rel() {
                Relation::Ge | Relation::Gt => a.negated(),
                _ => a.clone(),
            })
            .collect();
        RawSystem { atoms }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[LinearAtom] {
        &self.atoms
    }

    pub fn step(&self, x: Var, cap: Option<usize>) -> Result<RawSystem> {
        let eqs: Vec<LinearAtom> =
            self.atoms.iter().filter(|a| a.rel() == Relation::Eq && a.contains(x)).cloned().collect();
        if let Some(e) = pick_equality(&eqs) {
            let ce = e.coeff(x).unwrap().clone();
            let mut skipped = false;
            let mut atoms = Vec::with_capacity(self.atoms.len());
            for a in &self.atoms {
                if !skipped && a == e {
                    skipped = true;
                    continue;
                }
                atoms.push(substitute(a, e, &ce, x));
            }
            return Ok(RawSystem { atoms });
        }
        let (mut lower, mut upper, mut atoms) = (Vec::new(), Vec::new(), Vec::new());
        for a in &self.atoms {
            match a.coeff(x) {
                None => atoms.push(a.clone()),
                Some(k) if k.is_positive() => upper.push((a, k.clone())),
                Some(k) => lower.push((a, k.clone())),
            }
        }
        if let Some(cap) = cap {
            if atoms.len().saturating_add(lower.len().saturating_mul(upper.len())) > cap {
                return Err(Error::CapExceeded { cap });
            }
        }
        for (l, cl) in &lower {
            let ml = -cl;
            for (u, cu) in &upper {
                atoms.push(combine(l, cu, u, &ml, strictest(l.rel(), u.rel())));
            }
        }
        Ok(RawSystem { atoms })
    }
}

/// Raw counts after each step of `order`.
pub fn fme_order_raw(atoms: &[LinearAtom], order: &[Var], cap: Option<usize>) -> Result<Vec<usize>> {
    let mut sys = RawSystem::new(atoms);
    let mut counts = Vec::with_capacity(order.len());
    for &x in order {
        sys = sys.step(x, cap)?;
        counts.push(sys.len());
    }
    Ok(counts)
}

/// Assigns each item to the first bag in `visit` containing all of its
/// quantified variables. Items without quantified variables are returned
/// separately. Returns per-bag item indices.
pub fn assign_items(
    t: &TreeDecomp,
    var_sets: &[BTreeSet<Var>],
    quantified: &BTreeSet<Var>,
    visit: &[BagId],
) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
    let mut per_bag = vec![Vec::new(); t.len()];
    let mut passthrough = Vec::new();
    let mut pending: Vec<(usize, BTreeSet<Var>)> = Vec::new();
    for (i, s) in var_sets.iter().enumerate() {
        let q: BTreeSet<Var> = s.intersection(quantified).copied().collect();
        if q.is_empty() {
            passthrough.push(i);
        } else {
            pending.push((i, q));
        }
    }
    for &b in visit {
        let bag = t.bag(b);
        pending.retain(|(i, q)| {
            if q.is_subset(bag) {
                per_bag[b].push(*i);
                false
            } else {
                true
            }
        });
    }
    if let Some((_, q)) = pending.first() {
        return Err(Error::InvalidDecomposition(format!("no bag contains the atom variables {q:?}")));
    }
    Ok((per_bag, passthrough))
}

/// The I and V maps of the dynamic program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValueTables {
    pub initial: Vec<ConstraintSet>,
    pub value: Vec<ConstraintSet>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DpOutcome {
    pub result: ConstraintSet,
    pub tables: ValueTables,
    /// Variables in the order their forget bags were processed.
    pub order: Vec<Var>,
    /// Size of V at each forget bag, aligned with `order`.
    pub per_step: Vec<usize>,
}

pub fn fme_dp(f: &QuantFormula, t: &NiceTreeDecomp) -> Result<ConstraintSet> {
    Ok(fme_dp_traced(f, t, &t.bfs(), None)?.result)
}

/// The dynamic program with an explicit top-down visiting order for atom
/// assignment (any breadth-first order of `t` is legal).
pub fn fme_dp_traced(
    f: &QuantFormula,
    t: &NiceTreeDecomp,
    visit: &[BagId],
    cap: Option<usize>,
) -> Result<DpOutcome> {
    let g = build_primal(f);
    validate_td(&g, t).map_err(|v| Error::InvalidDecomposition(v.to_string()))?;
    let atoms: Vec<LinearAtom> = f.linear_atoms()?.to_vec();
    let sets: Vec<BTreeSet<Var>> = atoms.iter().map(LinearAtom::vars).collect();
    let (per_bag, passthrough) = assign_items(t, &sets, &f.quantified_set(), visit)?;

    let initial: Vec<ConstraintSet> = per_bag
        .iter()
        .map(|ids| ConstraintSet::from_atoms(ids.iter().map(|&i| atoms[i].clone())))
        .collect();
    let mut value: Vec<Option<ConstraintSet>> = vec![None; t.len()];
    let mut order = Vec::new();
    let mut per_step = Vec::new();
    let mut kept = vec![ConstraintSet::new(); t.len()];
    for b in t.post_order() {
        let mut v = initial[b].clone();
        match t.kind(b) {
            BagKind::Leaf => {}
            BagKind::Introduce(_) | BagKind::Join => {
                for &c in t.children(b) {
                    v.union_with(value[c].as_ref().expect("children first"));
                }
            }
            BagKind::Forget(x) => {
                let child = value[t.children(b)[0]].as_ref().expect("children first");
                v.union_with(&fme_step_capped(child, x, cap)?);
                order.push(x);
                per_step.push(v.len());
            }
        }
        value[b] = Some(v);
        // Children values are no longer needed once the parent is built;
        // keep them only for the returned tables.
        for &c in t.children(b) {
            kept[c] = value[c].take().unwrap();
        }
    }
    kept[t.root()] = value[t.root()].take().unwrap();
    let mut result = kept[t.root()].clone();
    for &i in &passthrough {
        result.insert(atoms[i].clone());
    }
    Ok(DpOutcome { result, tables: ValueTables { initial, value: kept }, order, per_step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_formula;

    fn x(i: u32) -> Var {
        Var(i - 1)
    }

    fn set(f: &QuantFormula) -> ConstraintSet {
        ConstraintSet::from_atoms(f.linear_atoms().unwrap().iter().cloned())
    }

    fn atom(terms: &[(u32, i64)], rhs: i64, rel: Relation) -> LinearAtom {
        let ts: Vec<(Var, i64)> = terms.iter().map(|&(v, c)| (x(v), c)).collect();
        LinearAtom::from_ints(&ts, rhs, rel)
    }

    fn x1_atoms() -> ConstraintSet {
        ConstraintSet::from_atoms([
            atom(&[(1, 1), (2, 2), (3, 3)], 20, Relation::Le),
            atom(&[(1, 1), (2, -1), (3, 2)], -5, Relation::Ge),
            atom(&[(1, 1), (2, -4)], 0, Relation::Le),
        ])
    }

    #[test]
    fn bounds_of_running_example() {
        let b = bounds(&x1_atoms(), x(1));
        let r = |n: i64| Rat::from_integer(n.into());
        let uppers: Vec<LinearTerm> = b.upper.iter().map(|u| u.term(x(1))).collect();
        assert_eq!(
            uppers,
            vec![
                LinearTerm { coeffs: vec![(x(2), r(-2)), (x(3), r(-3))], constant: r(20) },
                LinearTerm { coeffs: vec![(x(2), r(4))], constant: r(0) },
            ]
        );
        assert_eq!(b.lower.len(), 1);
        assert_eq!(b.lower[0].term(x(1)), LinearTerm { coeffs: vec![(x(2), r(1)), (x(3), r(-2))], constant: r(-5) });
        assert!(b.lower.iter().chain(&b.upper).all(|b| !b.strict()));
        assert!(b.eqs.is_empty() && b.rest.is_empty());
    }

    #[test]
    fn bounds_equalities_and_absent_variable() {
        let c = ConstraintSet::from_atoms([atom(&[(1, 2), (2, -1)], 0, Relation::Eq), atom(&[(1, 1)], 1, Relation::Lt)]);
        let b = bounds(&c, x(1));
        assert_eq!(b.eqs.len(), 1);
        assert_eq!(b.upper.len(), 1);
        assert!(b.upper[0].strict());
        let b = bounds(&c, x(5));
        assert_eq!(b.rest, c);
    }

    #[test]
    fn step_examples() {
        let out = fme_step(&x1_atoms(), x(1));
        let want = ConstraintSet::from_atoms([
            atom(&[(2, 3), (3, 1)], 25, Relation::Le),
            atom(&[(2, -3), (3, -2)], 5, Relation::Le),
        ]);
        assert_eq!(out, want);

        let c = ConstraintSet::from_atoms([atom(&[(1, 1)], 0, Relation::Ge), atom(&[(1, 1)], 1, Relation::Le)]);
        let out = fme_step(&c, x(1));
        assert!(out.is_empty() && !out.is_false());

        let c = ConstraintSet::from_atoms([atom(&[(1, 1), (2, -1)], 0, Relation::Lt), atom(&[(1, 1), (2, -1)], 0, Relation::Gt)]);
        assert!(fme_step(&c, x(1)).is_false());
    }

    #[test]
    fn mixed_strictness_is_strict() {
        // y < x <= z gives y < z.
        let c = ConstraintSet::from_atoms([atom(&[(1, 1), (2, -1)], 0, Relation::Gt), atom(&[(1, 1), (3, -1)], 0, Relation::Le)]);
        let want = ConstraintSet::from_atoms([atom(&[(2, 1), (3, -1)], 0, Relation::Lt)]);
        assert_eq!(fme_step(&c, x(1)), want);
    }

    #[test]
    fn equality_substitution() {
        // 2x - y = 0, x + z <= 3 gives y + 2z <= 6.
        let c = ConstraintSet::from_atoms([atom(&[(1, 2), (2, -1)], 0, Relation::Eq), atom(&[(1, 1), (3, 1)], 3, Relation::Le)]);
        let want = ConstraintSet::from_atoms([atom(&[(2, 1), (3, 2)], 6, Relation::Le)]);
        assert_eq!(fme_step(&c, x(1)), want);
        // The negated orientation of the equality gives the same result.
        let c = ConstraintSet::from_atoms([atom(&[(1, -2), (2, 1)], 0, Relation::Eq), atom(&[(1, -1), (3, -1)], -3, Relation::Ge)]);
        assert_eq!(fme_step(&c, x(1)), want);
    }

    #[test]
    fn empty_order_is_identity() {
        assert_eq!(fme_order(&x1_atoms(), &[]), x1_atoms());
    }

    #[test]
    fn cap_is_checked_before_generation() {
        assert_eq!(fme_step_capped(&x1_atoms(), x(1), Some(1)), Err(Error::CapExceeded { cap: 1 }));
        assert!(fme_step_capped(&x1_atoms(), x(1), Some(2)).is_ok());
    }

    #[test]
    fn trace_records_contradiction_step() {
        let f = parse_formula("exists a b; a < b; a > b; b <= 1").unwrap();
        let t = fme_trace(&set(&f), &[x(1), x(2)], None).unwrap();
        assert_eq!(t.false_step, Some(0));
        assert!(t.result.is_false());
        let t = fme_trace(&ConstraintSet::new(), &[], None).unwrap();
        assert_eq!((t.initial, t.peak, t.per_step.len()), (0, 0, 0));
    }

    #[test]
    fn single_vertex_dp_matches_step() {
        use crate::treedecomp::{nicify, TreeDecomp};
        let f = parse_formula("exists x; x + y <= 1; x - y >= 2; 3*x < z").unwrap();
        let t = nicify(&TreeDecomp::single([x(1)].into_iter().collect()));
        assert_eq!(fme_dp(&f, &t).unwrap(), fme_step(&set(&f), x(1)));
    }

    #[test]
    fn raw_counts_keep_duplicates_and_constants() {
        let atoms = [atom(&[(1, 1)], 0, Relation::Ge), atom(&[(1, 1)], 1, Relation::Le), atom(&[(1, 2)], 2, Relation::Le)];
        assert_eq!(fme_order_raw(&atoms, &[x(1)], None).unwrap(), vec![2]);
        assert!(fme_step(&ConstraintSet::from_atoms(atoms), x(1)).is_empty());
    }
}

//! Variables, linear and polynomial atoms, and prenex existential formulas.
//!
//! Linear atoms are stored with integer coefficients: any rational atom is
//! scaled by the (positive) lcm of its denominators on construction, which
//! never changes its meaning. The canonical form produced by
//! [`LinearAtom::normalize`] additionally
//!
//! * rewrites `>`/`>=` as `<`/`<=` by negating both sides,
//! * divides coefficients and right-hand side by their common gcd,
//! * makes the lowest-index coefficient of an equality positive,
//!
//! so two atoms denote the same half-space (or hyperplane) iff their canonical
//! forms are equal.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

pub type Rat = BigRational;

/// A variable, identified by its position in the owning [`VarTable`].
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Interned variable names. Indices are dense and assigned in order of first
/// appearance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarTable {
    names: Vec<String>,
    lookup: HashMap<String, Var>,
}

impl VarTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// `x1, ..., xn` as `Var(0), ..., Var(n-1)`.
    pub fn numbered(n: usize) -> Self {
        let mut t = Self::new();
        for i in 1..=n {
            t.intern(&format!("x{i}"));
        }
        t
    }

    pub fn intern(&mut self, name: &str) -> Var {
        if let Some(&v) = self.lookup.get(name) {
            return v;
        }
        let v = Var(self.names.len() as u32);
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), v);
        v
    }

    pub fn get(&self, name: &str) -> Option<Var> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, v: Var) -> &str {
        &self.names[v.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.names.len() as u32).map(Var)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Relation {
    /// Whether `lhs REL rhs` holds, given `lhs.cmp(rhs)`.
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            Relation::Lt => ord == Ordering::Less,
            Relation::Le => ord != Ordering::Greater,
            Relation::Eq => ord == Ordering::Equal,
            Relation::Ge => ord != Ordering::Less,
            Relation::Gt => ord == Ordering::Greater,
        }
    }

    /// The relation obtained by multiplying both sides by -1.
    pub fn flipped(self) -> Relation {
        match self {
            Relation::Lt => Relation::Gt,
            Relation::Le => Relation::Ge,
            Relation::Eq => Relation::Eq,
            Relation::Ge => Relation::Le,
            Relation::Gt => Relation::Lt,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Relation::Lt | Relation::Gt)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstVerdict {
    TriviallyTrue,
    TriviallyFalse,
}

impl ConstVerdict {
    fn of(holds: bool) -> Self {
        if holds {
            ConstVerdict::TriviallyTrue
        } else {
            ConstVerdict::TriviallyFalse
        }
    }
}

/// Result of normalizing an atom: either a canonical atom or a constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Normalized<A> {
    Atom(A),
    Const(ConstVerdict),
}

impl<A> Normalized<A> {
    pub fn atom(self) -> Option<A> {
        match self {
            Normalized::Atom(a) => Some(a),
            Normalized::Const(_) => None,
        }
    }
}

/// `sum(coeff * var) REL rhs` with integer coefficients, sorted by variable
/// and free of zero entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearAtom {
    terms: Vec<(Var, BigInt)>,
    rhs: BigInt,
    rel: Relation,
}

impl LinearAtom {
    /// Builds an atom from integer data. Duplicate variables are merged and
    /// zero coefficients dropped; no other normalization happens.
    pub fn new(terms: impl IntoIterator<Item = (Var, BigInt)>, rhs: BigInt, rel: Relation) -> Self {
        let mut terms: Vec<(Var, BigInt)> = terms.into_iter().collect();
        terms.sort_by_key(|(v, _)| *v);
        let mut merged: Vec<(Var, BigInt)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|(_, c)| !c.is_zero());
        LinearAtom {
            terms: merged,
            rhs,
            rel,
        }
    }

    /// Caller guarantees sorted, distinct, nonzero terms.
    pub(crate) fn from_sorted(terms: Vec<(Var, BigInt)>, rhs: BigInt, rel: Relation) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(terms.iter().all(|(_, c)| !c.is_zero()));
        LinearAtom { terms, rhs, rel }
    }

    /// Convenience constructor for small integer data.
    pub fn from_ints(terms: &[(Var, i64)], rhs: i64, rel: Relation) -> Self {
        Self::new(
            terms.iter().map(|&(v, c)| (v, BigInt::from(c))),
            BigInt::from(rhs),
            rel,
        )
    }

    /// Builds an atom from rational data, clearing denominators.
    pub fn from_rational(terms: impl IntoIterator<Item = (Var, Rat)>, rhs: Rat, rel: Relation) -> Self {
        let terms: Vec<(Var, Rat)> = terms.into_iter().collect();
        let mut lcm = rhs.denom().clone();
        for (_, c) in &terms {
            lcm = lcm.lcm(c.denom());
        }
        let scale = |q: &Rat| -> BigInt { (q.numer() * &lcm) / q.denom() };
        let ints: Vec<(Var, BigInt)> = terms.iter().map(|(v, c)| (*v, scale(c))).collect();
        Self::new(ints, scale(&rhs), rel)
    }

    pub fn terms(&self) -> &[(Var, BigInt)] {
        &self.terms
    }

    pub fn rhs(&self) -> &BigInt {
        &self.rhs
    }

    pub fn rel(&self) -> Relation {
        self.rel
    }

    pub fn coeff(&self, v: Var) -> Option<&BigInt> {
        self.terms
            .binary_search_by_key(&v, |(w, _)| *w)
            .ok()
            .map(|i| &self.terms[i].1)
    }

    pub fn contains(&self, v: Var) -> bool {
        self.coeff(v).is_some()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms.iter().map(|(v, _)| *v).collect()
    }

    pub fn var_iter(&self) -> impl Iterator<Item = Var> + '_ {
        self.terms.iter().map(|(v, _)| *v)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Multiplies both sides by `-1`, flipping the relation.
    pub fn negated(&self) -> LinearAtom {
        LinearAtom {
            terms: self.terms.iter().map(|(v, c)| (*v, -c)).collect(),
            rhs: -&self.rhs,
            rel: self.rel.flipped(),
        }
    }

    pub fn normalize(&self) -> Normalized<LinearAtom> {
        if self.terms.is_empty() {
            let holds = self.rel.holds(BigInt::zero().cmp(&self.rhs));
            return Normalized::Const(ConstVerdict::of(holds));
        }
        let mut atom = match self.rel {
            Relation::Ge | Relation::Gt => self.negated(),
            _ => self.clone(),
        };
        let mut g = atom.rhs.abs();
        for (_, c) in &atom.terms {
            g = g.gcd(c);
            if g.is_one() {
                break;
            }
        }
        if !g.is_one() {
            for (_, c) in atom.terms.iter_mut() {
                *c /= &g;
            }
            atom.rhs /= &g;
        }
        if atom.rel == Relation::Eq && atom.terms[0].1.is_negative() {
            atom = atom.negated();
        }
        Normalized::Atom(atom)
    }

    pub fn is_canonical(&self) -> bool {
        matches!(self.normalize(), Normalized::Atom(ref a) if a == self)
    }

    /// Evaluates the left-hand side at `point`.
    pub fn eval_lhs(&self, point: &HashMap<Var, Rat>) -> Result<Rat> {
        let mut acc = Rat::zero();
        for (v, c) in &self.terms {
            let x = point.get(v).ok_or(Error::MissingAssignment(*v))?;
            acc += x * Rat::from_integer(c.clone());
        }
        Ok(acc)
    }

    pub fn eval(&self, point: &HashMap<Var, Rat>) -> Result<bool> {
        let lhs = self.eval_lhs(point)?;
        Ok(self.rel.holds(lhs.cmp(&Rat::from_integer(self.rhs.clone()))))
    }

    /// The atom as `poly REL 0` with `poly = lhs - rhs`.
    pub fn to_poly_atom(&self) -> PolyAtom {
        let mut p = Poly::constant(Rat::from_integer(-&self.rhs));
        for (v, c) in &self.terms {
            p = &p + &Poly::var(*v).scale(&Rat::from_integer(c.clone()));
        }
        PolyAtom::new(p, self.rel)
    }

    pub fn display<'a>(&'a self, names: &'a VarTable) -> impl fmt::Display + 'a {
        DisplayLinear { atom: self, names }
    }
}

struct DisplayLinear<'a> {
    atom: &'a LinearAtom,
    names: &'a VarTable,
}

impl fmt::Display for DisplayLinear<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atom.terms.is_empty() {
            f.write_str("0")?;
        }
        for (i, (v, c)) in self.atom.terms.iter().enumerate() {
            let name = self.names.name(*v);
            let mag = c.abs();
            if i == 0 {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else if c.is_negative() {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            if mag.is_one() {
                write!(f, "{name}")?;
            } else {
                write!(f, "{mag}*{name}")?;
            }
        }
        write!(f, " {} {}", self.atom.rel, self.atom.rhs)
    }
}

/// `poly REL 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolyAtom {
    poly: Poly,
    rel: Relation,
}

impl PolyAtom {
    pub fn new(poly: Poly, rel: Relation) -> Self {
        PolyAtom { poly, rel }
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    pub fn rel(&self) -> Relation {
        self.rel
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.poly.vars()
    }

    /// Same conventions as [`LinearAtom::normalize`]: `>`/`>=` flipped,
    /// integer-primitive coefficients, equalities with positive leading
    /// coefficient.
    pub fn normalize(&self) -> Normalized<PolyAtom> {
        if let Some(c) = self.poly.constant_value() {
            let holds = self.rel.holds(c.cmp(&Rat::zero()));
            return Normalized::Const(ConstVerdict::of(holds));
        }
        let (mut poly, mut rel) = match self.rel {
            Relation::Ge | Relation::Gt => (-&self.poly, self.rel.flipped()),
            r => (self.poly.clone(), r),
        };
        let (factor, prim) = poly.integer_primitive();
        poly = prim;
        if factor.is_negative() {
            // integer_primitive keeps a positive leading coefficient, so a
            // negative factor means the sense of the inequality flips.
            rel = rel.flipped();
            if matches!(rel, Relation::Ge | Relation::Gt) {
                poly = -&poly;
                rel = rel.flipped();
            }
        }
        if rel == Relation::Eq && poly.leading_coeff().is_some_and(|c| c.is_negative()) {
            poly = -&poly;
        }
        Normalized::Atom(PolyAtom { poly, rel })
    }

    pub fn eval(&self, point: &HashMap<Var, Rat>) -> Result<bool> {
        let v = self.poly.eval(point)?;
        Ok(self.rel.holds(v.cmp(&Rat::zero())))
    }

    pub fn display<'a>(&'a self, names: &'a VarTable) -> impl fmt::Display + 'a {
        DisplayPolyAtom { atom: self, names }
    }
}

struct DisplayPolyAtom<'a> {
    atom: &'a PolyAtom,
    names: &'a VarTable,
}

impl fmt::Display for DisplayPolyAtom<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} 0", self.atom.poly.display(self.names), self.atom.rel)
    }
}

/// The atoms of a formula; either all linear or all polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Atoms {
    Linear(Vec<LinearAtom>),
    Poly(Vec<PolyAtom>),
}

impl Atoms {
    pub fn len(&self) -> usize {
        match self {
            Atoms::Linear(a) => a.len(),
            Atoms::Poly(a) => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn var_sets(&self) -> Vec<BTreeSet<Var>> {
        match self {
            Atoms::Linear(a) => a.iter().map(LinearAtom::vars).collect(),
            Atoms::Poly(a) => a.iter().map(PolyAtom::vars).collect(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Atoms::Linear(_))
    }
}

/// `exists quantified. /\ atoms`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantFormula {
    vars: VarTable,
    quantified: Vec<Var>,
    atoms: Atoms,
}

impl QuantFormula {
    pub fn new(vars: VarTable, quantified: Vec<Var>, atoms: Atoms) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for v in &quantified {
            if v.index() >= vars.len() {
                return Err(Error::Config(format!("quantified variable {v:?} is not interned")));
            }
            if !seen.insert(*v) {
                return Err(Error::Config(format!(
                    "variable {} quantified twice",
                    vars.name(*v)
                )));
            }
        }
        for set in atoms.var_sets() {
            if let Some(v) = set.iter().find(|v| v.index() >= vars.len()) {
                return Err(Error::Config(format!("atom variable {v:?} is not interned")));
            }
        }
        Ok(QuantFormula {
            vars,
            quantified,
            atoms,
        })
    }

    pub fn vars(&self) -> &VarTable {
        &self.vars
    }

    pub fn quantified(&self) -> &[Var] {
        &self.quantified
    }

    pub fn quantified_set(&self) -> BTreeSet<Var> {
        self.quantified.iter().copied().collect()
    }

    pub fn atoms(&self) -> &Atoms {
        &self.atoms
    }

    /// Variables occurring in some atom that are not quantified.
    pub fn free(&self) -> BTreeSet<Var> {
        let q = self.quantified_set();
        self.atoms
            .var_sets()
            .into_iter()
            .flatten()
            .filter(|v| !q.contains(v))
            .collect()
    }

    pub fn linear_atoms(&self) -> Result<&[LinearAtom]> {
        match &self.atoms {
            Atoms::Linear(a) => Ok(a),
            Atoms::Poly(_) => Err(Error::MixedMode),
        }
    }

    /// Atoms as polynomial atoms; linear formulas are converted.
    pub fn poly_atoms(&self) -> Vec<PolyAtom> {
        match &self.atoms {
            Atoms::Linear(a) => a.iter().map(LinearAtom::to_poly_atom).collect(),
            Atoms::Poly(a) => a.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: u32) -> Var {
        Var(i - 1)
    }

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(n.into(), d.into())
    }

    fn pt(vals: &[(u32, i64)]) -> HashMap<Var, Rat> {
        vals.iter().map(|&(i, v)| (x(i), rat(v, 1))).collect()
    }

    #[test]
    fn both_forms_of_running_example_atom_agree() {
        let le = LinearAtom::from_ints(&[(x(1), -1), (x(2), 1), (x(3), -2)], 5, Relation::Le);
        let ge = LinearAtom::from_ints(&[(x(1), 1), (x(2), -1), (x(3), 2)], -5, Relation::Ge);
        assert_eq!(le.normalize(), ge.normalize());
        let canon = le.normalize().atom().unwrap();
        assert_eq!(canon.rel(), Relation::Le);
    }

    #[test]
    fn constant_atoms_become_verdicts() {
        let a = LinearAtom::from_ints(&[], 1, Relation::Ge);
        // 0 >= 1
        assert_eq!(a.normalize(), Normalized::Const(ConstVerdict::TriviallyFalse));
        let b = LinearAtom::from_ints(&[], 1, Relation::Le);
        assert_eq!(b.normalize(), Normalized::Const(ConstVerdict::TriviallyTrue));
    }

    #[test]
    fn rational_coefficients_are_cleared() {
        let a = LinearAtom::from_rational(
            vec![(x(1), rat(2, 3)), (x(2), rat(-4, 3))],
            rat(0, 1),
            Relation::Le,
        );
        let want = LinearAtom::from_ints(&[(x(1), 1), (x(2), -2)], 0, Relation::Le);
        assert_eq!(a.normalize().atom().unwrap(), want);
    }

    #[test]
    fn equalities_get_positive_leading_coefficient() {
        let a = LinearAtom::from_ints(&[(x(1), -4), (x(3), 6)], 2, Relation::Eq);
        let n = a.normalize().atom().unwrap();
        assert_eq!(n, LinearAtom::from_ints(&[(x(1), 2), (x(3), -3)], -1, Relation::Eq));
    }

    #[test]
    fn eval_examples() {
        let a = LinearAtom::from_ints(&[(x(1), 1), (x(2), -4)], 0, Relation::Le);
        assert!(a.eval(&pt(&[(1, 1), (2, 1)])).unwrap());
        let b = LinearAtom::from_ints(&[(x(3), 1)], -1, Relation::Le);
        assert!(b.eval(&pt(&[(3, -1)])).unwrap());
        assert!(!b.eval(&pt(&[(3, 0)])).unwrap());
        assert_eq!(b.eval(&pt(&[(1, 0)])), Err(Error::MissingAssignment(x(3))));
    }

    #[test]
    fn atom_vars_examples() {
        let a = LinearAtom::from_ints(&[(x(1), 1), (x(2), 2), (x(3), 3)], 20, Relation::Le);
        assert_eq!(a.vars(), [x(1), x(2), x(3)].into_iter().collect());
        assert!(LinearAtom::from_ints(&[], 3, Relation::Le).vars().is_empty());
        let f = crate::parse::parse_formula("exists x1 x2 x3; 8*x1*x2 + 6*x1 + 5*x3 + 5 >= 0")
            .unwrap();
        match f.atoms() {
            Atoms::Poly(p) => assert_eq!(p[0].vars(), [x(1), x(2), x(3)].into_iter().collect()),
            Atoms::Linear(_) => panic!("expected a polynomial atom"),
        }
    }

    #[test]
    fn poly_atom_normalization_flips_and_scales() {
        let p = &Poly::var(x(1)).scale(&rat(-2, 1)) + &Poly::constant(rat(4, 1));
        // -2x + 4 >= 0  ->  2x - 4 <= 0  ->  x - 2 <= 0
        let a = PolyAtom::new(p, Relation::Ge).normalize().atom().unwrap();
        assert_eq!(a.rel(), Relation::Le);
        assert_eq!(a.poly(), &(&Poly::var(x(1)) - &Poly::constant(rat(2, 1))));
    }
}

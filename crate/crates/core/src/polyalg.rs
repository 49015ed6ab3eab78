//! Exact multivariate polynomial algebra: contents, gcds, square-free bases,
//! Sylvester resultants and discriminants.
//!
//! GCDs use the primitive polynomial remainder sequence, recursing on the
//! number of variables for contents. Resultants are determinants of the
//! Sylvester matrix computed by fraction-free (Bareiss) elimination, so every
//! intermediate division is exact.

use std::collections::BTreeSet;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::formula::{Rat, Var};
use crate::poly::{Monomial, Poly};

pub fn deg(f: &Poly, x: Var) -> u32 {
    f.degree(x)
}

/// Nonzero coefficients of `f` in `x`, highest degree first.
pub fn coeffs(f: &Poly, x: Var) -> Vec<Poly> {
    f.coeffs(x)
}

/// Splits `f = content * primitive` with respect to `x`.
///
/// The content is the gcd of the coefficients of `f` in `x`, including their
/// common integer factor; the primitive part has coprime integer
/// coefficients and a positive leading coefficient.
pub fn content_primitive(f: &Poly, x: Var) -> Result<(Poly, Poly)> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let c = content_in(f, x);
    let p = f.div_exact(&c)?;
    let (factor, prim) = p.integer_primitive();
    Ok((c.scale(&factor), prim))
}

/// Gcd of `f` and `g`, normalized to primitive integer form with positive
/// leading coefficient. `x` is used as the first main variable.
pub fn poly_gcd(f: &Poly, g: &Poly, x: Var) -> Poly {
    gcd_in(f, g, x)
}

/// Full multivariate gcd, normalized like [`poly_gcd`].
pub fn gcd(f: &Poly, g: &Poly) -> Poly {
    if f.is_zero() {
        return g.normalized();
    }
    if g.is_zero() {
        return f.normalized();
    }
    if f.is_constant() || g.is_constant() {
        return Poly::one();
    }
    let fv = f.vars();
    let x = *fv.iter().next().unwrap();
    gcd_in(f, g, x)
}

fn gcd_in(f: &Poly, g: &Poly, x: Var) -> Poly {
    if f.is_zero() {
        return g.normalized();
    }
    if g.is_zero() {
        return f.normalized();
    }
    if f.is_constant() || g.is_constant() {
        return Poly::one();
    }
    let (fx, gx) = (f.contains(x), g.contains(x));
    match (fx, gx) {
        (false, false) => return gcd(f, g),
        (false, true) => return gcd(f, &content_in(g, x)),
        (true, false) => return gcd(&content_in(f, x), g),
        (true, true) => {}
    }
    let cf = content_in(f, x);
    let cg = content_in(g, x);
    let pf = f.div_exact(&cf).expect("content divides");
    let pg = g.div_exact(&cg).expect("content divides");
    let c = gcd(&cf, &cg);
    let h = primitive_prs(pf, pg, x);
    (&c * &h).normalized()
}

/// Gcd of the coefficients of `f` in `x`, normalized.
pub(crate) fn content_in(f: &Poly, x: Var) -> Poly {
    let mut acc = Poly::zero();
    for c in f.coeffs(x) {
        acc = gcd(&acc, &c);
        if acc.is_constant() {
            return Poly::one();
        }
    }
    acc
}

/// Primitive part with respect to `x`, up to a rational constant.
fn pp_in(f: &Poly, x: Var) -> Poly {
    let c = content_in(f, x);
    f.div_exact(&c).expect("content divides").normalized()
}

/// Gcd of two polynomials primitive in `x`, both of positive degree in `x`.
fn primitive_prs(a: Poly, b: Poly, x: Var) -> Poly {
    let (mut a, mut b) = if a.degree(x) >= b.degree(x) { (a, b) } else { (b, a) };
    loop {
        let r = prem(&a, &b, x);
        if r.is_zero() {
            return pp_in(&b, x);
        }
        if r.degree(x) == 0 {
            return Poly::one();
        }
        a = b;
        b = pp_in(&r, x);
    }
}

/// Pseudo-remainder of `a` by `b` in `x`, up to a power of `lc(b)`.
pub(crate) fn prem(a: &Poly, b: &Poly, x: Var) -> Poly {
    let db = b.degree(x);
    let lb = b.lead_in(x);
    let mut r = a.clone();
    while !r.is_zero() && r.contains(x) && r.degree(x) >= db {
        let dr = r.degree(x);
        let lr = r.lead_in(x);
        let shift = Monomial::from_pairs([(x, dr - db)]);
        let t = (&lr * b).mul_monomial(&shift, &Rat::one());
        r = &(&lb * &r) - &t;
    }
    if db == 0 {
        return Poly::zero();
    }
    r
}

/// Pairwise coprime, square-free (in the main variable) polynomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisSet {
    polys: Vec<Poly>,
}

impl BasisSet {
    pub fn polys(&self) -> &[Poly] {
        &self.polys
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }
}

/// Square-free, pairwise coprime basis of the primitive parts of `polys`.
///
/// Inputs of degree 0 in `x` are ignored. The result depends only on the
/// set of inputs, not their order.
pub fn squarefree_basis<'a>(polys: impl IntoIterator<Item = &'a Poly>, x: Var) -> BasisSet {
    let inputs: BTreeSet<Poly> = polys
        .into_iter()
        .filter(|p| p.degree(x) >= 1)
        .map(|p| p.normalized())
        .collect();
    let mut basis: Vec<Poly> = Vec::new();
    for p in inputs {
        let prim = pp_in(&p, x);
        let sqf = squarefree_part(&prim, x);
        let mut todo = vec![sqf];
        'next: while let Some(q) = todo.pop() {
            if q.degree(x) == 0 {
                continue;
            }
            for i in 0..basis.len() {
                let g = gcd_in(&basis[i], &q, x);
                if g.degree(x) >= 1 {
                    let b = basis.remove(i);
                    let b_rest = b.div_exact(&g).expect("gcd divides").normalized();
                    let q_rest = q.div_exact(&g).expect("gcd divides").normalized();
                    basis.push(g);
                    todo.push(b_rest);
                    todo.push(q_rest);
                    continue 'next;
                }
            }
            basis.push(q.normalized());
        }
    }
    basis.sort();
    BasisSet { polys: basis }
}

/// `f / gcd(f, df/dx)`, normalized.
fn squarefree_part(f: &Poly, x: Var) -> Poly {
    let d = f.derivative(x);
    let g = gcd_in(f, &d, x);
    if g.degree(x) == 0 {
        return f.normalized();
    }
    f.div_exact(&g).expect("gcd divides").normalized()
}

/// The `(r + s) x (r + s)` Sylvester matrix of two polynomials in `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SylvesterMatrix {
    entries: Vec<Vec<Poly>>,
    s: usize,
    r: usize,
}

impl SylvesterMatrix {
    /// Rows `0..r` hold shifted coefficients of `f` (degree `s`), rows
    /// `r..r+s` those of `g` (degree `r`), leading coefficients first.
    pub fn new(f: &Poly, g: &Poly, x: Var) -> Result<Self> {
        let s = f.degree(x) as usize;
        let r = g.degree(x) as usize;
        if s == 0 {
            return Err(Error::DegreeZero(x));
        }
        if r == 0 {
            return Err(Error::DegreeZero(x));
        }
        let n = s + r;
        let fc = f.dense_coeffs(x);
        let gc = g.dense_coeffs(x);
        let mut entries = vec![vec![Poly::zero(); n]; n];
        for i in 0..r {
            for k in 0..=s {
                entries[i][i + k] = fc[s - k].clone();
            }
        }
        for i in 0..s {
            for k in 0..=r {
                entries[r + i][i + k] = gc[r - k].clone();
            }
        }
        Ok(SylvesterMatrix { entries, s, r })
    }

    pub fn entries(&self) -> &[Vec<Poly>] {
        &self.entries
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.s, self.r)
    }

    pub fn determinant(&self) -> Poly {
        bareiss_determinant(self.entries.clone())
    }
}

/// Fraction-free Gaussian elimination over the polynomial ring.
pub fn bareiss_determinant(mut m: Vec<Vec<Poly>>) -> Poly {
    let n = m.len();
    if n == 0 {
        return Poly::one();
    }
    let mut negate = false;
    let mut prev = Poly::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(i) => {
                    m.swap(k, i);
                    negate = !negate;
                }
                None => return Poly::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &(&m[k][k] * &m[i][j]) - &(&m[i][k] * &m[k][j]);
                m[i][j] = num.div_exact(&prev).expect("Bareiss division is exact");
            }
            m[i][k] = Poly::zero();
        }
        prev = m[k][k].clone();
    }
    let det = m[n - 1][n - 1].clone();
    if negate {
        -&det
    } else {
        det
    }
}

pub fn resultant(f: &Poly, g: &Poly, x: Var) -> Result<Poly> {
    Ok(SylvesterMatrix::new(f, g, x)?.determinant())
}

/// `(-1)^(s(s-1)/2) / a_s * Res(f, df/dx, x)` with `s = deg(f, x)`.
pub fn discriminant(f: &Poly, x: Var) -> Result<Poly> {
    let s = f.degree(x);
    if s < 2 {
        return Err(Error::DegreeTooLow(x));
    }
    let res = resultant(f, &f.derivative(x), x)?;
    let lead = f.lead_in(x);
    let q = res.div_exact(&lead)?;
    let exp = (s as u64) * (s as u64 - 1) / 2;
    Ok(if exp % 2 == 1 { -&q } else { q })
}

/// Product of primitive parts divided by the product of a basis, which must
/// be a nonzero constant if the basis is correct. Exposed for tests.
pub fn basis_defect(inputs: &[Poly], basis: &BasisSet, x: Var) -> Option<Rat> {
    let mut prod = Poly::one();
    for p in inputs.iter().filter(|p| p.degree(x) >= 1) {
        prod = &prod * &squarefree_part(&pp_in(p, x), x);
    }
    // Shared factors appear once in the basis but possibly many times in the
    // product, so compare square-free parts of the product.
    let prod = squarefree_part(&prod, x);
    let mut b = Poly::one();
    for q in basis.polys() {
        b = &b * q;
    }
    let q = prod.div_exact(&b).ok()?;
    q.constant_value().filter(|c| !c.is_zero())
}

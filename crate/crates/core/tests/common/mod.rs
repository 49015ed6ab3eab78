//! Random instances and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use twqe::formula::{Atoms, LinearAtom, PolyAtom, QuantFormula, Rat, Relation, Var, VarTable};
use twqe::graph::Graph;
use twqe::poly::{Monomial, Poly};

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn data(name: &str) -> String {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

/// Small rationals with denominators up to 4.
pub fn random_rat(rng: &mut ChaCha8Rng, range: i64) -> Rat {
    let d = rng.gen_range(1..=4);
    rat(rng.gen_range(-range * d..=range * d), d)
}

pub fn random_point(rng: &mut ChaCha8Rng, vars: &BTreeSet<Var>, range: i64) -> HashMap<Var, Rat> {
    vars.iter().map(|&v| (v, random_rat(rng, range))).collect()
}

fn random_relation(rng: &mut ChaCha8Rng) -> Relation {
    // equalities are rarer, as in typical inputs
    match rng.gen_range(0..10) {
        0 => Relation::Eq,
        1 | 2 => Relation::Lt,
        3 | 4 => Relation::Gt,
        5 | 6 => Relation::Ge,
        _ => Relation::Le,
    }
}

/// A conjunction of sparse linear atoms over `n_q` quantified and `n_free`
/// free variables.
pub fn random_lra(rng: &mut ChaCha8Rng, n_q: usize, n_free: usize, n_atoms: usize) -> QuantFormula {
    let vars = VarTable::numbered(n_q + n_free);
    let all: Vec<Var> = vars.vars().collect();
    let quantified: Vec<Var> = all[..n_q].to_vec();
    let atoms = (0..n_atoms)
        .map(|_| {
            let width = rng.gen_range(1..=3.min(all.len()));
            let chosen: Vec<Var> = all.choose_multiple(rng, width).copied().collect();
            let terms: Vec<(Var, i64)> =
                chosen.iter().map(|&v| (v, *[-3, -2, -1, 1, 2, 3].choose(rng).unwrap())).collect();
            LinearAtom::from_ints(&terms, rng.gen_range(-6..=6), random_relation(rng))
        })
        .collect();
    QuantFormula::new(vars, quantified, Atoms::Linear(atoms)).unwrap()
}

/// Whether `exists x` holds for the conjunction `atoms` at `point`, by
/// intersecting the intervals each atom allows for `x`.
pub fn interval_oracle(atoms: &[LinearAtom], x: Var, point: &HashMap<Var, Rat>) -> bool {
    // (value, strict)
    let mut lower: Option<(Rat, bool)> = None;
    let mut upper: Option<(Rat, bool)> = None;
    let mut fixed: Vec<Rat> = Vec::new();
    for a in atoms {
        let mut rest = Rat::zero();
        let mut cx = Rat::zero();
        for (v, c) in a.terms() {
            let c = Rat::from_integer(c.clone());
            if *v == x {
                cx = c;
            } else {
                rest += c * &point[v];
            }
        }
        let rhs = Rat::from_integer(a.rhs().clone()) - rest;
        if cx.is_zero() {
            let ok = match a.rel() {
                Relation::Lt => Rat::zero() < rhs,
                Relation::Le => Rat::zero() <= rhs,
                Relation::Eq => rhs.is_zero(),
                Relation::Ge => Rat::zero() >= rhs,
                Relation::Gt => Rat::zero() > rhs,
            };
            if !ok {
                return false;
            }
            continue;
        }
        let bound = &rhs / &cx;
        // cx * x REL rhs; dividing by a negative cx flips the relation
        let rel = if cx.is_negative() { flip(a.rel()) } else { a.rel() };
        match rel {
            Relation::Eq => fixed.push(bound),
            Relation::Lt | Relation::Le => {
                let strict = rel == Relation::Lt;
                let tighter = match &upper {
                    None => true,
                    Some((u, s)) => bound < *u || (bound == *u && strict && !s),
                };
                if tighter {
                    upper = Some((bound, strict));
                }
            }
            Relation::Gt | Relation::Ge => {
                let strict = rel == Relation::Gt;
                let tighter = match &lower {
                    None => true,
                    Some((l, s)) => bound > *l || (bound == *l && strict && !s),
                };
                if tighter {
                    lower = Some((bound, strict));
                }
            }
        }
    }
    let admits = |v: &Rat| {
        lower.as_ref().map_or(true, |(l, s)| if *s { v > l } else { v >= l })
            && upper.as_ref().map_or(true, |(u, s)| if *s { v < u } else { v <= u })
    };
    if let Some(v) = fixed.first() {
        return fixed.iter().all(|w| w == v) && admits(v);
    }
    match (&lower, &upper) {
        (Some((l, ls)), Some((u, us))) => l < u || (l == u && !ls && !us),
        _ => true,
    }
}

fn flip(r: Relation) -> Relation {
    match r {
        Relation::Lt => Relation::Gt,
        Relation::Le => Relation::Ge,
        Relation::Eq => Relation::Eq,
        Relation::Ge => Relation::Le,
        Relation::Gt => Relation::Lt,
    }
}

/// Erdos-Renyi graph on `Var(0..n)`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut g = Graph::with_vertices((0..n as u32).map(Var));
    for i in 0..n as u32 {
        for j in i + 1..n as u32 {
            if rng.gen_bool(p) {
                g.add_edge(Var(i), Var(j));
            }
        }
    }
    g
}

/// Random polynomial in `vars` with degree at most `max_deg` in every
/// variable and at most `max_total` overall.
pub fn random_poly(rng: &mut ChaCha8Rng, vars: &[Var], max_deg: u32, max_total: u32, n_terms: usize) -> Poly {
    let terms = (0..n_terms).map(|_| {
        let mut budget = max_total;
        let mut pairs = Vec::new();
        for &v in vars {
            let e = rng.gen_range(0..=max_deg.min(budget));
            budget -= e;
            pairs.push((v, e));
        }
        let c = rng.gen_range(-5i64..=5);
        (Monomial::from_pairs(pairs), Rat::from_integer(BigInt::from(c)))
    });
    Poly::from_terms(terms)
}

/// A polynomial formula over `n_vars` variables, the first `n_q` quantified.
pub fn random_nra(rng: &mut ChaCha8Rng, n_vars: usize, n_q: usize, n_atoms: usize) -> QuantFormula {
    let vars = VarTable::numbered(n_vars);
    let all: Vec<Var> = vars.vars().collect();
    let mut atoms = Vec::new();
    while atoms.len() < n_atoms {
        let width = rng.gen_range(1..=2.min(all.len()));
        let mut chosen: Vec<Var> = all.choose_multiple(rng, width).copied().collect();
        chosen.sort();
        let n_terms = rng.gen_range(2..=3);
        let p = random_poly(rng, &chosen, 2, 2, n_terms);
        if p.is_constant() {
            continue;
        }
        atoms.push(PolyAtom::new(p, random_relation(rng)));
    }
    QuantFormula::new(vars, all[..n_q].to_vec(), Atoms::Poly(atoms)).unwrap()
}

/// Resultant of two univariate polynomials given by dense coefficients
/// (constant first), as the determinant of their Sylvester matrix computed
/// by fraction-field Gaussian elimination.
pub fn univariate_resultant(f: &[Rat], g: &[Rat]) -> Rat {
    let m = f.len() - 1;
    let n = g.len() - 1;
    let size = m + n;
    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(size);
    for i in 0..n {
        let mut r = vec![Rat::zero(); size];
        for (j, c) in f.iter().rev().enumerate() {
            r[i + j] = c.clone();
        }
        rows.push(r);
    }
    for i in 0..m {
        let mut r = vec![Rat::zero(); size];
        for (j, c) in g.iter().rev().enumerate() {
            r[i + j] = c.clone();
        }
        rows.push(r);
    }
    let mut det = Rat::one();
    for col in 0..size {
        let Some(p) = (col..size).find(|&r| !rows[r][col].is_zero()) else {
            return Rat::zero();
        };
        if p != col {
            rows.swap(p, col);
            det = -det;
        }
        let pivot = rows[col][col].clone();
        det *= &pivot;
        for r in col + 1..size {
            let factor = &rows[r][col] / &pivot;
            if factor.is_zero() {
                continue;
            }
            for c in col..size {
                let sub = &factor * &rows[col][c];
                rows[r][c] -= sub;
            }
        }
    }
    det
}

/// Dense coefficients of a polynomial that only mentions `x`.
pub fn dense_univariate(p: &Poly, x: Var) -> Vec<Rat> {
    let deg = p.degree(x) as usize;
    let mut out = vec![Rat::zero(); deg + 1];
    for (m, c) in p.terms() {
        assert!(m.pairs().iter().all(|(v, _)| *v == x), "not univariate in {x:?}");
        out[m.degree(x) as usize] += c;
    }
    out
}

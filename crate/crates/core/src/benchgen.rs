//! Random sparse LRA/NRA instances whose primal graphs have bounded
//! treewidth, built on random k-trees.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{Atoms, LinearAtom, PolyAtom, QuantFormula, Rat, Relation, Var, VarTable};
use crate::graph::{build_primal, Graph};
use crate::poly::{Monomial, Poly};
use crate::treedecomp::{td_from_order, validate_td, TreeDecomp};

/// Regeneration attempts per bag before missing variables are forced in.
const MAX_REGENERATIONS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub k: usize,
    pub n_vars: usize,
    pub max_deg: u32,
    pub include_prob: f64,
    pub coeff_range: (i64, i64),
    pub seed: u64,
    /// Total atom count, spread round-robin over the bags; defaults to one
    /// atom per bag.
    pub n_atoms: Option<usize>,
    /// Number of quantified variables (the first ones in attachment order);
    /// defaults to all.
    pub n_elim: Option<usize>,
    /// Defaults to `<=` for linear and `>=` for polynomial instances.
    pub relation: Option<Relation>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            k: 2,
            n_vars: 15,
            max_deg: 1,
            include_prob: 0.1,
            coeff_range: (-10, 10),
            seed: 0,
            n_atoms: None,
            n_elim: None,
            relation: None,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_vars < self.k + 1 {
            return bad(format!("need at least k + 1 = {} variables, got {}", self.k + 1, self.n_vars));
        }
        if self.max_deg == 0 {
            return bad("maximum degree must be at least 1".into());
        }
        if !(0.05..=0.15).contains(&self.include_prob) {
            return bad(format!("inclusion probability {} outside [0.05, 0.15]", self.include_prob));
        }
        let (lo, hi) = self.coeff_range;
        if lo > hi || (lo == 0 && hi == 0) {
            return bad(format!("coefficient range [{lo}, {hi}] has no nonzero value"));
        }
        if self.n_elim.is_some_and(|e| e > self.n_vars) {
            return bad("more quantified variables than variables".into());
        }
        Ok(())
    }

    fn is_linear(&self) -> bool {
        self.max_deg == 1
    }
}

/// A k-tree with its (k+1)-cliques arranged as a tree decomposition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KTree {
    pub graph: Graph,
    pub bags: Vec<BTreeSet<Var>>,
    /// Clique each bag was attached to; `None` for the initial clique.
    pub parents: Vec<Option<usize>>,
    /// Variables in attachment order (equal to index order).
    pub attach_order: Vec<Var>,
}

impl KTree {
    pub fn decomposition(&self) -> TreeDecomp {
        TreeDecomp::new(self.bags.clone(), self.parents.clone()).expect("k-tree bags form a tree")
    }
}

/// Standard k-tree: a (k+1)-clique, then each new vertex joined to a random
/// k-subset of a random existing (k+1)-clique.
pub fn gen_ktree(cfg: &GenConfig) -> Result<KTree> {
    if cfg.n_vars < cfg.k + 1 {
        return Err(Error::Config(format!("need at least k + 1 = {} variables", cfg.k + 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vars: Vec<Var> = (0..cfg.n_vars as u32).map(Var).collect();
    let mut graph = Graph::with_vertices(vars.iter().copied());
    let first: BTreeSet<Var> = vars[..=cfg.k].iter().copied().collect();
    graph.add_clique(&first);
    let mut bags = vec![first];
    let mut parents = vec![None];
    for &v in &vars[cfg.k + 1..] {
        let host = rng.gen_range(0..bags.len());
        let mut sub: Vec<Var> = bags[host].iter().copied().choose_multiple(&mut rng, cfg.k);
        sub.sort();
        for &u in &sub {
            graph.add_edge(u, v);
        }
        let mut bag: BTreeSet<Var> = sub.into_iter().collect();
        bag.insert(v);
        bags.push(bag);
        parents.push(Some(host));
    }
    Ok(KTree { graph, bags, parents, attach_order: vars })
}

/// A generated formula with bookkeeping about the sampling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generated {
    pub formula: QuantFormula,
    /// Bag of each atom.
    pub atom_bags: Vec<usize>,
    /// Times a bag's atoms were resampled because a variable was missing.
    pub regenerations: usize,
    /// Variables added by hand after resampling gave up.
    pub forced: usize,
}

fn monomials(vars: &[Var], max_deg: u32) -> Vec<Monomial> {
    let mut out = vec![Monomial::one()];
    for &v in vars {
        let mut next = Vec::new();
        for m in &out {
            let mut e = 0;
            while m.total_degree() + e <= max_deg {
                next.push(m.mul(&Monomial::from_pairs([(v, e)])));
                e += 1;
            }
        }
        out = next;
    }
    out.sort();
    out
}

fn coeff(rng: &mut ChaCha8Rng, (lo, hi): (i64, i64)) -> i64 {
    loop {
        let c = rng.gen_range(lo..=hi);
        if c != 0 {
            return c;
        }
    }
}

fn sample_poly(rng: &mut ChaCha8Rng, monos: &[Monomial], max_deg: u32, cfg: &GenConfig) -> Poly {
    let top: Vec<&Monomial> = monos.iter().filter(|m| m.total_degree() == max_deg).collect();
    let lead = *top.choose(rng).unwrap();
    let mut terms = Vec::new();
    for m in monos {
        if m == lead || rng.gen_bool(cfg.include_prob) {
            terms.push((m.clone(), Rat::from_integer(coeff(rng, cfg.coeff_range).into())));
        }
    }
    Poly::from_terms(terms)
}

/// Samples atoms for every bag of `kt`.
///
/// Each atom gets one random monomial of maximum degree plus every other
/// monomial over its bag independently with `include_prob`. Linear atoms
/// take a right-hand side drawn uniformly from the coefficient range, zero
/// included. A bag whose atoms miss one of its variables is resampled;
/// after `MAX_REGENERATIONS` attempts the missing variables are added to
/// random atoms of that bag with random coefficients.
pub fn gen_formula(kt: &KTree, cfg: &GenConfig) -> Result<Generated> {
    cfg.validate()?;
    let n_bags = kt.bags.len();
    let n_atoms = cfg.n_atoms.unwrap_or(n_bags);
    if n_atoms < n_bags {
        return Err(Error::Config(format!("{n_atoms} atoms cannot cover {n_bags} bags")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut per_bag = vec![0usize; n_bags];
    for i in 0..n_atoms {
        per_bag[i % n_bags] += 1;
    }
    let mut polys: Vec<(usize, Poly)> = Vec::with_capacity(n_atoms);
    let mut regenerations = 0;
    let mut forced = 0;
    for (b, bag) in kt.bags.iter().enumerate() {
        let vars: Vec<Var> = bag.iter().copied().collect();
        let mut monos = monomials(&vars, cfg.max_deg);
        if cfg.is_linear() {
            // Linear right-hand sides are drawn separately below.
            monos.retain(|m| !m.is_one());
        }
        let mut attempt = 0;
        let mut atoms = loop {
            let atoms: Vec<Poly> = (0..per_bag[b]).map(|_| sample_poly(&mut rng, &monos, cfg.max_deg, cfg)).collect();
            let seen: BTreeSet<Var> = atoms.iter().flat_map(Poly::vars).collect();
            if seen.len() == vars.len() || attempt == MAX_REGENERATIONS {
                break atoms;
            }
            attempt += 1;
            regenerations += 1;
        };
        let seen: BTreeSet<Var> = atoms.iter().flat_map(Poly::vars).collect();
        for &v in vars.iter().filter(|v| !seen.contains(v)) {
            let i = rng.gen_range(0..atoms.len());
            let c = Rat::from_integer(coeff(&mut rng, cfg.coeff_range).into());
            atoms[i] = &atoms[i] + &Poly::monomial(Monomial::var(v), c);
            forced += 1;
        }
        for p in atoms {
            let p = if cfg.is_linear() {
                let rhs = rng.gen_range(cfg.coeff_range.0..=cfg.coeff_range.1);
                &p - &Poly::int(rhs)
            } else {
                p
            };
            polys.push((b, p));
        }
    }

    let mut table = VarTable::new();
    for v in &kt.attach_order {
        table.intern(&format!("x{}", v.index() + 1));
    }
    let n_elim = cfg.n_elim.unwrap_or(cfg.n_vars);
    let quantified: Vec<Var> = kt.attach_order[..n_elim].to_vec();
    let atom_bags = polys.iter().map(|(b, _)| *b).collect();
    let atoms = if cfg.is_linear() {
        let rel = cfg.relation.unwrap_or(Relation::Le);
        Atoms::Linear(
            polys
                .into_iter()
                .map(|(_, p)| {
                    // The constant monomial moves to the right-hand side.
                    let rhs = -p.constant_term();
                    let terms: Vec<(Var, BigInt)> = p
                        .terms()
                        .filter(|(m, _)| !m.is_one())
                        .map(|(m, c)| (m.pairs()[0].0, c.numer().clone()))
                        .collect();
                    LinearAtom::new(terms, rhs.numer().clone(), rel)
                })
                .collect(),
        )
    } else {
        let rel = cfg.relation.unwrap_or(Relation::Ge);
        Atoms::Poly(polys.into_iter().map(|(_, p)| PolyAtom::new(p, rel)).collect())
    };
    let formula = QuantFormula::new(table, quantified, atoms)?;
    Ok(Generated { formula, atom_bags, regenerations, forced })
}

/// Generator self-checks for one instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenReport {
    pub primal_in_ktree: bool,
    pub ktree_decomposition_valid: bool,
    pub ktree_width: usize,
    pub elimination_width: usize,
    pub missing_vars: Vec<u32>,
}

impl GenReport {
    pub fn passed(&self, k: usize) -> bool {
        self.primal_in_ktree
            && self.ktree_decomposition_valid
            && self.ktree_width == k
            && self.elimination_width <= k
            && self.missing_vars.is_empty()
    }
}

pub fn gen_properties_check(g: &Generated, kt: &KTree) -> GenReport {
    let f = &g.formula;
    let primal = build_primal(f);
    // All variables, not only the quantified ones, must sit inside the k-tree.
    let full = crate::graph::primal_from_sets(&kt.graph.vertex_set(), f.atoms().var_sets());
    let td = kt.decomposition();
    let mut reverse = kt.attach_order.clone();
    reverse.reverse();
    let elim = td_from_order(&kt.graph, &reverse);
    let occurring: BTreeSet<Var> = f.atoms().var_sets().into_iter().flatten().collect();
    GenReport {
        primal_in_ktree: primal.is_subgraph_of(&kt.graph) && full.is_subgraph_of(&kt.graph),
        ktree_decomposition_valid: validate_td(&kt.graph, &td).is_ok(),
        ktree_width: td.width(),
        elimination_width: elim.width(),
        missing_vars: f.quantified().iter().filter(|v| !occurring.contains(v)).map(|v| v.0).collect(),
    }
}

/// Convenience: k-tree plus formula from one config.
pub fn generate(cfg: &GenConfig) -> Result<(KTree, Generated)> {
    cfg.validate()?;
    let kt = gen_ktree(cfg)?;
    let g = gen_formula(&kt, cfg)?;
    Ok((kt, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let cfg = GenConfig { k: 2, n_vars: 3, ..Default::default() };
        let kt = gen_ktree(&cfg).unwrap();
        assert_eq!(kt.bags.len(), 1);
        assert_eq!(kt.graph.num_edges(), 3);
    }

    #[test]
    fn two_tree_on_eight() {
        let cfg = GenConfig { k: 2, n_vars: 8, seed: 5, ..Default::default() };
        let kt = gen_ktree(&cfg).unwrap();
        assert_eq!(kt.graph.num_edges(), 3 + 2 * 5);
        let mut rev = kt.attach_order.clone();
        rev.reverse();
        assert_eq!(td_from_order(&kt.graph, &rev).width(), 2);
    }

    #[test]
    fn deterministic_and_checked() {
        let cfg = GenConfig { k: 3, n_vars: 12, n_atoms: Some(20), n_elim: Some(6), seed: 9, ..Default::default() };
        let (kt, g) = generate(&cfg).unwrap();
        assert_eq!(generate(&cfg).unwrap().1, g);
        assert_eq!(g.formula.atoms().len(), 20);
        assert_eq!(g.formula.quantified().len(), 6);
        assert!(gen_properties_check(&g, &kt).passed(3));
    }

    #[test]
    fn nonlinear_instance() {
        let cfg = GenConfig { k: 2, n_vars: 6, max_deg: 2, n_atoms: Some(6), seed: 3, ..Default::default() };
        let (kt, g) = generate(&cfg).unwrap();
        assert!(!g.formula.atoms().is_linear());
        assert!(gen_properties_check(&g, &kt).passed(2));
    }

    #[test]
    fn degenerate_single_edge() {
        let cfg = GenConfig { k: 1, n_vars: 2, seed: 1, ..Default::default() };
        let (kt, g) = generate(&cfg).unwrap();
        assert_eq!(g.formula.atoms().len(), 1);
        assert!(gen_properties_check(&g, &kt).passed(1));
    }

    #[test]
    fn config_errors() {
        let zero = GenConfig { coeff_range: (0, 0), ..Default::default() };
        assert!(matches!(generate(&zero), Err(Error::Config(_))));
        let few = GenConfig { n_atoms: Some(2), ..Default::default() };
        assert!(matches!(generate(&few), Err(Error::Config(_))));
    }

    #[test]
    fn forcing_kicks_in_when_sampling_keeps_missing() {
        // One atom over a 5-clique at minimum inclusion: a single sample
        // almost never contains all variables.
        let cfg = GenConfig { k: 4, n_vars: 5, include_prob: 0.05, seed: 2, ..Default::default() };
        let (kt, g) = generate(&cfg).unwrap();
        assert!(g.regenerations > 0);
        assert!(gen_properties_check(&g, &kt).passed(4));
    }
}

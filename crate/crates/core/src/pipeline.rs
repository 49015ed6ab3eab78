//! End-to-end runs: pick an order by some strategy, eliminate or project,
//! and record statistics.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::cad::{combined_degree, formula_polys, mccallum_proj, projection_sequence, PolySet};
use crate::error::{Error, Result};
use crate::fme::{fme_order_raw, fme_trace, ConstraintSet};
use crate::formula::{QuantFormula, Var};
use crate::graph::build_primal;
use crate::ordering::{
    brown_order, greedy_order_capped, greedy_order_raw, natural_order, order_from_td, random_orders, td_greedy_order, ElimOrder,
    Provenance,
};
use crate::stats::{fme_stats, var_names, CountPolicy, Mode, StatsRecord};
use crate::treedecomp::{choose_root, decompose_graph, validate_td, TdStrategy, TreeDecomp};

/// How an elimination order is chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    Natural,
    Greedy,
    Td,
    TdGreedy,
    Brown,
    /// Best of `n` uniformly random orders.
    Random(u64),
    Given(Vec<String>),
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "natural" => Strategy::Natural,
            "greedy" => Strategy::Greedy,
            "td" => Strategy::Td,
            "td-greedy" => Strategy::TdGreedy,
            "brown" => Strategy::Brown,
            "random" => Strategy::Random(5),
            _ => match s.strip_prefix("random:") {
                Some(n) => match n.parse::<u64>() {
                    Ok(n) if n > 0 => Strategy::Random(n),
                    _ => return Err(Error::Config(format!("bad trial count in '{s}'"))),
                },
                None => return Err(Error::Config(format!("unknown strategy '{s}'"))),
            },
        })
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Natural => f.write_str("natural"),
            Strategy::Greedy => f.write_str("greedy"),
            Strategy::Td => f.write_str("td"),
            Strategy::TdGreedy => f.write_str("td-greedy"),
            Strategy::Brown => f.write_str("brown"),
            Strategy::Random(n) => write!(f, "random:{n}"),
            Strategy::Given(_) => f.write_str("given"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: u64,
    /// Abort an elimination step that would produce more atoms than this.
    pub cap: Option<usize>,
    pub counting: CountPolicy,
    /// Decomposition to use for `td` strategies instead of a heuristic one.
    pub td: Option<TreeDecomp>,
    pub td_strategy: TdStrategy,
}

/// Heuristic decomposition of the primal graph, rerooted at the root
/// [`choose_root`] picks.
pub fn formula_td(f: &QuantFormula, strategy: TdStrategy, seed: u64) -> TreeDecomp {
    let t = decompose_graph(&build_primal(f), strategy, seed);
    let root = choose_root(&t);
    t.rerooted(root)
}

fn decomposition(f: &QuantFormula, opts: &RunOptions) -> Result<TreeDecomp> {
    match &opts.td {
        Some(t) => {
            validate_td(&build_primal(f), t).map_err(|v| Error::InvalidDecomposition(v.to_string()))?;
            Ok(t.clone())
        }
        None => Ok(formula_td(f, opts.td_strategy, opts.seed)),
    }
}

fn given_order(f: &QuantFormula, names: &[String]) -> Result<ElimOrder> {
    let mut vars = Vec::with_capacity(names.len());
    for n in names {
        let v = f.vars().get(n).ok_or_else(|| Error::Config(format!("unknown variable {n}")))?;
        vars.push(v);
    }
    let given: BTreeSet<Var> = vars.iter().copied().collect();
    if given.len() != vars.len() || given != f.quantified_set() {
        return Err(Error::Config("order must list every quantified variable exactly once".into()));
    }
    Ok(ElimOrder::new(vars, Provenance::Given))
}

fn linear_set(f: &QuantFormula) -> Result<ConstraintSet> {
    Ok(ConstraintSet::from_atoms(f.linear_atoms()?.iter().cloned()))
}

/// Order for `strategy` without running the final elimination. Greedy
/// strategies simulate it under the counting policy of `opts`; random
/// strategies return the first trial.
pub fn choose_order(f: &QuantFormula, strategy: &Strategy, opts: &RunOptions) -> Result<ElimOrder> {
    let q = f.quantified_set();
    Ok(match strategy {
        Strategy::Natural => natural_order(&q),
        Strategy::Td => restrict(order_from_td(&decomposition(f, opts)?), &q),
        Strategy::Brown => brown_order(&formula_polys(f).iter().collect(), &q),
        Strategy::Random(n) => random_orders(&q, *n, opts.seed).swap_remove(0),
        Strategy::Given(names) => given_order(f, names)?,
        Strategy::Greedy if f.atoms().is_linear() => match opts.counting {
            CountPolicy::Canonical => greedy_order_capped(&linear_set(f)?, &q, opts.cap)?.order,
            CountPolicy::Raw => greedy_order_raw(f.linear_atoms()?, &q, opts.cap)?.0,
        },
        Strategy::TdGreedy if opts.counting == CountPolicy::Raw => {
            return Err(Error::Config("td-greedy only supports canonical counting".into()))
        }
        Strategy::TdGreedy if f.atoms().is_linear() => {
            td_greedy_order(&linear_set(f)?, &decomposition(f, opts)?, opts.cap)?.order
        }
        Strategy::Greedy => greedy_projection_order(&formula_polys(f).iter().collect(), &q),
        Strategy::TdGreedy => return Err(Error::Config("td-greedy needs a linear formula".into())),
    })
}

fn restrict(order: ElimOrder, q: &BTreeSet<Var>) -> ElimOrder {
    ElimOrder::new(order.vars.into_iter().filter(|v| q.contains(v)).collect(), order.provenance)
}

/// Projection analogue of the greedy FME order: always project the
/// variable giving the smallest next set, ties to the lowest index.
pub fn greedy_projection_order(p: &PolySet, vars: &BTreeSet<Var>) -> ElimOrder {
    let mut remaining = vars.clone();
    let mut cur = p.clone();
    let mut order = Vec::new();
    while !remaining.is_empty() {
        let (x, next) = remaining
            .iter()
            .map(|&x| (x, mccallum_proj(&cur, x)))
            .min_by_key(|(x, s)| (s.len(), *x))
            .unwrap();
        remaining.remove(&x);
        order.push(x);
        cur = next;
    }
    ElimOrder::new(order, Provenance::Greedy)
}

/// Eliminates the quantified variables of a linear formula.
pub fn run_fme(instance: &str, f: &QuantFormula, strategy: &Strategy, opts: &RunOptions) -> Result<(ConstraintSet, StatsRecord)> {
    let start = Instant::now();
    let c = linear_set(f)?;
    let (result, mut rec) = match strategy {
        Strategy::Random(n) => {
            let mut best: Option<(ConstraintSet, StatsRecord)> = None;
            let mut exceeded = false;
            for order in random_orders(&f.quantified_set(), *n, opts.seed) {
                match fme_with_order(f, &c, &order.vars, opts) {
                    Ok((res, rec)) => {
                        if best.as_ref().map_or(true, |(_, b)| rec.final_count < b.final_count) {
                            best = Some((res, rec));
                        }
                    }
                    Err(Error::CapExceeded { .. }) => exceeded = true,
                    Err(e) => return Err(e),
                }
            }
            match best {
                Some((res, mut rec)) => {
                    rec.cap_exceeded = exceeded;
                    (res, rec)
                }
                None => {
                    let rec = StatsRecord { mode: Some(Mode::Fme), cap_exceeded: true, ..Default::default() };
                    (ConstraintSet::new(), rec)
                }
            }
        }
        _ => {
            let order = choose_order(f, strategy, opts)?;
            match fme_with_order(f, &c, &order.vars, opts) {
                Ok(r) => r,
                Err(Error::CapExceeded { .. }) => {
                    let rec = StatsRecord {
                        mode: Some(Mode::Fme),
                        order: var_names(f.vars(), &order.vars),
                        cap_exceeded: true,
                        ..Default::default()
                    };
                    (ConstraintSet::new(), rec)
                }
                Err(e) => return Err(e),
            }
        }
    };
    rec.instance = instance.to_string();
    rec.strategy = strategy.to_string();
    rec.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok((result, rec))
}

fn fme_with_order(f: &QuantFormula, c: &ConstraintSet, order: &[Var], opts: &RunOptions) -> Result<(ConstraintSet, StatsRecord)> {
    let trace = fme_trace(c, order, opts.cap)?;
    let mut rec = fme_stats(&trace, f.vars(), order);
    if opts.counting == CountPolicy::Raw {
        let atoms = f.linear_atoms()?;
        let counts = fme_order_raw(atoms, order, opts.cap)?;
        rec.canonical_final_count = Some(rec.final_count);
        rec.final_count = counts.last().copied().unwrap_or(atoms.len());
        rec.peak = counts.iter().copied().chain([atoms.len()]).max().unwrap_or(0);
        rec.per_step_counts = counts;
        rec.counting = CountPolicy::Raw;
    }
    Ok((trace.result, rec))
}

/// Projects away the quantified variables of a formula.
pub fn run_project(instance: &str, f: &QuantFormula, strategy: &Strategy, opts: &RunOptions) -> Result<(PolySet, StatsRecord)> {
    let start = Instant::now();
    let p: PolySet = formula_polys(f).iter().collect();
    let orders = match strategy {
        Strategy::Random(n) => random_orders(&f.quantified_set(), *n, opts.seed),
        _ => vec![choose_order(f, strategy, opts)?],
    };
    let mut best: Option<(PolySet, StatsRecord)> = None;
    for order in orders {
        let seq = projection_sequence(&p, &order.vars);
        let per_step: Vec<usize> = seq[1..].iter().map(PolySet::len).collect();
        let result = seq.last().unwrap().clone();
        let rec = StatsRecord {
            mode: Some(Mode::Cad),
            order: var_names(f.vars(), &order.vars),
            peak: seq.iter().map(PolySet::len).max().unwrap_or(0),
            final_count: result.len(),
            per_step_counts: per_step,
            max_combined_degree: seq.iter().filter_map(|s| combined_degree(s).ok()).max(),
            ..Default::default()
        };
        if best.as_ref().map_or(true, |(_, b)| rec.final_count < b.final_count) {
            best = Some((result, rec));
        }
    }
    let (result, mut rec) = best.expect("at least one order");
    rec.instance = instance.to_string();
    rec.strategy = strategy.to_string();
    rec.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok((result, rec))
}

/// One record per strategy, FME for linear formulas and projection
/// otherwise.
pub fn compare(instance: &str, f: &QuantFormula, strategies: &[Strategy], opts: &RunOptions) -> Result<Vec<StatsRecord>> {
    strategies
        .iter()
        .map(|s| {
            if f.atoms().is_linear() {
                run_fme(instance, f, s, opts).map(|r| r.1)
            } else {
                run_project(instance, f, s, opts).map(|r| r.1)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_formula;

    #[test]
    fn strategy_names_round_trip() {
        for s in ["natural", "greedy", "td", "td-greedy", "brown", "random:7"] {
            assert_eq!(s.parse::<Strategy>().unwrap().to_string(), s);
        }
        assert_eq!("random".parse::<Strategy>().unwrap(), Strategy::Random(5));
        assert!("random:0".parse::<Strategy>().is_err());
        assert!("best".parse::<Strategy>().is_err());
    }

    #[test]
    fn strategies_agree_on_small_system() {
        let f = parse_formula("exists x y; x + y <= 3; x - y >= 1; y >= z; x <= 4").unwrap();
        let mut results = Vec::new();
        for counting in [CountPolicy::Canonical, CountPolicy::Raw] {
            let opts = RunOptions { counting, ..Default::default() };
            for s in ["natural", "greedy", "td", "brown", "random:3"] {
                let (res, rec) = run_fme("t", &f, &s.parse().unwrap(), &opts).unwrap();
                assert_eq!(rec.per_step_counts.len(), rec.order.len());
                assert!(rec.peak >= rec.final_count);
                assert_eq!(rec.canonical_final_count.is_some(), counting == CountPolicy::Raw);
                results.push(res.canonical());
            }
        }
        let raw = RunOptions { counting: CountPolicy::Raw, ..Default::default() };
        assert!(run_fme("t", &f, &Strategy::TdGreedy, &raw).is_err());
        // every output is over z alone
        for r in &results {
            assert!(r.iter().all(|a| a.vars().iter().all(|v| f.vars().name(*v) == "z")));
        }
    }

    #[test]
    fn given_order_is_checked() {
        let f = parse_formula("exists x y; x + y <= 3; x - y >= 1").unwrap();
        let bad = Strategy::Given(vec!["x".into()]);
        assert!(matches!(run_fme("t", &f, &bad, &RunOptions::default()), Err(Error::Config(_))));
        let good = Strategy::Given(vec!["y".into(), "x".into()]);
        let (_, rec) = run_fme("t", &f, &good, &RunOptions::default()).unwrap();
        assert_eq!(rec.order, vec!["y", "x"]);
    }

    #[test]
    fn cap_is_recorded() {
        let f = parse_formula("exists x; x >= a; x >= b; x >= c; x <= d; x <= e; x <= g").unwrap();
        let opts = RunOptions { cap: Some(4), ..Default::default() };
        let (_, rec) = run_fme("t", &f, &Strategy::Natural, &opts).unwrap();
        assert!(rec.cap_exceeded);
        let (_, rec) = run_fme("t", &f, &Strategy::Random(2), &opts).unwrap();
        assert!(rec.cap_exceeded);
    }

    #[test]
    fn projection_records_degrees() {
        let f = parse_formula("exists x; x^2 + y^2 - 1 < 0; x*y - 1 > 0").unwrap();
        for s in ["natural", "greedy", "td", "brown", "random:2"] {
            let (res, rec) = run_project("t", &f, &s.parse().unwrap(), &RunOptions::default()).unwrap();
            assert_eq!(rec.final_count, res.len());
            assert!(rec.max_combined_degree.unwrap() >= 2);
        }
        assert!(run_fme("t", &f, &Strategy::Natural, &RunOptions::default()).is_err());
    }
}

//! Per-run statistics, serialized as JSON.

use serde::{Deserialize, Serialize};

use crate::fme::FmeTrace;
use crate::formula::{Var, VarTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fme,
    Cad,
}

/// How atoms are counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountPolicy {
    /// Canonical, deduplicated, non-constant atoms.
    #[default]
    Canonical,
    /// Every generated inequality, duplicates and constants included.
    Raw,
}

/// Outcome of a quantifier elimination run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// No atoms left.
    True,
    False,
    /// A nontrivial quantifier-free formula remains.
    Residual,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub instance: String,
    pub mode: Option<Mode>,
    pub strategy: String,
    pub counting: CountPolicy,
    pub order: Vec<String>,
    /// Set size after each elimination step, aligned with `order`.
    pub per_step_counts: Vec<usize>,
    pub peak: usize,
    pub final_count: usize,
    /// Canonical final count, when `counting` is raw.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub canonical_final_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_combined_degree: Option<u32>,
    pub elapsed_ms: u64,
    pub verdict: Option<Verdict>,
    /// Step index at which FALSE was first derived.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub false_step: Option<usize>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub cap_exceeded: bool,
}

pub fn var_names(vars: &VarTable, order: &[Var]) -> Vec<String> {
    order.iter().map(|&v| vars.name(v).to_string()).collect()
}

/// Record for an FME trace. An empty trace gives an all-zero record.
pub fn fme_stats(trace: &FmeTrace, vars: &VarTable, order: &[Var]) -> StatsRecord {
    let verdict = if trace.result.is_false() {
        Verdict::False
    } else if trace.result.is_empty() {
        Verdict::True
    } else {
        Verdict::Residual
    };
    StatsRecord {
        mode: Some(Mode::Fme),
        order: var_names(vars, order),
        per_step_counts: trace.per_step.clone(),
        peak: trace.peak,
        final_count: trace.result.len(),
        verdict: Some(verdict),
        false_step: trace.false_step,
        ..Default::default()
    }
}

impl StatsRecord {
    /// The record with timing zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> StatsRecord {
        StatsRecord { elapsed_ms: 0, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fme::{fme_trace, ConstraintSet};
    use crate::parse::parse_formula;

    #[test]
    fn empty_trace_is_all_zero() {
        let s = fme_stats(&FmeTrace::default(), &VarTable::new(), &[]);
        assert_eq!((s.peak, s.final_count, s.per_step_counts.len()), (0, 0, 0));
        assert_eq!(s.verdict, Some(Verdict::True));
    }

    #[test]
    fn false_step_recorded() {
        let f = parse_formula("exists a b; a < b; b < a; a >= 0").unwrap();
        let c = ConstraintSet::from_atoms(f.linear_atoms().unwrap().iter().cloned());
        let order = f.quantified().to_vec();
        let t = fme_trace(&c, &order, None).unwrap();
        let s = fme_stats(&t, f.vars(), &order);
        assert_eq!(s.verdict, Some(Verdict::False));
        assert!(s.false_step.is_some());
        assert_eq!(s.per_step_counts.len(), s.order.len());
        let json = serde_json::to_string(&s).unwrap();
        let back: StatsRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}

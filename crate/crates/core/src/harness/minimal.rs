use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::cf::{CfSettings, GeneticCf};
use crate::classifier::{is_bad, is_good, Classifier};
use crate::consistency::{for_each_instance, DEFAULT_BRUTE_FORCE_CAP};
use crate::duality::{CfCache, CfContext, CoverLimits};
use crate::schema::{relevant_components, Dataset, Instance, PlafConstraint, Rule, RuleComponent};

pub const DEFAULT_MINIMAL_CAP: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MinimalSearch {
    /// Smallest cardinality with a consistent rule, and every rule at it.
    Found { cardinality: usize, rules: Vec<Rule> },
    /// Nothing consistent up to and including `cap`.
    CapReached { cap: usize },
}

impl MinimalSearch {
    pub fn cardinality(&self) -> Option<usize> {
        match self {
            MinimalSearch::Found { cardinality, .. } => Some(*cardinality),
            MinimalSearch::CapReached { .. } => None,
        }
    }
}

/// How candidate rules are checked.
enum Verifier<'a> {
    /// Maximal sets of relevant components satisfied by some good instance,
    /// as bitmasks; a rule is consistent when it fits in none of them.
    Exact(Vec<u128>),
    Oracle(CfContext<'a>),
}

impl Verifier<'_> {
    fn consistent(&self, mask: u128, rule: impl FnOnce() -> Rule) -> Result<bool, HarnessError> {
        match self {
            Verifier::Exact(goods) => Ok(goods.iter().all(|g| mask & !g != 0)),
            Verifier::Oracle(ctx) => Ok(ctx.is_consistent(&rule())?),
        }
    }
}

fn exact_verifier(anchor: &Instance, comps: &[RuleComponent], model: &Classifier, data: &Dataset) -> Option<Vec<u128>> {
    if comps.len() > 128 {
        return None;
    }
    let mut masks = std::collections::BTreeSet::new();
    for_each_instance(&PlafConstraint::unconstrained(), data.schema(), DEFAULT_BRUTE_FORCE_CAP, |x| {
        if is_good(model.score(x)) {
            let m = comps
                .iter()
                .enumerate()
                .filter(|(_, c)| c.holds(x))
                .fold(0u128, |acc, (i, _)| acc | 1 << i);
            masks.insert(m);
        }
        true
    })
    .ok()?;
    debug_assert!(comps.iter().all(|c| c.holds(anchor.values())));
    let masks: Vec<u128> = masks.into_iter().collect();
    let maximal = masks
        .iter()
        .copied()
        .filter(|&m| !masks.iter().any(|&o| o != m && m & o == m))
        .collect();
    Some(maximal)
}

/// Tries all rules relevant to `x` by ascending cardinality. Uses an exact
/// check when the instance space is enumerable and the oracle otherwise.
pub fn minimal_rule_search(x: &Instance, model: &Classifier, data: &Dataset, cap: usize) -> Result<MinimalSearch, HarnessError> {
    let score = model.predict(x)?;
    if !is_bad(score) {
        return Err(HarnessError::AnchorNotBad { score });
    }
    let comps = relevant_components(x);
    let oracle = GeneticCf::new();
    let cache = CfCache::new();
    let verifier = match exact_verifier(x, &comps, model, data) {
        Some(goods) => Verifier::Exact(goods),
        None => Verifier::Oracle(CfContext {
            model,
            data,
            anchor: x,
            oracle: &oracle,
            cache: &cache,
            settings: CfSettings::default(),
            covers: CoverLimits::default(),
            seed: 0,
        }),
    };
    let cap = cap.min(comps.len());
    for size in 0..=cap {
        let mut rules = Vec::new();
        let mut err = None;
        for_each_combination(comps.len(), size, |idx| {
            let mask = idx.iter().fold(0u128, |acc, &i| acc | 1 << i);
            let build = || Rule::anchored(x, idx.iter().map(|&i| comps[i])).expect("relevant components");
            match verifier.consistent(mask, build) {
                Ok(true) => rules.push(build()),
                Ok(false) => {}
                Err(e) => {
                    err = Some(e);
                    return false;
                }
            }
            true
        });
        if let Some(e) = err {
            return Err(e);
        }
        if !rules.is_empty() {
            rules.sort();
            return Ok(MinimalSearch::Found { cardinality: size, rules });
        }
    }
    Ok(MinimalSearch::CapReached { cap })
}

/// Lexicographic `size`-subsets of `0..n`; stops when `visit` returns false.
fn for_each_combination(n: usize, size: usize, mut visit: impl FnMut(&[usize]) -> bool) {
    if size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        if !visit(&idx) {
            return;
        }
        let Some(i) = (0..size).rev().find(|&i| idx[i] != i + n - size) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synthetic::grid_schema;
    use crate::harness::uniform_dataset;

    #[test]
    fn combinations_count() {
        let mut n = 0;
        for_each_combination(6, 3, |_| {
            n += 1;
            true
        });
        assert_eq!(n, 20);
        let mut empty = 0;
        for_each_combination(4, 0, |c| {
            assert!(c.is_empty());
            empty += 1;
            true
        });
        assert_eq!(empty, 1);
    }

    #[test]
    fn two_component_truth() {
        let schema = grid_schema(3, &[5]).unwrap();
        let truth = Rule::from_components([RuleComponent::leq(0, 2.0), RuleComponent::geq(2, 1.0)]).unwrap();
        let model = Classifier::from_rule(truth);
        let data = uniform_dataset(&schema, 50, 1);
        let x = Instance::new(vec![1.0, 3.0, 2.0]);
        let found = minimal_rule_search(&x, &model, &data, 6).unwrap();
        assert_eq!(
            found,
            MinimalSearch::Found {
                cardinality: 2,
                rules: vec![Rule::anchored(&x, [RuleComponent::leq(0, 1.0), RuleComponent::geq(2, 2.0)]).unwrap()],
            }
        );
        assert_eq!(minimal_rule_search(&x, &model, &data, 1).unwrap(), MinimalSearch::CapReached { cap: 1 });
    }
}

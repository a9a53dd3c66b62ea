use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

use super::genetic::check_anchor;
use super::operators::Scorer;
use super::{ExplainError, ExplainStats, ExplanationResult, SearchParams};
use crate::cf::{CounterfactualOracle, GeneticCf};
use crate::classifier::Classifier;
use crate::duality::{cf_rules, CfCache, CfContext};
use crate::schema::{Dataset, Instance, Rule};

/// Ordered by cardinality, then canonically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct BySize(usize, Rule);

impl BySize {
    fn new(rule: Rule) -> Self {
        Self(rule.cardinality(), rule)
    }
}

/// Best-first search over counterfactual extensions, smallest rule first.
/// Returns a single oracle-verified rule.
pub fn greedy_rule_cf(
    x: &Instance,
    model: &Classifier,
    data: &Dataset,
    params: &SearchParams,
) -> Result<ExplanationResult, ExplainError> {
    greedy_rule_cf_with(x, model, data, params, &GeneticCf::new(), &CfCache::new())
}

pub fn greedy_rule_cf_with(
    x: &Instance,
    model: &Classifier,
    data: &Dataset,
    params: &SearchParams,
    oracle: &dyn CounterfactualOracle,
    cache: &CfCache,
) -> Result<ExplanationResult, ExplainError> {
    let calls0 = model.calls();
    check_anchor(x, model, params)?;
    let clock = Instant::now();
    let misses0 = cache.misses();
    let ctx = CfContext {
        model,
        data,
        anchor: x,
        oracle,
        cache,
        settings: params.cf,
        covers: params.covers,
        seed: params.seed,
    };
    let mut stats = ExplainStats::default();
    let mut visited: HashSet<Rule> = HashSet::new();
    let mut frontier: BTreeSet<BySize> = BTreeSet::new();
    frontier.insert(BySize::new(Rule::empty()));

    let found = loop {
        let Some(BySize(size, rule)) = frontier.pop_first() else {
            break None;
        };
        if stats.iterations >= params.max_expansions {
            break None;
        }
        stats.iterations += 1;
        stats.expanded_cardinalities.push(size);
        visited.insert(rule.clone());

        let t = Instant::now();
        let out = cf_rules(&ctx, std::slice::from_ref(&rule))?;
        stats.phases.cf_rules += t.elapsed();
        if !out.verified.is_empty() {
            break Some(rule);
        }
        frontier.extend(out.candidates.into_iter().filter(|r| !visited.contains(r)).map(BySize::new));
        while frontier.len() > params.q {
            frontier.pop_last();
        }
    };

    let rule = found.unwrap_or_else(|| {
        stats.hit_iteration_cap = true;
        Rule::trivial(x)
    });
    let t = Instant::now();
    let mut scorer = Scorer::new(data, model, x, params.s, params.seed);
    let scored = scorer.score(&rule, Some(cache))?;
    stats.phases.select += t.elapsed();

    stats.classifier_calls = model.calls() - calls0;
    stats.cf_calls = cache.misses() - misses0;
    stats.rules_scored = scorer.scored();
    stats.wall_time = clock.elapsed();
    Ok(ExplanationResult { rules: vec![scored], stats })
}

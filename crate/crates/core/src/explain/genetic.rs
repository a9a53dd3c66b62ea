use std::collections::HashMap;
use std::time::Instant;

use super::operators::{crossover, mutate, singleton_rules, Scorer};
use super::reduce::reduce_redundancy;
use super::fitness::rank_order;
use super::{ExplainError, ExplainStats, ExplanationResult, ScoredRule, SearchParams};
use crate::cf::{CounterfactualOracle, GeneticCf};
use crate::classifier::{is_bad, Classifier};
use crate::duality::{cf_rules, splitmix, CfCache, CfContext};
use crate::schema::{Dataset, Instance, Rule};

const CROSS_SALT: u64 = 0x4352_4f53_5300_0001;
const MUT_SALT: u64 = 0x4d55_5441_5445_0001;

pub(crate) fn check_anchor(x: &Instance, model: &Classifier, params: &SearchParams) -> Result<(), ExplainError> {
    params.validate()?;
    let score = model.predict(x)?;
    if !is_bad(score) {
        return Err(ExplainError::AnchorNotBad { score });
    }
    Ok(())
}

/// Iteration of first appearance per rule.
#[derive(Default)]
struct Seen(HashMap<Rule, usize>);

impl Seen {
    fn note(&mut self, rules: &[Rule], iter: usize) {
        for r in rules {
            self.0.entry(r.clone()).or_insert(iter);
        }
    }

    fn any_new(&self, top: &[ScoredRule], iter: usize) -> bool {
        top.iter().any(|r| self.0.get(&r.rule) == Some(&iter))
    }
}

fn offspring(pop: &[ScoredRule], x: &Instance, params: &SearchParams, iter: usize) -> Vec<Rule> {
    let parents: Vec<Rule> = pop.iter().map(|r| r.rule.clone()).collect();
    let step = splitmix(params.seed ^ (iter as u64).wrapping_mul(0x9e37_79b9));
    let mut out = crossover(&parents, params.c, step ^ CROSS_SALT);
    out.extend(mutate(&parents, params.m, x, step ^ MUT_SALT));
    out
}

/// Genetic search scored on the data and on samples only.
pub fn genetic_rule(
    x: &Instance,
    model: &Classifier,
    data: &Dataset,
    params: &SearchParams,
) -> Result<ExplanationResult, ExplainError> {
    let calls0 = model.calls();
    check_anchor(x, model, params)?;
    let clock = Instant::now();
    let mut stats = ExplainStats::default();
    let mut scorer = Scorer::new(data, model, x, params.s, params.seed);
    let mut seen = Seen::default();

    let initial = singleton_rules(x);
    seen.note(&initial, 0);
    let t = Instant::now();
    let mut pop = scorer.select(initial, params.q, None)?;
    stats.phases.select += t.elapsed();

    for iter in 1..=params.max_iterations {
        stats.iterations = iter;
        let t = Instant::now();
        let kids = offspring(&pop, x, params, iter);
        seen.note(&kids, iter);
        stats.phases.generate += t.elapsed();

        let t = Instant::now();
        let cands = pop.iter().map(|r| r.rule.clone()).chain(kids);
        pop = scorer.select(cands, params.q, None)?;
        stats.phases.select += t.elapsed();

        let top = &pop[..params.k.min(pop.len())];
        if top.iter().all(|r| r.level.is_gc()) && !seen.any_new(top, iter) {
            break;
        }
        if iter == params.max_iterations {
            stats.hit_iteration_cap = true;
        }
    }

    pop.truncate(params.k);
    stats.classifier_calls = model.calls() - calls0;
    stats.rules_scored = scorer.scored();
    stats.wall_time = clock.elapsed();
    Ok(ExplanationResult { rules: pop, stats })
}

/// Genetic search that also draws candidates from counterfactual duals and
/// only stops on oracle-verified rules.
pub fn genetic_rule_cf(
    x: &Instance,
    model: &Classifier,
    data: &Dataset,
    params: &SearchParams,
) -> Result<ExplanationResult, ExplainError> {
    genetic_rule_cf_with(x, model, data, params, &GeneticCf::new(), &CfCache::new())
}

pub fn genetic_rule_cf_with(
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
    let mut scorer = Scorer::new(data, model, x, params.s, params.seed);
    let mut seen = Seen::default();

    let t = Instant::now();
    let mut initial = singleton_rules(x);
    let from_empty = cf_rules(&ctx, &[Rule::empty()])?;
    initial.extend(from_empty.candidates);
    initial.extend(from_empty.verified);
    stats.phases.cf_rules += t.elapsed();
    seen.note(&initial, 0);
    let t = Instant::now();
    let mut pop = scorer.select(initial, params.q, Some(cache))?;
    stats.phases.select += t.elapsed();
    let mut all_data_consistent = false;

    for iter in 1..=params.max_iterations {
        stats.iterations = iter;
        let t = Instant::now();
        let mut kids = offspring(&pop, x, params, iter);
        stats.phases.generate += t.elapsed();

        if (iter - 1) % params.cf_period == 0 || all_data_consistent {
            let t = Instant::now();
            let parents: Vec<Rule> = pop.iter().map(|r| r.rule.clone()).collect();
            kids.extend(cf_rules(&ctx, &parents)?.candidates);
            stats.cf_rules_iterations.push(iter);
            stats.phases.cf_rules += t.elapsed();
        }
        seen.note(&kids, iter);

        let t = Instant::now();
        let cands = pop.iter().map(|r| r.rule.clone()).chain(kids);
        pop = scorer.select(cands, params.q, Some(cache))?;
        stats.phases.select += t.elapsed();

        let k = params.k.min(pop.len());
        all_data_consistent = pop[..k].iter().all(|r| r.level.vd == 0);
        if pop[..k].iter().all(|r| r.level.is_gc()) {
            let t = Instant::now();
            for r in &pop[..k] {
                ctx.outcome(&r.rule)?;
            }
            stats.phases.verify += t.elapsed();
            // Refutations may have demoted some of the top rules.
            let survivors = std::mem::take(&mut pop).into_iter().map(|r| r.rule);
            pop = scorer.select(survivors, params.q, Some(cache))?;
            let top = &pop[..k];
            if top.iter().all(|r| r.cf_verified) && !seen.any_new(top, iter) {
                break;
            }
        }
        if iter == params.max_iterations {
            stats.hit_iteration_cap = true;
        }
    }

    pop.truncate(params.k);
    if params.post_reduce {
        if let Some(best) = pop.first().filter(|r| r.cf_verified).map(|r| r.rule.clone()) {
            let t = Instant::now();
            let reduced = reduce_redundancy(&best, &ctx)?;
            stats.phases.reduce += t.elapsed();
            if reduced != best {
                let entry = scorer.score(&reduced, Some(cache))?;
                pop.retain(|r| r.rule != reduced);
                pop[0] = entry;
                pop.sort_by(rank_order);
            }
        }
    }

    stats.classifier_calls = model.calls() - calls0;
    stats.cf_calls = cache.misses() - misses0;
    stats.rules_scored = scorer.scored();
    stats.wall_time = clock.elapsed();
    Ok(ExplanationResult { rules: pop, stats })
}

use std::collections::{BTreeSet, HashMap};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::fitness::{fitness, rank_order};
use super::{ExplainError, ScoredRule};
use crate::classifier::Classifier;
use crate::consistency::{ConsistencyChecker, ConsistencyLevel, Level};
use crate::duality::{rule_seed, CacheEntry, CfCache};
use crate::schema::{relevant_components, Dataset, Instance, Rule};

/// Salt separating sampling seeds from oracle seeds.
const SAMPLE_SALT: u64 = 0x5a4d_504c_4553_0001;

/// Every single-component rule relevant to `anchor`.
pub fn singleton_rules(anchor: &Instance) -> Vec<Rule> {
    relevant_components(anchor)
        .into_iter()
        .map(|c| Rule::from_sorted_unchecked(vec![c]))
        .collect()
}

/// Up to `m` children per parent, each adding one component the parent lacks.
pub fn mutate_with(pop: &[Rule], m: usize, anchor: &Instance, rng: &mut impl Rng) -> Vec<Rule> {
    let all = relevant_components(anchor);
    let mut out = Vec::with_capacity(pop.len() * m);
    for parent in pop {
        let missing: Vec<_> = all.iter().filter(|c| !parent.contains(c)).collect();
        let take = m.min(missing.len());
        for i in sample(rng, missing.len(), take) {
            out.push(parent.with(*missing[i]));
        }
    }
    out
}

pub fn mutate(pop: &[Rule], m: usize, anchor: &Instance, seed: u64) -> Vec<Rule> {
    mutate_with(pop, m, anchor, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `c` children per unordered pair, each sampling `max(|a|, |b|) + 1`
/// components of the union (capped at the union size).
pub fn crossover_with(pop: &[Rule], c: usize, rng: &mut impl Rng) -> Vec<Rule> {
    let mut out = Vec::new();
    for i in 0..pop.len() {
        for j in i + 1..pop.len() {
            let union = pop[i].union(&pop[j]);
            let pool = union.components();
            let t = (pop[i].cardinality().max(pop[j].cardinality()) + 1).min(pool.len());
            for _ in 0..c {
                let mut picked: Vec<_> = sample(rng, pool.len(), t).into_iter().map(|k| pool[k]).collect();
                picked.sort();
                out.push(Rule::from_sorted_unchecked(picked));
            }
        }
    }
    out
}

pub fn crossover(pop: &[Rule], c: usize, seed: u64) -> Vec<Rule> {
    crossover_with(pop, c, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Scores rules, memoizing consistency levels across iterations.
pub(crate) struct Scorer<'a> {
    checker: ConsistencyChecker<'a>,
    n: usize,
    m: usize,
    s: usize,
    seed: u64,
    levels: HashMap<Rule, ConsistencyLevel>,
}

impl<'a> Scorer<'a> {
    pub(crate) fn new(data: &'a Dataset, model: &'a Classifier, anchor: &Instance, s: usize, seed: u64) -> Self {
        Self {
            checker: ConsistencyChecker::new(data, model).with_components(&relevant_components(anchor)),
            n: data.schema().n(),
            m: data.m(),
            s,
            seed,
            levels: HashMap::new(),
        }
    }

    pub(crate) fn scored(&self) -> usize {
        self.levels.len()
    }

    fn fill(&mut self, rules: &[&Rule]) -> Result<(), ExplainError> {
        let todo: Vec<&Rule> = rules.iter().copied().filter(|r| !self.levels.contains_key(*r)).collect();
        let checker = &self.checker;
        let (s, seed) = (self.s, self.seed ^ SAMPLE_SALT);
        let computed: Vec<(Rule, ConsistencyLevel)> = todo
            .par_iter()
            .map(|r| Ok(((*r).clone(), checker.level(r, s, rule_seed(seed, r))?)))
            .collect::<Result<_, ExplainError>>()?;
        self.levels.extend(computed);
        Ok(())
    }

    /// Scores `rule`; a cached counterfactual refutation caps it at FGC.
    pub(crate) fn score(&mut self, rule: &Rule, cache: Option<&CfCache>) -> Result<ScoredRule, ExplainError> {
        self.fill(&[rule])?;
        Ok(self.finish(rule, cache))
    }

    fn finish(&self, rule: &Rule, cache: Option<&CfCache>) -> ScoredRule {
        let mut level = self.levels[rule];
        let entry = cache.and_then(|c| c.get(rule));
        let cf_verified = matches!(entry, Some(CacheEntry::Verified));
        if matches!(entry, Some(CacheEntry::Refuted(_))) && level.level == Level::Gc {
            level = ConsistencyLevel {
                level: Level::Fgc,
                vd: 0,
                vs: level.vs.max(1),
            };
        }
        ScoredRule {
            rule: rule.clone(),
            level,
            score: fitness(rule.cardinality(), self.n, level, self.m, self.s),
            cf_verified,
        }
    }

    /// Deduplicates, scores, ranks and keeps the best `q`.
    pub(crate) fn select(
        &mut self,
        cands: impl IntoIterator<Item = Rule>,
        q: usize,
        cache: Option<&CfCache>,
    ) -> Result<Vec<ScoredRule>, ExplainError> {
        let unique: Vec<Rule> = cands.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        self.fill(&unique.iter().collect::<Vec<_>>())?;
        let mut scored: Vec<ScoredRule> = unique.iter().map(|r| self.finish(r, cache)).collect();
        scored.sort_by(rank_order);
        scored.truncate(q);
        Ok(scored)
    }
}

/// Scores, ranks and truncates a candidate batch.
pub fn select_fittest(
    x: &Instance,
    cands: &[Rule],
    model: &Classifier,
    data: &Dataset,
    q: usize,
    s: usize,
    seed: u64,
) -> Result<Vec<ScoredRule>, ExplainError> {
    debug_assert!(cands.iter().all(|r| r.is_relevant_to(x)));
    Scorer::new(data, model, x, s, seed).select(cands.iter().cloned(), q, None)
}

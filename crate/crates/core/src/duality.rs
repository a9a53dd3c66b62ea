//! Rule/counterfactual duality.
//!
//! The dual of an instance `x` is the disjunction of every anchor-relevant
//! component that `x` falsifies. A globally consistent rule must intersect the
//! dual of every counterfactual, so minimal hitting sets of a family of duals
//! are the smallest extensions that rule out all the counterfactuals seen.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::cf::{CfError, CfQuery, CfResult, CfSettings, CounterfactualOracle};
use crate::classifier::Classifier;
use crate::schema::{Dataset, DualClause, Instance, Rule, RuleComponent};

/// Components relevant to `anchor` that conflict with `x`.
pub fn dual_of(anchor: &Instance, x: &Instance) -> DualClause {
    let conflicts = anchor
        .values()
        .iter()
        .zip(x.values())
        .enumerate()
        .filter_map(|(j, (&a, &v))| {
            if v > a {
                Some(RuleComponent::leq(j, a))
            } else if v < a {
                Some(RuleComponent::geq(j, a))
            } else {
                None
            }
        });
    DualClause::new(conflicts)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualFamily {
    pub clauses: Vec<DualClause>,
}

impl DualFamily {
    pub fn new(clauses: Vec<DualClause>) -> Self {
        Self { clauses }
    }

    pub fn from_counterfactuals<'a>(anchor: &Instance, xs: impl IntoIterator<Item = &'a Instance>) -> Self {
        Self::new(xs.into_iter().map(|x| dual_of(anchor, x)).collect())
    }
}

/// Bounds on hitting-set enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverLimits {
    /// Largest hitting set enumerated.
    pub max_size: usize,
    /// At most this many minimal sets are kept, smallest first.
    pub max_count: usize,
}

impl Default for CoverLimits {
    fn default() -> Self {
        Self {
            max_size: 12,
            max_count: 32,
        }
    }
}

impl CoverLimits {
    pub fn unbounded() -> Self {
        Self {
            max_size: usize::MAX,
            max_count: usize::MAX,
        }
    }
}

/// Inclusion-minimal hitting sets of `clauses`, by ascending size then
/// lexicographically. An empty family yields the single empty set; a family
/// with an empty clause has none.
pub fn minimal_hitting_sets<T: Ord + Clone>(clauses: &[Vec<T>], limits: CoverLimits) -> Vec<Vec<T>> {
    if clauses.is_empty() {
        return vec![Vec::new()];
    }
    if clauses.iter().any(|c| c.is_empty()) || limits.max_count == 0 {
        return Vec::new();
    }
    let universe: Vec<T> = clauses.iter().flatten().cloned().collect::<BTreeSet<T>>().into_iter().collect();
    let index = |e: &T| universe.binary_search(e).expect("element comes from a clause");
    let clause_idx: Vec<Vec<usize>> = clauses
        .iter()
        .map(|c| c.iter().map(index).collect::<BTreeSet<_>>().into_iter().collect())
        .collect();
    let mut hits = vec![Vec::new(); universe.len()];
    for (ci, clause) in clause_idx.iter().enumerate() {
        for &e in clause {
            hits[e].push(ci);
        }
    }
    let mut search = Branch {
        clauses: &clause_idx,
        hits: &hits,
        max_size: limits.max_size,
        hit_count: vec![0; clauses.len()],
        banned: vec![0; universe.len()],
        chosen: Vec::new(),
        found: BTreeSet::new(),
    };
    search.run();
    let mut sets: Vec<Vec<usize>> = search.found.into_iter().collect();
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    sets.truncate(limits.max_count);
    sets.into_iter()
        .map(|s| s.into_iter().map(|i| universe[i].clone()).collect())
        .collect()
}

/// Branches on the elements of the first clause not yet hit. Elements tried
/// earlier in a branch are banned below it, so each set is produced once, and
/// a prefix where some element has lost every private clause is cut.
struct Branch<'a> {
    clauses: &'a [Vec<usize>],
    hits: &'a [Vec<usize>],
    max_size: usize,
    hit_count: Vec<u32>,
    banned: Vec<u32>,
    chosen: Vec<usize>,
    found: BTreeSet<Vec<usize>>,
}

impl Branch<'_> {
    fn run(&mut self) {
        let Some(open) = self.hit_count.iter().position(|&c| c == 0) else {
            let mut set = self.chosen.clone();
            set.sort_unstable();
            self.found.insert(set);
            return;
        };
        if self.chosen.len() >= self.max_size {
            return;
        }
        let options: Vec<usize> = self.clauses[open].iter().copied().filter(|&e| self.banned[e] == 0).collect();
        for (i, &e) in options.iter().enumerate() {
            self.chosen.push(e);
            for &c in &self.hits[e] {
                self.hit_count[c] += 1;
            }
            if self.all_critical() {
                self.run();
            }
            for &c in &self.hits[e] {
                self.hit_count[c] -= 1;
            }
            self.chosen.pop();
            self.banned[e] += 1;
            if i + 1 == options.len() {
                for &done in &options {
                    self.banned[done] -= 1;
                }
            }
        }
    }

    fn all_critical(&self) -> bool {
        self.chosen
            .iter()
            .all(|&e| self.hits[e].iter().any(|&c| self.hit_count[c] == 1))
    }
}

pub fn minimal_set_covers(family: &DualFamily, limits: CoverLimits) -> Vec<Vec<RuleComponent>> {
    let clauses: Vec<Vec<RuleComponent>> = family.clauses.iter().map(|c| c.components().to_vec()).collect();
    minimal_hitting_sets(&clauses, limits)
}

/// Outcome of one counterfactual query for a rule.
#[derive(Debug, Clone, PartialEq)]
pub enum CacheEntry {
    /// No counterfactual satisfies the rule.
    Verified,
    /// Duals of the counterfactuals that satisfy the rule.
    Refuted(Vec<DualClause>),
}

/// Memoizes counterfactual outcomes per canonical rule.
#[derive(Debug, Default)]
pub struct CfCache {
    entries: RwLock<HashMap<Rule, CacheEntry>>,
    misses: AtomicU64,
}

impl CfCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, rule: &Rule) -> Option<CacheEntry> {
        self.entries.read().expect("cache lock").get(rule).cloned()
    }

    pub fn insert(&self, rule: Rule, entry: CacheEntry) {
        self.entries.write().expect("cache lock").insert(rule, entry);
    }

    /// Number of queries that went to the oracle.
    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything needed to ask the oracle about rules relevant to one anchor.
pub struct CfContext<'a> {
    pub model: &'a Classifier,
    pub data: &'a Dataset,
    pub anchor: &'a Instance,
    pub oracle: &'a dyn CounterfactualOracle,
    pub cache: &'a CfCache,
    pub settings: CfSettings,
    pub covers: CoverLimits,
    pub seed: u64,
}

impl CfContext<'_> {
    /// Looks the rule up in the cache, querying the oracle on a miss.
    pub fn outcome(&self, rule: &Rule) -> Result<CacheEntry, CfError> {
        if let Some(hit) = self.cache.get(rule) {
            return Ok(hit);
        }
        self.cache.misses.fetch_add(1, Ordering::Relaxed);
        let query = CfQuery::new(self.anchor.clone(), rule.to_plaf(), rule_seed(self.seed, rule))
            .with_settings(self.settings);
        let entry = match self.oracle.find(self.model, self.data, &query)? {
            CfResult::NotFound => CacheEntry::Verified,
            CfResult::Found(cfs) => {
                let mut duals = Vec::with_capacity(cfs.len());
                for cf in &cfs {
                    if !rule.eval(cf.instance.values()) {
                        return Err(CfError::Contract(format!(
                            "counterfactual {:?} violates the rule {rule}",
                            cf.instance.values()
                        )));
                    }
                    let dual = dual_of(self.anchor, &cf.instance);
                    if dual.is_empty() {
                        return Err(CfError::Contract("counterfactual equals the anchor".into()));
                    }
                    duals.push(dual);
                }
                CacheEntry::Refuted(duals)
            }
        };
        self.cache.insert(rule.clone(), entry.clone());
        Ok(entry)
    }

    /// True when the oracle finds no counterfactual satisfying `rule`.
    pub fn is_consistent(&self, rule: &Rule) -> Result<bool, CfError> {
        Ok(matches!(self.outcome(rule)?, CacheEntry::Verified))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CfRulesOutput {
    /// Extended rules, canonical order, no duplicates.
    pub candidates: Vec<Rule>,
    /// Input rules for which no counterfactual was found.
    pub verified: Vec<Rule>,
}

/// Extends each rule by every minimal cover of its counterfactuals' duals.
pub fn cf_rules(ctx: &CfContext<'_>, pop: &[Rule]) -> Result<CfRulesOutput, CfError> {
    let mut candidates = BTreeSet::new();
    let mut verified = BTreeSet::new();
    for rule in pop {
        match ctx.outcome(rule)? {
            CacheEntry::Verified => {
                verified.insert(rule.clone());
            }
            CacheEntry::Refuted(duals) => {
                let family = DualFamily::new(duals);
                for cover in minimal_set_covers(&family, ctx.covers) {
                    let ext = rule.union(&Rule::from_sorted_unchecked(cover));
                    if ext != *rule {
                        candidates.insert(ext);
                    }
                }
            }
        }
    }
    Ok(CfRulesOutput {
        candidates: candidates.into_iter().collect(),
        verified: verified.into_iter().collect(),
    })
}

/// Stable per-rule seed (FNV-1a over the canonical components, then splitmix).
pub fn rule_seed(seed: u64, rule: &Rule) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    let mut feed = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for c in rule.components() {
        feed(c.slot() as u64);
        feed(c.bound.to_bits());
    }
    splitmix(h)
}

pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

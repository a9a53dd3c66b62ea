//! Consistency checks for rules: on the dataset, on samples from the rule's
//! instance space, through the counterfactual oracle, and exhaustively.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cf::CfError;
use crate::classifier::{is_good, Classifier};
use crate::duality::CfContext;
use crate::schema::{Dataset, DatasetSchema, PlafConstraint, Rule, RuleComponent, SchemaError};

pub const DEFAULT_BRUTE_FORCE_CAP: u64 = 1_000_000;

/// Ordered from weakest to strongest guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    /// Failed data consistency.
    Fdc,
    /// Consistent on the data, failed on sampled instances.
    Fgc,
    /// Consistent on the data and on every sample.
    Gc,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Fdc => "FDC",
            Level::Fgc => "FGC",
            Level::Gc => "GC",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConsistencyLevel {
    pub level: Level,
    /// Dataset instances satisfying the rule with a good outcome.
    pub vd: usize,
    /// Sampled instances satisfying the rule with a good outcome (0 when `vd > 0`).
    pub vs: usize,
}

impl ConsistencyLevel {
    pub fn from_counts(vd: usize, vs: usize) -> Self {
        let level = if vd > 0 {
            Level::Fdc
        } else if vs > 0 {
            Level::Fgc
        } else {
            Level::Gc
        };
        Self {
            level,
            vd,
            vs: if vd > 0 { 0 } else { vs },
        }
    }

    pub fn is_gc(&self) -> bool {
        self.level == Level::Gc
    }
}

/// Precomputes dataset outcomes once so repeated level checks only pay for sampling.
pub struct ConsistencyChecker<'a> {
    data: &'a Dataset,
    model: &'a Classifier,
    good_rows: Vec<usize>,
    /// Per component, a bitset over `good_rows` of the rows it accepts.
    masks: HashMap<RuleComponent, Vec<u64>>,
}

impl<'a> ConsistencyChecker<'a> {
    pub fn new(data: &'a Dataset, model: &'a Classifier) -> Self {
        let good_rows = data
            .instances()
            .iter()
            .enumerate()
            .filter(|(_, x)| is_good(model.score(x.values())))
            .map(|(i, _)| i)
            .collect();
        Self {
            data,
            model,
            good_rows,
            masks: HashMap::new(),
        }
    }

    /// Indexes `components` so data checks on rules built from them are bitset intersections.
    pub fn with_components(mut self, components: &[RuleComponent]) -> Self {
        let rows = self.data.instances();
        let words = self.good_rows.len().div_ceil(64);
        for c in components {
            let mut bits = vec![0u64; words];
            for (k, &i) in self.good_rows.iter().enumerate() {
                if c.holds(rows[i].values()) {
                    bits[k / 64] |= 1 << (k % 64);
                }
            }
            self.masks.insert(*c, bits);
        }
        self
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn violations_in_data(&self, rule: &Rule) -> usize {
        let indexed: Option<Vec<&Vec<u64>>> = rule.components().iter().map(|c| self.masks.get(c)).collect();
        if let Some(sets) = indexed.filter(|s| !s.is_empty()) {
            let words = sets[0].len();
            return (0..words)
                .map(|w| sets.iter().fold(u64::MAX, |acc, s| acc & s[w]).count_ones() as usize)
                .sum();
        }
        let rows = self.data.instances();
        self.good_rows.iter().filter(|&&i| rule.eval(rows[i].values())).count()
    }

    /// Draws `s` instances uniformly from the rule's instance space and counts good ones.
    pub fn violations_in_samples(&self, rule: &Rule, s: usize, seed: u64) -> Result<usize, SchemaError> {
        let schema = self.data.schema();
        let ranges = rule.to_plaf().index_ranges(schema)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; schema.n()];
        let mut violations = 0;
        for _ in 0..s {
            for (j, &(lo, hi)) in ranges.iter().enumerate() {
                x[j] = schema.feature(j).domain()[rng.gen_range(lo..=hi)];
            }
            if is_good(self.model.score(&x)) {
                violations += 1;
            }
        }
        Ok(violations)
    }

    pub fn level(&self, rule: &Rule, s: usize, seed: u64) -> Result<ConsistencyLevel, SchemaError> {
        let vd = self.violations_in_data(rule);
        if vd > 0 {
            // The rule must still admit an instance.
            rule.to_plaf().index_ranges(self.data.schema())?;
            return Ok(ConsistencyLevel::from_counts(vd, 0));
        }
        let vs = self.violations_in_samples(rule, s, seed)?;
        Ok(ConsistencyLevel::from_counts(0, vs))
    }
}

pub fn consistency_level(
    rule: &Rule,
    data: &Dataset,
    model: &Classifier,
    s: usize,
    seed: u64,
) -> Result<ConsistencyLevel, SchemaError> {
    ConsistencyChecker::new(data, model).level(rule, s, seed)
}

/// Oracle-backed global consistency: no counterfactual satisfies the rule.
pub fn consistent_cf(rule: &Rule, ctx: &CfContext<'_>) -> Result<bool, CfError> {
    ctx.is_consistent(rule)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BruteForce {
    Consistent,
    Inconsistent,
    TooLarge,
}

/// Exact check over the cross product of domain values admitted by the rule.
pub fn brute_force_global_consistent(rule: &Rule, model: &Classifier, schema: &DatasetSchema, cap: u64) -> BruteForce {
    match find_good_instance(&rule.to_plaf(), model, schema, cap) {
        Ok(Some(_)) => BruteForce::Inconsistent,
        Ok(None) => BruteForce::Consistent,
        Err(SpaceError::TooLarge) => BruteForce::TooLarge,
        // No instance satisfies the rule at all.
        Err(SpaceError::Empty) => BruteForce::Consistent,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceError {
    TooLarge,
    Empty,
}

/// Visits every instance admitted by `plaf` in odometer order, if at most `cap`.
/// Stops early when `visit` returns `false`.
pub fn for_each_instance(
    plaf: &PlafConstraint,
    schema: &DatasetSchema,
    cap: u64,
    mut visit: impl FnMut(&[f64]) -> bool,
) -> Result<(), SpaceError> {
    let ranges = plaf.index_ranges(schema).map_err(|_| SpaceError::Empty)?;
    let size = ranges
        .iter()
        .try_fold(1u64, |acc, (lo, hi)| acc.checked_mul((hi - lo + 1) as u64));
    match size {
        Some(s) if s <= cap => {}
        _ => return Err(SpaceError::TooLarge),
    }
    let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    let mut x: Vec<f64> = idx.iter().enumerate().map(|(j, &i)| schema.feature(j).domain()[i]).collect();
    loop {
        if !visit(&x) {
            return Ok(());
        }
        let mut j = 0;
        loop {
            if j == idx.len() {
                return Ok(());
            }
            if idx[j] < ranges[j].1 {
                idx[j] += 1;
                x[j] = schema.feature(j).domain()[idx[j]];
                break;
            }
            idx[j] = ranges[j].0;
            x[j] = schema.feature(j).domain()[idx[j]];
            j += 1;
        }
    }
}

/// First good instance admitted by `plaf`, by exhaustive enumeration.
pub fn find_good_instance(
    plaf: &PlafConstraint,
    model: &Classifier,
    schema: &DatasetSchema,
    cap: u64,
) -> Result<Option<Vec<f64>>, SpaceError> {
    let mut hit = None;
    for_each_instance(plaf, schema, cap, |x| {
        if is_good(model.score(x)) {
            hit = Some(x.to_vec());
            false
        } else {
            true
        }
    })?;
    Ok(hit)
}

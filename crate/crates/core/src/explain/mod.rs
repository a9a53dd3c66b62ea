//! Rule search: the genetic baseline, the genetic search with a counterfactual
//! oracle, and the greedy oracle-driven search.

mod fitness;
mod genetic;
mod greedy;
mod operators;
mod reduce;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cf::{CfError, CfSettings};
use crate::classifier::ModelError;
use crate::consistency::ConsistencyLevel;
use crate::duality::CoverLimits;
use crate::schema::{Rule, SchemaError};

pub use fitness::{fitness, rank_order};
pub use genetic::{genetic_rule, genetic_rule_cf, genetic_rule_cf_with};
pub use greedy::{greedy_rule_cf, greedy_rule_cf_with};
pub use operators::{crossover, crossover_with, mutate, mutate_with, select_fittest, singleton_rules};
pub use reduce::reduce_redundancy;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("instance already has a good outcome (score {score})")]
    AnchorNotBad { score: f64 },
    #[error("invalid search parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Population kept per iteration.
    pub q: usize,
    /// Rules returned.
    pub k: usize,
    /// Samples per sampled consistency check.
    pub s: usize,
    /// Mutations per candidate.
    pub m: usize,
    /// Crossovers per candidate pair.
    pub c: usize,
    pub seed: u64,
    /// Iterations between oracle-driven candidate generation.
    pub cf_period: usize,
    pub max_iterations: usize,
    /// Only the greedy search reads this.
    pub max_expansions: usize,
    /// Remove redundant components from the top rule of the oracle-backed genetic search.
    pub post_reduce: bool,
    pub cf: CfSettings,
    pub covers: CoverLimits,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            q: 50,
            k: 5,
            s: 1000,
            m: 3,
            c: 2,
            seed: 0,
            cf_period: 3,
            max_iterations: 200,
            max_expansions: 5000,
            post_reduce: true,
            cf: CfSettings::default(),
            covers: CoverLimits::default(),
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), ExplainError> {
        let bad = |what: &str| Err(ExplainError::Params(what.to_string()));
        if self.k == 0 || self.k > self.q {
            return bad("need 1 <= k <= q");
        }
        if self.s == 0 {
            return bad("need s >= 1");
        }
        if self.m == 0 || self.c == 0 {
            return bad("need m >= 1 and c >= 1");
        }
        if self.cf_period == 0 {
            return bad("need cf_period >= 1");
        }
        if self.max_iterations == 0 {
            return bad("need max_iterations >= 1");
        }
        self.cf.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRule {
    pub rule: Rule,
    pub level: ConsistencyLevel,
    pub score: f64,
    /// The oracle found no counterfactual satisfying the rule.
    pub cf_verified: bool,
}

/// Wall-clock time per search phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub generate: Duration,
    pub select: Duration,
    pub cf_rules: Duration,
    pub verify: Duration,
    pub reduce: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplainStats {
    pub iterations: usize,
    pub classifier_calls: u64,
    pub cf_calls: u64,
    /// Distinct rules whose consistency level was computed.
    pub rules_scored: usize,
    pub hit_iteration_cap: bool,
    /// Iterations at which oracle-driven candidate generation ran.
    pub cf_rules_iterations: Vec<usize>,
    /// Cardinalities of the candidates the greedy search expanded, in order.
    pub expanded_cardinalities: Vec<usize>,
    pub wall_time: Duration,
    pub phases: PhaseTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationResult {
    /// Best first.
    pub rules: Vec<ScoredRule>,
    pub stats: ExplainStats,
}

impl ExplanationResult {
    pub fn top(&self) -> Option<&ScoredRule> {
        self.rules.first()
    }
}

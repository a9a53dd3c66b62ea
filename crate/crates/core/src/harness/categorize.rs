use std::fmt;

use serde::{Deserialize, Serialize};

use super::minimal::{minimal_rule_search, MinimalSearch, DEFAULT_MINIMAL_CAP};
use super::HarnessError;
use crate::cf::GeneticCf;
use crate::classifier::Classifier;
use crate::consistency::{ConsistencyChecker, Level};
use crate::duality::{CfCache, CfContext};
use crate::explain::SearchParams;
use crate::schema::{Dataset, Instance, Rule};

/// Outcome against a known ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticCategory {
    ConsistentMinimal,
    ConsistentRedundant,
    Inconsistent,
}

impl SyntheticCategory {
    pub const ALL: [SyntheticCategory; 3] = [
        SyntheticCategory::ConsistentMinimal,
        SyntheticCategory::ConsistentRedundant,
        SyntheticCategory::Inconsistent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticCategory::ConsistentMinimal => "consistent_minimal",
            SyntheticCategory::ConsistentRedundant => "consistent_redundant",
            SyntheticCategory::Inconsistent => "inconsistent",
        }
    }
}

impl fmt::Display for SyntheticCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `truth` must be in relevant form for the same anchor as `returned`.
pub fn categorize_synthetic(returned: &Rule, truth: &Rule) -> SyntheticCategory {
    if returned == truth {
        SyntheticCategory::ConsistentMinimal
    } else if truth.is_subset_of(returned) {
        SyntheticCategory::ConsistentRedundant
    } else {
        SyntheticCategory::Inconsistent
    }
}

/// Outcome when no ground truth is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealCategory {
    Fdc,
    Fgc,
    GcRedundant,
    GcNonMinimal,
    GcMinimal,
}

impl fmt::Display for RealCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RealCategory::Fdc => "FDC",
            RealCategory::Fgc => "FGC",
            RealCategory::GcRedundant => "GC-redundant",
            RealCategory::GcNonMinimal => "GC-non-minimal",
            RealCategory::GcMinimal => "GC-minimal",
        })
    }
}

/// Five-way category. A rule that passes sampling but has a counterfactual
/// counts as FGC.
pub fn categorize_real(
    returned: &Rule,
    x: &Instance,
    model: &Classifier,
    data: &Dataset,
    params: &SearchParams,
) -> Result<RealCategory, HarnessError> {
    let level = ConsistencyChecker::new(data, model).level(returned, params.s, params.seed)?;
    if level.level == Level::Fdc {
        return Ok(RealCategory::Fdc);
    }
    let oracle = GeneticCf::new();
    let cache = CfCache::new();
    let ctx = CfContext {
        model,
        data,
        anchor: x,
        oracle: &oracle,
        cache: &cache,
        settings: params.cf,
        covers: params.covers,
        seed: params.seed,
    };
    if level.level == Level::Fgc || !ctx.is_consistent(returned)? {
        return Ok(RealCategory::Fgc);
    }
    for c in returned.components() {
        if ctx.is_consistent(&returned.without(c))? {
            return Ok(RealCategory::GcRedundant);
        }
    }
    if returned.is_empty() {
        return Ok(RealCategory::GcMinimal);
    }
    let below = returned.cardinality() - 1;
    match minimal_rule_search(x, model, data, below.min(DEFAULT_MINIMAL_CAP))? {
        MinimalSearch::Found { .. } => Ok(RealCategory::GcNonMinimal),
        MinimalSearch::CapReached { cap } if cap >= below => Ok(RealCategory::GcMinimal),
        MinimalSearch::CapReached { cap } => Err(HarnessError::CapReached { cap }),
    }
}

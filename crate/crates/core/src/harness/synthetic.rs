use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::classifier::{Classifier, RuleClassifierModel};
use crate::duality::splitmix;
use crate::schema::{Dataset, DatasetSchema, Direction, FeatureSchema, Instance, Rule, RuleComponent};

pub const DESK_FEATURES: usize = 12;
pub const DESK_ROWS: usize = 1000;

/// Integer-coded features `F0..`, with domain sizes cycling through `sizes`.
pub fn grid_schema(features: usize, sizes: &[usize]) -> Result<DatasetSchema, HarnessError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(HarnessError::Spec("domain sizes must be positive".into()));
    }
    let fs = (0..features)
        .map(|j| {
            let d = sizes[j % sizes.len()];
            FeatureSchema::new(j, format!("F{j}"), (0..d).map(|v| v as f64).collect(), None)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DatasetSchema::new(fs)?)
}

/// Twelve features with 8 to 12 values each.
pub fn desk_schema() -> DatasetSchema {
    grid_schema(DESK_FEATURES, &[8, 9, 10, 11, 12]).expect("fixed sizes are valid")
}

/// Rows drawn uniformly from the instance space.
pub fn uniform_dataset(schema: &DatasetSchema, rows: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..rows)
        .map(|_| {
            Instance::new(
                schema
                    .features()
                    .iter()
                    .map(|f| f.domain()[rng.gen_range(0..f.domain().len())])
                    .collect(),
            )
        })
        .collect();
    Dataset::new(schema.clone(), instances).expect("values come from the domains")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub schema: DatasetSchema,
    /// Ground-truth cardinality.
    pub components: usize,
    pub trials: usize,
    pub seed: u64,
    /// Size of the historical dataset shared by all trials.
    pub rows: usize,
}

impl SyntheticSpec {
    pub fn new(schema: DatasetSchema, components: usize, trials: usize, seed: u64) -> Result<Self, HarnessError> {
        let spec = Self {
            schema,
            components,
            trials,
            seed,
            rows: DESK_ROWS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn desk(components: usize, trials: usize, seed: u64) -> Result<Self, HarnessError> {
        Self::new(desk_schema(), components, trials, seed)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let slots = 2 * self.schema.n();
        if self.components == 0 || self.components > slots {
            return Err(HarnessError::Spec(format!(
                "need 1 <= components <= {slots}, got {}",
                self.components
            )));
        }
        if self.trials == 0 {
            return Err(HarnessError::Spec("need trials >= 1".into()));
        }
        if let Some(f) = self.schema.features().iter().find(|f| f.domain().len() < 3) {
            return Err(HarnessError::Spec(format!(
                "feature {} has fewer than 3 values, so no bound can be interior",
                f.name
            )));
        }
        Ok(())
    }

    pub fn dataset(&self) -> Dataset {
        uniform_dataset(&self.schema, self.rows, splitmix(self.seed ^ 0xda7a))
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        splitmix(splitmix(self.seed) ^ (self.components as u64) << 32 ^ trial as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTrial {
    pub model: RuleClassifierModel,
    pub anchor: Instance,
}

impl SyntheticTrial {
    pub fn truth(&self) -> &Rule {
        &self.model.ground_truth
    }

    pub fn classifier(&self) -> Classifier {
        Classifier::from_rule(self.model.ground_truth.clone())
    }

    /// The ground truth re-anchored at the trial's anchor.
    pub fn relevant_truth(&self) -> Rule {
        relevant_form(self.truth(), &self.anchor)
    }
}

/// Random ground-truth rule over distinct slots with interior bounds, plus an
/// anchor drawn uniformly from the region it accepts.
pub fn gen_synthetic_classifier(spec: &SyntheticSpec, trial: usize) -> Result<SyntheticTrial, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.trial_seed(trial));
    let schema = &spec.schema;
    let mut slots: Vec<usize> = sample(&mut rng, 2 * schema.n(), spec.components).into_vec();
    slots.sort_unstable();

    let mut comps = Vec::with_capacity(slots.len());
    // Index ranges of the accepted region per feature.
    let mut lo: Vec<usize> = vec![0; schema.n()];
    let mut hi: Vec<usize> = schema.features().iter().map(|f| f.domain().len() - 1).collect();
    for j in 0..schema.n() {
        let leq = slots.binary_search(&(2 * j)).is_ok();
        let geq = slots.binary_search(&(2 * j + 1)).is_ok();
        let dom = schema.feature(j).domain();
        let interior = 1..=dom.len() - 2;
        let (mut a, mut b) = (rng.gen_range(interior.clone()), rng.gen_range(interior));
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        if geq {
            lo[j] = a;
            comps.push(RuleComponent::new(j, Direction::Geq, dom[a]));
        }
        if leq {
            let upper = if geq { b } else { a };
            hi[j] = upper;
            comps.push(RuleComponent::new(j, Direction::Leq, dom[upper]));
        }
    }
    let truth = Rule::from_components(comps)?;
    let anchor = Instance::new(
        (0..schema.n())
            .map(|j| schema.feature(j).domain()[rng.gen_range(lo[j]..=hi[j])])
            .collect(),
    );
    debug_assert!(truth.eval(anchor.values()));
    Ok(SyntheticTrial {
        model: RuleClassifierModel::new(truth),
        anchor,
    })
}

/// Same slots as `truth`, bounds moved to the anchor's values. When the anchor
/// satisfies `truth` this is its unique smallest consistent relevant rule.
pub fn relevant_form(truth: &Rule, anchor: &Instance) -> Rule {
    Rule::anchored(anchor, truth.components().iter().map(|c| c.anchored_at(anchor)))
        .expect("slots are distinct and bounds come from the anchor")
}

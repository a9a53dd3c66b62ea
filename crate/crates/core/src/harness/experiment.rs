use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::categorize::{categorize_synthetic, SyntheticCategory};
use super::synthetic::{gen_synthetic_classifier, SyntheticSpec};
use super::HarnessError;
use crate::classifier::Classifier;
use crate::duality::splitmix;
use crate::explain::{genetic_rule, genetic_rule_cf, greedy_rule_cf, ExplainError, ExplanationResult, SearchParams};
use crate::schema::{Dataset, Instance, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "gen")]
    Gen,
    #[serde(rename = "gen-cf")]
    GenCf,
    #[serde(rename = "greedy-cf")]
    GreedyCf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Gen, Algorithm::GenCf, Algorithm::GreedyCf];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gen => "gen",
            Algorithm::GenCf => "gen-cf",
            Algorithm::GreedyCf => "greedy-cf",
        }
    }

    pub fn run(
        self,
        x: &Instance,
        model: &Classifier,
        data: &Dataset,
        params: &SearchParams,
    ) -> Result<ExplanationResult, ExplainError> {
        match self {
            Algorithm::Gen => genetic_rule(x, model, data, params),
            Algorithm::GenCf => genetic_rule_cf(x, model, data, params),
            Algorithm::GreedyCf => greedy_rule_cf(x, model, data, params),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?} (expected gen, gen-cf or greedy-cf)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub truth: Rule,
    pub anchor: Instance,
    /// Top rule, if the run succeeded.
    pub returned: Option<Rule>,
    pub category: Option<SyntheticCategory>,
    pub error: Option<String>,
    pub iterations: usize,
    pub hit_iteration_cap: bool,
    pub classifier_calls: u64,
    pub cf_calls: u64,
    /// Omitted from deterministic reports.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryBreakdown {
    pub consistent_minimal: f64,
    pub consistent_redundant: f64,
    pub inconsistent: f64,
    /// Trials whose run returned an error.
    pub failed: f64,
}

impl CategoryBreakdown {
    pub fn total(&self) -> f64 {
        self.consistent_minimal + self.consistent_redundant + self.inconsistent + self.failed
    }

    pub fn get(&self, c: SyntheticCategory) -> f64 {
        match c {
            SyntheticCategory::ConsistentMinimal => self.consistent_minimal,
            SyntheticCategory::ConsistentRedundant => self.consistent_redundant,
            SyntheticCategory::Inconsistent => self.inconsistent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeSummary {
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub max_ms: f64,
}

impl RuntimeSummary {
    fn from_samples(mut ms: Vec<f64>) -> Option<Self> {
        if ms.is_empty() {
            return None;
        }
        ms.sort_by(f64::total_cmp);
        let pick = |p: f64| ms[((ms.len() - 1) as f64 * p).round() as usize];
        Some(Self {
            mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            p50_ms: pick(0.5),
            p90_ms: pick(0.9),
            max_ms: ms[ms.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub algorithm: Algorithm,
    pub counts: CategoryBreakdown,
    /// Percentages of trials; they add up to 100.
    pub percentages: CategoryBreakdown,
    pub classifier_calls: u64,
    pub cf_calls: u64,
    pub hit_iteration_cap: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime: Option<RuntimeSummary>,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub components: usize,
    pub trials: usize,
    pub features: usize,
    pub seed: u64,
    pub algorithms: Vec<AlgorithmReport>,
}

impl ExperimentReport {
    pub fn algorithm(&self, a: Algorithm) -> Option<&AlgorithmReport> {
        self.algorithms.iter().find(|r| r.algorithm == a)
    }

    /// Removes wall-clock data so reruns compare byte for byte.
    pub fn strip_timings(&mut self) {
        for a in &mut self.algorithms {
            a.runtime = None;
            for t in &mut a.trials {
                t.runtime_ms = None;
            }
        }
    }
}

fn run_trial(
    spec: &SyntheticSpec,
    data: &Dataset,
    trial: usize,
    algorithms: &[Algorithm],
    params: &SearchParams,
) -> Result<Vec<TrialRecord>, HarnessError> {
    let t = gen_synthetic_classifier(spec, trial)?;
    let truth = t.relevant_truth();
    let run_params = SearchParams {
        seed: splitmix(params.seed ^ spec.trial_seed(trial)),
        ..*params
    };
    Ok(algorithms
        .iter()
        .map(|&a| {
            let model = t.classifier();
            let clock = Instant::now();
            let outcome = a.run(&t.anchor, &model, data, &run_params);
            let elapsed = clock.elapsed();
            let mut rec = TrialRecord {
                trial,
                truth: t.truth().clone(),
                anchor: t.anchor.clone(),
                returned: None,
                category: None,
                error: None,
                iterations: 0,
                hit_iteration_cap: false,
                classifier_calls: model.calls(),
                cf_calls: 0,
                runtime_ms: Some(ms(elapsed)),
            };
            match outcome {
                Ok(res) => {
                    debug_assert_eq!(res.stats.classifier_calls, model.calls());
                    rec.returned = res.top().map(|r| r.rule.clone());
                    rec.category = rec.returned.as_ref().map(|r| categorize_synthetic(r, &truth));
                    rec.iterations = res.stats.iterations;
                    rec.hit_iteration_cap = res.stats.hit_iteration_cap;
                    rec.cf_calls = res.stats.cf_calls;
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect())
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Generates `spec.trials` classifiers, explains each anchor with every
/// algorithm, and tallies categories against the ground truth.
pub fn run_synthetic_experiment(
    spec: &SyntheticSpec,
    algorithms: &[Algorithm],
    params: &SearchParams,
) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    params.validate()?;
    let data = spec.dataset();
    let per_trial: Vec<Result<Vec<TrialRecord>, HarnessError>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| run_trial(spec, &data, trial, algorithms, params))
        .collect();
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>, _>>()?;

    let reports = algorithms
        .iter()
        .enumerate()
        .map(|(i, &algorithm)| {
            let trials: Vec<TrialRecord> = per_trial.iter().map(|recs| recs[i].clone()).collect();
            let mut counts = CategoryBreakdown::default();
            for t in &trials {
                match t.category {
                    Some(SyntheticCategory::ConsistentMinimal) => counts.consistent_minimal += 1.0,
                    Some(SyntheticCategory::ConsistentRedundant) => counts.consistent_redundant += 1.0,
                    Some(SyntheticCategory::Inconsistent) => counts.inconsistent += 1.0,
                    None => counts.failed += 1.0,
                }
            }
            let n = trials.len() as f64;
            let pct = |v: f64| 100.0 * v / n;
            AlgorithmReport {
                algorithm,
                counts,
                percentages: CategoryBreakdown {
                    consistent_minimal: pct(counts.consistent_minimal),
                    consistent_redundant: pct(counts.consistent_redundant),
                    inconsistent: pct(counts.inconsistent),
                    failed: pct(counts.failed),
                },
                classifier_calls: trials.iter().map(|t| t.classifier_calls).sum(),
                cf_calls: trials.iter().map(|t| t.cf_calls).sum(),
                hit_iteration_cap: trials.iter().filter(|t| t.hit_iteration_cap).count(),
                runtime: RuntimeSummary::from_samples(trials.iter().filter_map(|t| t.runtime_ms).collect()),
                trials,
            }
        })
        .collect();

    Ok(ExperimentReport {
        components: spec.components,
        trials: spec.trials,
        features: spec.schema.n(),
        seed: spec.seed,
        algorithms: reports,
    })
}

//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line with
//! the measured numbers, then asserts.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use cfrule::cf::{find_counterfactuals, CfError, CfQuery, CfResult, Counterfactual, CounterfactualOracle};
use cfrule::classifier::{is_bad, is_good, write_model, Classifier};
use cfrule::consistency::{find_good_instance, ConsistencyLevel, Level};
use cfrule::duality::{cf_rules, dual_of, minimal_hitting_sets, minimal_set_covers, CfCache, CfContext, CoverLimits, DualFamily};
use cfrule::explain::{fitness, greedy_rule_cf, rank_order, ScoredRule, SearchParams};
use cfrule::harness::{
    gen_synthetic_classifier, minimal_rule_search, run_synthetic_experiment, uniform_dataset, write_csv, Algorithm,
    ExperimentReport, SyntheticCategory, SyntheticSpec,
};
use cfrule::schema::{Dataset, DatasetSchema, FeatureSchema, Instance, Rule, RuleComponent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIALS: usize = 100;
const MASTER_SEED: u64 = 20_240_601;
const CF_MIN_MINIMAL_PCT: f64 = 98.0;
const RUNTIME_BUDGET: Duration = Duration::from_secs(15 * 60);
const GEN_MAX_INCONSISTENT_PCT: f64 = 25.0;
const DUALITY_TRIPLES: usize = 1000;
const GREEDY_TRIALS: usize = 50;
const CF_QUERIES: usize = 500;
const FITNESS_TUPLES: usize = 10_000;
const BRUTE_CAP: u64 = 1_000_000;

/// Written straight to stdout so the line shows even when the harness
/// captures output of passing tests.
fn verdict(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n}: {} - {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

struct CfRuns {
    reports: Vec<ExperimentReport>,
    elapsed: Duration,
}

/// GeneticRuleCF and GreedyRuleCF over 100 trials at each cardinality.
fn cf_runs() -> &'static CfRuns {
    static RUNS: OnceLock<CfRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let clock = Instant::now();
        let reports = [2, 4, 6, 8]
            .into_iter()
            .map(|c| {
                let spec = SyntheticSpec::desk(c, TRIALS, MASTER_SEED).unwrap();
                run_synthetic_experiment(&spec, &[Algorithm::GenCf, Algorithm::GreedyCf], &SearchParams::default()).unwrap()
            })
            .collect();
        CfRuns {
            reports,
            elapsed: clock.elapsed(),
        }
    })
}

fn gen_runs() -> &'static Vec<ExperimentReport> {
    static RUNS: OnceLock<Vec<ExperimentReport>> = OnceLock::new();
    RUNS.get_or_init(|| {
        [2, 4, 8]
            .into_iter()
            .map(|c| {
                let spec = SyntheticSpec::desk(c, TRIALS, MASTER_SEED).unwrap();
                run_synthetic_experiment(&spec, &[Algorithm::Gen], &SearchParams::default()).unwrap()
            })
            .collect()
    })
}

/// Exact global consistency for a rule classifier: the rule's box must lie
/// inside the ground truth's box on every feature.
fn exactly_consistent(rule: &Rule, truth: &Rule, schema: &DatasetSchema) -> bool {
    let inner = rule.to_plaf().index_ranges(schema).unwrap();
    let outer = truth.to_plaf().index_ranges(schema).unwrap();
    inner.iter().zip(&outer).all(|(i, o)| i.0 >= o.0 && i.1 <= o.1)
}

fn exact_inconsistent_pct(report: &ExperimentReport, algo: Algorithm, components: usize) -> f64 {
    let spec = SyntheticSpec::desk(components, TRIALS, MASTER_SEED).unwrap();
    let a = report.algorithm(algo).unwrap();
    let bad = a
        .trials
        .iter()
        .filter(|t| match &t.returned {
            Some(r) => !exactly_consistent(r, &t.truth, &spec.schema),
            None => true,
        })
        .count();
    100.0 * bad as f64 / a.trials.len() as f64
}

#[test]
fn criterion_1_synthetic_recovery() {
    let runs = cf_runs();
    let mut pass = runs.elapsed < RUNTIME_BUDGET;
    let mut parts = Vec::new();
    for r in &runs.reports {
        for algo in [Algorithm::GenCf, Algorithm::GreedyCf] {
            let pct = r.algorithm(algo).unwrap().percentages.consistent_minimal;
            pass &= pct >= CF_MIN_MINIMAL_PCT;
            parts.push(format!("{algo}@{} {pct:.0}%", r.components));
        }
    }
    let detail = format!("{}; {:.0}s total (budget {}s)", parts.join(", "), runs.elapsed.as_secs_f64(), RUNTIME_BUDGET.as_secs());
    verdict(1, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_2_genetic_degradation() {
    let gen = gen_runs();
    let cf = cf_runs();
    let pct = |r: &ExperimentReport, c: SyntheticCategory| r.algorithm(Algorithm::Gen).unwrap().percentages.get(c);
    let min2 = pct(&gen[0], SyntheticCategory::ConsistentMinimal);
    let min4 = pct(&gen[1], SyntheticCategory::ConsistentMinimal);
    let gen_incons8 = exact_inconsistent_pct(&gen[2], Algorithm::Gen, 8);
    let labelled8 = pct(&gen[2], SyntheticCategory::Inconsistent);
    let cf8 = cf.reports.iter().find(|r| r.components == 8).unwrap();
    let gencf_incons8 = exact_inconsistent_pct(cf8, Algorithm::GenCf, 8);
    let pass = min2 == 100.0
        && min4 == 100.0
        && gen_incons8 > 0.0
        && gen_incons8 <= GEN_MAX_INCONSISTENT_PCT
        && gen_incons8 > gencf_incons8
        && gencf_incons8 == 0.0
        && labelled8 == gen_incons8;
    let r4 = gen[1].algorithm(Algorithm::Gen).unwrap();
    let detail = format!(
        "gen minimal@2 {min2:.0}%, minimal@4 {min4:.0}% (redundant {:.0}%, inconsistent {:.0}%), inconsistent@8 {gen_incons8:.0}% vs gen-cf {gencf_incons8:.0}%",
        r4.percentages.consistent_redundant, r4.percentages.inconsistent
    );
    verdict(2, pass, &detail);
    assert!(pass, "{detail}");
}

fn loan_schema() -> DatasetSchema {
    let f = |i, name: &str, dom: Vec<f64>| FeatureSchema::new(i, name, dom, None).unwrap();
    DatasetSchema::new(vec![
        f(0, "Age", (2..=8).map(|v| f64::from(v) * 10.0).collect()),
        f(1, "AccNum", (0..=8).map(f64::from).collect()),
        f(2, "Income", (1..=10).map(|v| f64::from(v) * 100.0).collect()),
        f(3, "Debt", vec![0.0, 2_000.0, 5_000.0, 10_000.0, 15_000.0]),
    ])
    .unwrap()
}

/// Returns the two fixed counterfactuals whatever the query.
struct Injected(Vec<Instance>);

impl CounterfactualOracle for Injected {
    fn find(&self, model: &Classifier, _data: &Dataset, query: &CfQuery) -> Result<CfResult, CfError> {
        Ok(CfResult::Found(
            self.0
                .iter()
                .map(|x| Counterfactual {
                    instance: x.clone(),
                    changed: query.anchor.diff(x),
                    distance: 0.0,
                    score: model.score(x.values()),
                })
                .collect(),
        ))
    }
}

#[test]
fn criterion_3_worked_example() {
    let schema = loan_schema();
    let x = Instance::new(vec![50.0, 4.0, 500.0, 10_000.0]);
    let cf1 = Instance::new(vec![50.0, 5.0, 900.0, 10_000.0]);
    let cf2 = Instance::new(vec![50.0, 4.0, 600.0, 2_000.0]);
    let (age, acc, inc, debt) = (0, 1, 2, 3);
    let d1 = dual_of(&x, &cf1);
    let d2 = dual_of(&x, &cf2);
    let want1 = [RuleComponent::leq(acc, 4.0), RuleComponent::leq(inc, 500.0)];
    let want2 = [RuleComponent::leq(inc, 500.0), RuleComponent::geq(debt, 10_000.0)];
    let mut pass = d1.components() == want1 && d2.components() == want2;

    let family = DualFamily::new(vec![d1, d2]);
    let covers = minimal_set_covers(&family, CoverLimits::default());
    let want_covers = vec![
        vec![RuleComponent::leq(inc, 500.0)],
        vec![RuleComponent::leq(acc, 4.0), RuleComponent::geq(debt, 10_000.0)],
    ];
    pass &= covers == want_covers;

    let model = Classifier::from_fn(4, |v| if v[2] >= 600.0 { 1.0 } else { 0.0 });
    let data = Dataset::new(schema, vec![x.clone()]).unwrap();
    let oracle = Injected(vec![cf1, cf2]);
    let cache = CfCache::new();
    let ctx = CfContext {
        model: &model,
        data: &data,
        anchor: &x,
        oracle: &oracle,
        cache: &cache,
        settings: Default::default(),
        covers: CoverLimits::default(),
        seed: 0,
    };
    let r = Rule::anchored(&x, [RuleComponent::leq(age, 50.0), RuleComponent::geq(acc, 4.0)]).unwrap();
    let out = cf_rules(&ctx, &[r.clone()]).unwrap();
    let r1 = r.with(RuleComponent::leq(inc, 500.0));
    let r2 = r.with(RuleComponent::leq(acc, 4.0)).with(RuleComponent::geq(debt, 10_000.0));
    let got: BTreeSet<Rule> = out.candidates.iter().cloned().collect();
    pass &= got == BTreeSet::from([r1.clone(), r2.clone()]) && r1.cardinality() == 3 && r2.cardinality() == 4;

    let detail = format!(
        "duals {} and {}, covers {:?}, R1 = {} (|R1| = {}), R2 = {} (|R2| = {})",
        family.clauses[0],
        family.clauses[1],
        covers.iter().map(|c| Rule::from_components(c.clone()).unwrap().describe(data.schema())).collect::<Vec<_>>(),
        r1.describe(data.schema()),
        r1.cardinality(),
        r2.describe(data.schema()),
        r2.cardinality()
    );
    verdict(3, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_4_duality_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 4);
    let (mut triples, mut consistent, mut excluded_bad, mut cover_bad, mut checked) = (0, 0, 0, 0, 0u64);
    while triples < DUALITY_TRIPLES {
        let schema = common::small_schema(&mut rng);
        let model = common::random_model(&schema, &mut rng);
        let Some(x) = common::random_bad(&schema, &model, &mut rng) else { continue };
        // Half the rules start from the trivial rule so plenty are consistent.
        let rule = if rng.gen_bool(0.5) {
            common::random_relevant_rule(&x, &mut rng)
        } else {
            let t = Rule::trivial(&x);
            t.components().iter().filter(|_| rng.gen_bool(0.7)).fold(t.clone(), |r, c| r.without(c))
        };
        triples += 1;
        let is_consistent = find_good_instance(&rule.to_plaf(), &model, &schema, BRUTE_CAP).unwrap().is_none();
        if !is_consistent {
            continue;
        }
        consistent += 1;
        for v in common::all_instances(&schema) {
            if !is_good(model.score(&v)) {
                continue;
            }
            checked += 1;
            let cf = Instance::new(v);
            if rule.eval(cf.values()) {
                excluded_bad += 1;
            }
            if !dual_of(&x, &cf).is_hit_by(&rule) {
                cover_bad += 1;
            }
        }
    }
    let pass = excluded_bad == 0 && cover_bad == 0 && consistent > 0;
    let detail = format!(
        "{triples} triples, {consistent} consistent rules, {checked} counterfactuals checked; exclusion violations {excluded_bad}, cover violations {cover_bad}"
    );
    verdict(4, pass, &detail);
    assert!(pass, "{detail}");
}

/// Inclusion-minimal hitting sets by scanning every subset of the universe.
fn hitting_oracle(clauses: &[Vec<u8>], universe: u8) -> Vec<Vec<u8>> {
    let masks: Vec<u32> = clauses.iter().map(|c| c.iter().fold(0, |m, &e| m | 1 << e)).collect();
    let hits = |s: u32| masks.iter().all(|&c| c & s != 0);
    let mut out: Vec<Vec<u8>> = (0u32..1 << universe)
        .filter(|&s| hits(s) && (0..universe).all(|e| s & 1 << e == 0 || !hits(s & !(1 << e))))
        .map(|s| (0..universe).filter(|&e| s & 1 << e != 0).collect())
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn clause_of(mask: u32, universe: u8) -> Vec<u8> {
    (0..universe).filter(|&e| mask & 1 << e != 0).collect()
}

/// Every family of `size` distinct non-empty clauses over `universe` elements.
fn sweep(universe: u8, max_clauses: usize, mismatches: &mut u64, families: &mut u64) {
    let all: Vec<u32> = (1u32..1 << universe).collect();
    let mut pick: Vec<usize> = Vec::new();
    fn rec(all: &[u32], u: u8, max: usize, start: usize, pick: &mut Vec<usize>, bad: &mut u64, n: &mut u64) {
        let clauses: Vec<Vec<u8>> = pick.iter().map(|&i| clause_of(all[i], u)).collect();
        *n += 1;
        if minimal_hitting_sets(&clauses, CoverLimits::unbounded()) != hitting_oracle(&clauses, u) {
            *bad += 1;
        }
        if pick.len() == max {
            return;
        }
        for i in start..all.len() {
            pick.push(i);
            rec(all, u, max, i + 1, pick, bad, n);
            pick.pop();
        }
    }
    rec(&all, universe, max_clauses, 0, &mut pick, mismatches, families);
}

#[test]
fn criterion_5_hitting_set_oracle() {
    let (mut bad, mut n) = (0u64, 0u64);
    for u in 1..=5 {
        sweep(u, 6, &mut bad, &mut n);
    }
    let exhaustive_small = n;
    sweep(6, 3, &mut bad, &mut n);
    sweep(8, 2, &mut bad, &mut n);
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 5);
    let random = 100_000;
    for _ in 0..random {
        let k = rng.gen_range(1..=6);
        let clauses: Vec<Vec<u8>> = (0..k).map(|_| clause_of(rng.gen_range(1u32..256), 8)).collect();
        n += 1;
        if minimal_hitting_sets(&clauses, CoverLimits::unbounded()) != hitting_oracle(&clauses, 8) {
            bad += 1;
        }
    }
    let pass = bad == 0;
    let detail = format!(
        "{n} families ({exhaustive_small} exhaustive with <= 6 clauses over <= 5 components, all <= 3 over 6, all <= 2 over 8, {random} random <= 6 over 8); mismatches {bad}"
    );
    verdict(5, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_6_greedy_minimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 6);
    let (mut trials, mut equal, mut irredundant, mut consistent) = (0, 0, 0, 0);
    let mut notes = Vec::new();
    while trials < GREEDY_TRIALS {
        let schema = common::small_schema(&mut rng);
        let truth = common::random_truth(&schema, &mut rng);
        let model = Classifier::from_rule(truth);
        let Some(x) = common::random_bad(&schema, &model, &mut rng) else { continue };
        let data = uniform_dataset(&schema, 200, rng.gen());
        trials += 1;
        let params = SearchParams { seed: rng.gen(), ..SearchParams::default() };
        let out = greedy_rule_cf(&x, &model, &data, &params).unwrap();
        let rule = out.rules[0].rule.clone();
        let min = minimal_rule_search(&x, &model, &data, 2 * schema.n()).unwrap().cardinality().unwrap();
        let holds = |r: &Rule| find_good_instance(&r.to_plaf(), &model, &schema, BRUTE_CAP).unwrap().is_none();
        if holds(&rule) {
            consistent += 1;
        }
        if rule.cardinality() == min {
            equal += 1;
        } else {
            notes.push(format!("trial {trials}: greedy {} vs minimum {min}", rule.cardinality()));
        }
        if rule.components().iter().all(|c| !holds(&rule.without(c))) {
            irredundant += 1;
        }
    }
    let pass = equal == trials && irredundant == trials && consistent == trials;
    let detail = format!(
        "{trials} trials: minimum cardinality {equal}/{trials}, zero removals {irredundant}/{trials}, brute-force consistent {consistent}/{trials}{}",
        if notes.is_empty() { String::new() } else { format!(" ({})", notes.join("; ")) }
    );
    verdict(6, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_7_cf_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 7);
    let (mut queries, mut found, mut plaf_bad, mut revert_bad, mut agree, mut good_bad) = (0, 0, 0, 0, 0, 0);
    while queries < CF_QUERIES {
        let schema = common::small_schema(&mut rng);
        let model = common::random_model(&schema, &mut rng);
        let Some(x) = common::random_bad(&schema, &model, &mut rng) else { continue };
        let rule = common::random_relevant_rule(&x, &mut rng);
        let data = uniform_dataset(&schema, 100, rng.gen());
        let plaf = rule.to_plaf();
        queries += 1;
        let res = find_counterfactuals(&model, &data, &CfQuery::new(x.clone(), plaf.clone(), rng.gen())).unwrap();
        let exists = find_good_instance(&plaf, &model, &schema, BRUTE_CAP).unwrap().is_some();
        if res.is_found() == exists {
            agree += 1;
        }
        for cf in res.counterfactuals() {
            found += 1;
            if !plaf.allows(cf.instance.values()) {
                plaf_bad += 1;
            }
            if !is_good(model.score(cf.instance.values())) {
                good_bad += 1;
            }
            let redundant = cf.instance.diff(&x).into_iter().any(|j| {
                let mut v = cf.instance.values().to_vec();
                v[j] = x.get(j);
                is_good(model.score(&v))
            });
            if redundant {
                revert_bad += 1;
            }
        }
    }
    let pass = plaf_bad == 0 && revert_bad == 0 && good_bad == 0 && agree == queries;
    let detail = format!(
        "{queries} queries, {found} counterfactuals: PLAF violations {plaf_bad}, not good {good_bad}, redundant changes {revert_bad}; Found/NotFound agrees with brute force {agree}/{queries}"
    );
    verdict(7, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_8_fitness_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 8);
    let (n, m, s) = (6usize, 500usize, 1000usize);
    let anchor = Instance::new((0..n).map(|j| j as f64).collect());
    let comps = cfrule::schema::relevant_components(&anchor);
    let mut rules: Vec<ScoredRule> = (0..FITNESS_TUPLES)
        .map(|_| {
            let card = rng.gen_range(0..=2 * n);
            let mut idx: Vec<usize> = rand::seq::index::sample(&mut rng, 2 * n, card).into_vec();
            idx.sort_unstable();
            let rule = Rule::anchored(&anchor, idx.iter().map(|&i| comps[i])).unwrap();
            let level = match rng.gen_range(0..3) {
                0 => ConsistencyLevel::from_counts(rng.gen_range(1..=m), 0),
                1 => ConsistencyLevel::from_counts(0, rng.gen_range(1..=s)),
                _ => ConsistencyLevel::from_counts(0, 0),
            };
            ScoredRule { score: fitness(card, n, level, m, s), rule, level, cf_verified: false }
        })
        .collect();
    rules.sort_by(rank_order);
    let level_inversions = rules.windows(2).filter(|w| w[0].level.level < w[1].level.level).count();
    let gc: Vec<&ScoredRule> = rules.iter().filter(|r| r.level.level == Level::Gc).collect();
    let gc_inversions = gc
        .windows(2)
        .filter(|w| {
            let (a, b) = (&w[0].rule, &w[1].rule);
            (a.cardinality(), a) >= (b.cardinality(), b) && a != b
        })
        .count();
    let score_inversions = rules
        .windows(2)
        .filter(|w| w[0].level.level == w[1].level.level && w[0].score < w[1].score)
        .count();
    let pass = level_inversions == 0 && gc_inversions == 0 && score_inversions == 0;
    let detail = format!(
        "{FITNESS_TUPLES} tuples ({} GC): level inversions {level_inversions}, within-level score inversions {score_inversions}, GC order inversions {gc_inversions}",
        gc.len()
    );
    verdict(8, pass, &detail);
    assert!(pass, "{detail}");
}

fn run_cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_rulecf")).args(args).output().unwrap();
    assert!(out.status.success(), "rulecf {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn criterion_9_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let spec = SyntheticSpec::desk(4, 1, MASTER_SEED).unwrap();
    let trial = gen_synthetic_classifier(&spec, 0).unwrap();
    let mut data = spec.dataset();
    let mut rows = data.instances().to_vec();
    rows.truncate(300);
    rows.insert(0, trial.anchor.clone());
    data = Dataset::new(spec.schema.clone(), rows).unwrap();
    write_csv(&data, std::fs::File::create(p("data.csv")).unwrap()).unwrap();
    std::fs::write(p("model.txt"), write_model(trial.classifier().kind()).unwrap()).unwrap();
    std::fs::write(p("rule.txt"), trial.relevant_truth().to_rule_file(&spec.schema)).unwrap();
    assert!(is_bad(trial.classifier().score(trial.anchor.values())));

    let mut checks = Vec::new();
    for algo in ["gen", "gen-cf", "greedy-cf"] {
        for fmt in ["json", "text"] {
            let outs: Vec<Vec<u8>> = ["a", "b"]
                .iter()
                .map(|tag| {
                    let path = p(&format!("explain-{algo}-{fmt}-{tag}"));
                    run_cli(&[
                        "explain", "--data", &p("data.csv"), "--model", &p("model.txt"), "--instance", "0", "--algo", algo,
                        "--format", fmt, "--seed", "7", "--s", "300", "--out", &path,
                    ]);
                    std::fs::read(path).unwrap()
                })
                .collect();
            checks.push((format!("explain {algo} {fmt}"), outs[0] == outs[1] && !outs[0].is_empty()));
        }
    }
    let synth: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|tag| {
            let path = p(&format!("synthetic-{tag}.json"));
            run_cli(&[
                "synthetic", "--features", "6", "--components", "2,3", "--trials", "3", "--seed", "5", "--s", "200", "--out", &path,
            ]);
            std::fs::read(path).unwrap()
        })
        .collect();
    checks.push(("synthetic".into(), synth[0] == synth[1] && !synth[0].is_empty()));
    for mode in ["data", "sample", "cf", "brute"] {
        let outs: Vec<Vec<u8>> = (0..2)
            .map(|_| {
                run_cli(&["verify", "--data", &p("data.csv"), "--model", &p("model.txt"), "--rule", &p("rule.txt"), "--mode", mode, "--seed", "3"])
                    .stdout
            })
            .collect();
        checks.push((format!("verify {mode}"), outs[0] == outs[1] && !outs[0].is_empty()));
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    let pass = failed.is_empty();
    let detail = format!("{} invocations repeated, {} differed {:?}", checks.len(), failed.len(), failed);
    verdict(9, pass, &detail);
    assert!(pass, "{detail}");
}

//! Genetic counterfactual search under bound constraints.
//!
//! Given a bad anchor and a [`PlafConstraint`], the search looks for nearby
//! instances with a good outcome. Candidates live in domain-index space:
//! every changed feature takes a value observed in the schema domain and
//! admitted by the constraint. Returned counterfactuals are reduced so that no
//! single changed feature can be reverted while keeping the good outcome.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{is_good, Classifier};
use crate::schema::{Dataset, DatasetSchema, Instance, PlafConstraint, SchemaError};

const ALPHA: f64 = 0.5;
const BETA: f64 = 0.5;

#[derive(Debug, Error)]
pub enum CfError {
    #[error("anchor already has a good outcome (score {score})")]
    AnchorNotBad { score: f64 },
    #[error("anchor does not satisfy the constraint it is queried under")]
    AnchorViolatesConstraint,
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("invalid search settings: {0}")]
    Settings(String),
    #[error("oracle broke its contract: {0}")]
    Contract(String),
}

/// Search budget for one counterfactual query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfSettings {
    /// Counterfactuals requested.
    pub k: usize,
    pub population: usize,
    pub max_generations: usize,
    /// Consecutive generations without any good candidate before giving up.
    pub patience: usize,
    /// Consecutive generations with an unchanged top-k before stopping early.
    pub convergence: usize,
}

impl Default for CfSettings {
    fn default() -> Self {
        Self {
            k: 10,
            population: 100,
            max_generations: 50,
            patience: 10,
            convergence: 3,
        }
    }
}

impl CfSettings {
    pub fn validate(&self) -> Result<(), CfError> {
        if self.k == 0 || self.population < 2 || self.max_generations == 0 || self.patience == 0 {
            return Err(CfError::Settings(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfQuery {
    pub anchor: Instance,
    pub plaf: PlafConstraint,
    pub settings: CfSettings,
    pub seed: u64,
}

impl CfQuery {
    pub fn new(anchor: Instance, plaf: PlafConstraint, seed: u64) -> Self {
        Self {
            anchor,
            plaf,
            settings: CfSettings::default(),
            seed,
        }
    }

    pub fn with_settings(mut self, settings: CfSettings) -> Self {
        self.settings = settings;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterfactual {
    pub instance: Instance,
    /// Features where the instance differs from the anchor.
    pub changed: Vec<usize>,
    pub distance: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CfResult {
    /// Non-empty, at most `k`, ascending distance.
    Found(Vec<Counterfactual>),
    NotFound,
}

impl CfResult {
    pub fn is_found(&self) -> bool {
        matches!(self, CfResult::Found(_))
    }

    pub fn counterfactuals(&self) -> &[Counterfactual] {
        match self {
            CfResult::Found(v) => v,
            CfResult::NotFound => &[],
        }
    }
}

/// Anything that can answer counterfactual queries.
pub trait CounterfactualOracle: Send + Sync {
    fn find(&self, model: &Classifier, data: &Dataset, query: &CfQuery) -> Result<CfResult, CfError>;
}

/// `0.5 * changed/n + 0.5 * sum(|delta| / range)` over changed features.
pub fn distance(x: &Instance, x_prime: &Instance, schema: &DatasetSchema) -> f64 {
    let n = schema.n();
    if n == 0 {
        return 0.0;
    }
    let mut changed = 0usize;
    let mut spread = 0.0;
    for (j, f) in schema.features().iter().enumerate() {
        let (a, b) = (x.get(j), x_prime.get(j));
        if a.to_bits() != b.to_bits() {
            changed += 1;
            let range = f.range();
            if range > 0.0 {
                spread += (a - b).abs() / range;
            }
        }
    }
    ALPHA * changed as f64 / n as f64 + BETA * spread
}

/// Reverts single changed features to the anchor value while the outcome stays good.
pub fn reduce_changes(anchor: &Instance, cand: &Instance, model: &Classifier) -> Instance {
    let mut values = cand.values().to_vec();
    'outer: loop {
        for j in 0..values.len() {
            if values[j].to_bits() == anchor.get(j).to_bits() {
                continue;
            }
            let kept = values[j];
            values[j] = anchor.get(j);
            if is_good(model.score(&values)) {
                continue 'outer;
            }
            values[j] = kept;
        }
        break;
    }
    Instance::new(values)
}

/// The built-in genetic oracle. Counts queries and generations across calls.
#[derive(Debug, Default)]
pub struct GeneticCf {
    queries: AtomicU64,
    generations: AtomicU64,
}

impl GeneticCf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn generations(&self) -> u64 {
        self.generations.load(Ordering::Relaxed)
    }
}

impl CounterfactualOracle for GeneticCf {
    fn find(&self, model: &Classifier, data: &Dataset, query: &CfQuery) -> Result<CfResult, CfError> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let mut search = Search::new(model, data.schema(), query)?;
        let result = search.run();
        self.generations.fetch_add(search.generations as u64, Ordering::Relaxed);
        Ok(result)
    }
}

pub fn find_counterfactuals(model: &Classifier, data: &Dataset, query: &CfQuery) -> Result<CfResult, CfError> {
    GeneticCf::new().find(model, data, query)
}

type Genome = Vec<u16>;

#[derive(Clone)]
struct Scored {
    genome: Genome,
    score: f64,
    distance: f64,
}

struct Search<'a> {
    model: &'a Classifier,
    schema: &'a DatasetSchema,
    settings: CfSettings,
    anchor: Genome,
    /// Admissible domain indices per feature, anchor value excluded.
    choices: Vec<Vec<u16>>,
    mutable: Vec<usize>,
    memo: HashMap<Genome, f64>,
    rng: ChaCha8Rng,
    buf: Vec<f64>,
    generations: usize,
}

impl<'a> Search<'a> {
    fn new(model: &'a Classifier, schema: &'a DatasetSchema, query: &CfQuery) -> Result<Self, CfError> {
        query.settings.validate()?;
        schema.check(query.anchor.values())?;
        if !query.plaf.allows(query.anchor.values()) {
            return Err(CfError::AnchorViolatesConstraint);
        }
        let score = model.score(query.anchor.values());
        if is_good(score) {
            return Err(CfError::AnchorNotBad { score });
        }
        let ranges = query.plaf.index_ranges(schema)?;
        let anchor: Genome = schema
            .features()
            .iter()
            .map(|f| f.position(query.anchor.get(f.index)).expect("checked above") as u16)
            .collect();
        let choices: Vec<Vec<u16>> = ranges
            .iter()
            .zip(&anchor)
            .map(|(&(lo, hi), &a)| (lo as u16..=hi as u16).filter(|&i| i != a).collect())
            .collect();
        let mutable = (0..choices.len()).filter(|&j| !choices[j].is_empty()).collect();
        Ok(Self {
            model,
            schema,
            settings: query.settings,
            anchor,
            choices,
            mutable,
            memo: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(query.seed),
            buf: Vec::with_capacity(schema.n()),
            generations: 0,
        })
    }

    fn value(&self, j: usize, i: u16) -> f64 {
        self.schema.feature(j).domain()[i as usize]
    }

    fn evaluate(&mut self, genome: &Genome) -> f64 {
        if let Some(&s) = self.memo.get(genome) {
            return s;
        }
        self.buf.clear();
        for (j, &i) in genome.iter().enumerate() {
            self.buf.push(self.schema.feature(j).domain()[i as usize]);
        }
        let s = self.model.score(&self.buf);
        self.memo.insert(genome.clone(), s);
        s
    }

    fn genome_distance(&self, genome: &Genome) -> f64 {
        let n = genome.len() as f64;
        let mut changed = 0usize;
        let mut spread = 0.0;
        for (j, (&g, &a)) in genome.iter().zip(&self.anchor).enumerate() {
            if g != a {
                changed += 1;
                let range = self.schema.feature(j).range();
                if range > 0.0 {
                    spread += (self.value(j, g) - self.value(j, a)).abs() / range;
                }
            }
        }
        ALPHA * changed as f64 / n + BETA * spread
    }

    fn changed(&self, genome: &Genome) -> Vec<usize> {
        (0..genome.len()).filter(|&j| genome[j] != self.anchor[j]).collect()
    }

    fn reduce(&mut self, genome: &Genome) -> Genome {
        let mut g = genome.clone();
        'outer: loop {
            for j in 0..g.len() {
                if g[j] == self.anchor[j] {
                    continue;
                }
                let kept = g[j];
                g[j] = self.anchor[j];
                if is_good(self.evaluate(&g)) {
                    continue 'outer;
                }
                g[j] = kept;
            }
            break g;
        }
    }

    fn single_change(&mut self) -> Genome {
        let j = self.mutable[self.rng.gen_range(0..self.mutable.len())];
        let mut g = self.anchor.clone();
        g[j] = *self.choices[j].choose(&mut self.rng).expect("mutable feature");
        g
    }

    /// Round-robin over mutable features, drawing values without replacement.
    fn initial_population(&mut self) -> Vec<Genome> {
        let mut pools: Vec<(usize, Vec<u16>)> = self
            .mutable
            .iter()
            .map(|&j| {
                let mut vals = self.choices[j].clone();
                vals.shuffle(&mut self.rng);
                (j, vals)
            })
            .collect();
        let mut pop = Vec::with_capacity(self.settings.population);
        while pop.len() < self.settings.population && pools.iter().any(|(_, v)| !v.is_empty()) {
            for (j, vals) in pools.iter_mut() {
                if pop.len() >= self.settings.population {
                    break;
                }
                if let Some(i) = vals.pop() {
                    let mut g = self.anchor.clone();
                    g[*j] = i;
                    pop.push(g);
                }
            }
        }
        pop
    }

    fn mutate(&mut self, parent: &Genome) -> Genome {
        let changed = self.changed(parent);
        let addable: Vec<usize> = self.mutable.iter().copied().filter(|&j| parent[j] == self.anchor[j]).collect();
        let mut g = parent.clone();
        let add = match (changed.is_empty(), addable.is_empty()) {
            (true, _) => true,
            (false, true) => false,
            (false, false) => self.rng.gen_bool(0.5),
        };
        if add {
            let j = *addable.choose(&mut self.rng).expect("non-empty");
            g[j] = *self.choices[j].choose(&mut self.rng).expect("mutable feature");
        } else {
            let j = *changed.choose(&mut self.rng).expect("non-empty");
            g[j] = *self.choices[j].choose(&mut self.rng).expect("changed feature is mutable");
        }
        g
    }

    fn crossover(&mut self, a: &Genome, b: &Genome) -> Genome {
        let mut g = self.anchor.clone();
        for j in 0..g.len() {
            let (ca, cb) = (a[j] != self.anchor[j], b[j] != self.anchor[j]);
            g[j] = match (ca, cb) {
                (true, true) => {
                    if self.rng.gen_bool(0.5) {
                        a[j]
                    } else {
                        b[j]
                    }
                }
                (true, false) => a[j],
                (false, true) => b[j],
                (false, false) => self.anchor[j],
            };
        }
        g
    }

    fn rank(&self, pop: &mut [Scored]) {
        pop.sort_by(|x, y| {
            let (gx, gy) = (is_good(x.score), is_good(y.score));
            gy.cmp(&gx)
                .then_with(|| {
                    if gx {
                        x.distance.total_cmp(&y.distance)
                    } else {
                        y.score.total_cmp(&x.score).then(x.distance.total_cmp(&y.distance))
                    }
                })
                .then_with(|| x.genome.cmp(&y.genome))
        });
    }

    fn next_generation(&mut self, ranked: &[Scored]) -> Vec<Genome> {
        let size = self.settings.population;
        let keep = (size / 2).max(1).min(ranked.len());
        let parents: Vec<Genome> = ranked[..keep].iter().map(|s| s.genome.clone()).collect();
        let mut seen: HashSet<Genome> = parents.iter().cloned().collect();
        let mut next = parents.clone();
        let mut attempts = 0;
        while next.len() < size && attempts < 8 * size {
            attempts += 1;
            let roll: f64 = self.rng.gen();
            let child = if roll < 0.45 {
                let p = parents[self.rng.gen_range(0..parents.len())].clone();
                self.mutate(&p)
            } else if roll < 0.85 && parents.len() > 1 {
                let a = parents[self.rng.gen_range(0..parents.len())].clone();
                let b = parents[self.rng.gen_range(0..parents.len())].clone();
                self.crossover(&a, &b)
            } else {
                self.single_change()
            };
            // Prefer unexplored candidates; fall back to revisits late.
            let fresh = !self.memo.contains_key(&child);
            if child != self.anchor && (fresh || attempts > 4 * size) && seen.insert(child.clone()) {
                next.push(child);
            }
        }
        next
    }

    fn run(&mut self) -> CfResult {
        if self.mutable.is_empty() {
            return CfResult::NotFound;
        }
        let k = self.settings.k;
        let mut found: BTreeMap<Genome, (f64, f64)> = BTreeMap::new();
        let mut pop = self.initial_population();
        let mut without_good = 0;
        let mut stable = 0;
        let mut last_top: Vec<Genome> = Vec::new();
        for _ in 0..self.settings.max_generations {
            self.generations += 1;
            let mut scored: Vec<Scored> = Vec::with_capacity(pop.len());
            for g in pop {
                let score = self.evaluate(&g);
                let distance = self.genome_distance(&g);
                scored.push(Scored { genome: g, score, distance });
            }
            for s in scored.iter().filter(|s| is_good(s.score)) {
                let reduced = self.reduce(&s.genome);
                if !found.contains_key(&reduced) {
                    let score = self.evaluate(&reduced);
                    let d = self.genome_distance(&reduced);
                    found.insert(reduced, (d, score));
                }
            }
            if found.is_empty() {
                without_good += 1;
                if without_good >= self.settings.patience {
                    return CfResult::NotFound;
                }
            } else {
                let top = top_k(&found, k);
                if top == last_top {
                    stable += 1;
                    if stable >= self.settings.convergence {
                        break;
                    }
                } else {
                    stable = 0;
                    last_top = top;
                }
            }
            self.rank(&mut scored);
            pop = self.next_generation(&scored);
        }
        if found.is_empty() {
            return CfResult::NotFound;
        }
        let list = top_k(&found, k)
            .into_iter()
            .map(|g| {
                let (distance, score) = found[&g];
                let changed = self.changed(&g);
                let values = g.iter().enumerate().map(|(j, &i)| self.value(j, i)).collect();
                Counterfactual {
                    instance: Instance::new(values),
                    changed,
                    distance,
                    score,
                }
            })
            .collect();
        CfResult::Found(list)
    }
}

fn top_k(found: &BTreeMap<Genome, (f64, f64)>, k: usize) -> Vec<Genome> {
    let mut all: Vec<(&Genome, f64)> = found.iter().map(|(g, (d, _))| (g, *d)).collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    all.into_iter().take(k).map(|(g, _)| g.clone()).collect()
}

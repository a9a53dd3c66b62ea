use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cfrule::cf::GeneticCf;
use cfrule::classifier::{is_bad, load_model, Classifier};
use cfrule::consistency::{brute_force_global_consistent, consistency_level, BruteForce, DEFAULT_BRUTE_FORCE_CAP};
use cfrule::duality::{CfCache, CfContext};
use cfrule::explain::{ExplainStats, ScoredRule, SearchParams};
use cfrule::harness::{
    grid_schema, ingest_csv, run_synthetic_experiment, Algorithm, ExperimentReport, IngestOptions, OneHotGroup,
    SyntheticSpec,
};
use cfrule::schema::{Dataset, Instance, Rule};

#[derive(Parser)]
#[command(name = "rulecf", version, about = "Consistent rule explanations for black-box tabular classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explain one dataset row.
    Explain(ExplainArgs),
    /// Recover random ground-truth rule classifiers and tally the outcomes.
    Synthetic(SyntheticArgs),
    /// Check a rule file against a model.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SearchFlags {
    #[arg(long, default_value_t = 50)]
    q: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    s: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    c: usize,
    #[arg(long, default_value_t = 3)]
    cf_period: usize,
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SearchFlags {
    fn params(&self) -> SearchParams {
        SearchParams {
            q: self.q,
            k: self.k,
            s: self.s,
            m: self.m,
            c: self.c,
            seed: self.seed,
            cf_period: self.cf_period,
            max_iterations: self.max_iterations,
            ..SearchParams::default()
        }
    }
}

#[derive(Args)]
struct DataFlags {
    /// Headed numeric CSV.
    #[arg(long)]
    data: PathBuf,
    /// Model file (rule, tree or net).
    #[arg(long)]
    model: PathBuf,
    /// Collapse one-hot columns: `name=col1,col2,...`. Repeatable.
    #[arg(long = "one-hot", value_parser = parse_group)]
    one_hot: Vec<OneHotGroup>,
}

impl DataFlags {
    fn load(&self) -> Result<(Dataset, Classifier), String> {
        let opts = IngestOptions {
            groups: self.one_hot.clone(),
        };
        let data = ingest_csv(&self.data, &opts).map_err(|e| e.to_string())?;
        let model = load_model(&self.model).map_err(|e| format!("{}: {e}", self.model.display()))?;
        Ok((data, model))
    }
}

fn parse_group(s: &str) -> Result<OneHotGroup, String> {
    let (name, cols) = s.split_once('=').ok_or("expected name=col1,col2,...")?;
    let columns: Vec<String> = cols.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
    if name.trim().is_empty() || columns.is_empty() {
        return Err("expected name=col1,col2,...".into());
    }
    Ok(OneHotGroup {
        name: name.trim().to_string(),
        columns,
    })
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    io: DataFlags,
    /// Row index in the dataset (0-based).
    #[arg(long)]
    instance: usize,
    #[arg(long, default_value = "gen-cf")]
    algo: Algorithm,
    #[command(flatten)]
    search: SearchFlags,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include wall-clock timings.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 12)]
    features: usize,
    /// Domain sizes, cycled over the features.
    #[arg(long, value_delimiter = ',', default_value = "8,9,10,11,12")]
    domain_size: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
    components: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "gen,gen-cf,greedy-cf")]
    algos: Vec<Algorithm>,
    /// Rows in the shared historical dataset.
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    #[command(flatten)]
    search: SearchFlags,
    /// JSON report path; a summary goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    timings: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Data,
    Sample,
    Cf,
    Brute,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    io: DataFlags,
    /// One `feature op bound` per line.
    #[arg(long)]
    rule: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Cf)]
    mode: Mode,
    #[arg(long, default_value_t = 1000)]
    s: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Anchor row for `cf` mode; defaults to the first bad row satisfying the rule.
    #[arg(long)]
    instance: Option<usize>,
}

#[derive(Serialize)]
struct RuleJson {
    rank: usize,
    level: String,
    vd: usize,
    vs: usize,
    score: f64,
    cf_verified: bool,
    cardinality: usize,
    components: Vec<ComponentJson>,
}

#[derive(Serialize)]
struct ComponentJson {
    feature: String,
    op: &'static str,
    bound: f64,
}

#[derive(Serialize)]
struct ExplainJson<'a> {
    algorithm: Algorithm,
    instance: usize,
    values: &'a [f64],
    score: f64,
    rules: Vec<RuleJson>,
    stats: StatsJson<'a>,
}

#[derive(Serialize)]
struct StatsJson<'a> {
    iterations: usize,
    classifier_calls: u64,
    cf_calls: u64,
    rules_scored: usize,
    hit_iteration_cap: bool,
    cf_rules_iterations: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<TimingsJson>,
}

#[derive(Serialize)]
struct TimingsJson {
    wall_ms: f64,
    generate_ms: f64,
    select_ms: f64,
    cf_rules_ms: f64,
    verify_ms: f64,
    reduce_ms: f64,
}

fn timings_of(stats: &ExplainStats) -> TimingsJson {
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1000.0;
    TimingsJson {
        wall_ms: ms(stats.wall_time),
        generate_ms: ms(stats.phases.generate),
        select_ms: ms(stats.phases.select),
        cf_rules_ms: ms(stats.phases.cf_rules),
        verify_ms: ms(stats.phases.verify),
        reduce_ms: ms(stats.phases.reduce),
    }
}

fn rule_json(rank: usize, r: &ScoredRule, data: &Dataset) -> RuleJson {
    RuleJson {
        rank,
        level: r.level.level.to_string(),
        vd: r.level.vd,
        vs: r.level.vs,
        score: r.score,
        cf_verified: r.cf_verified,
        cardinality: r.rule.cardinality(),
        components: r
            .rule
            .components()
            .iter()
            .map(|c| ComponentJson {
                feature: data.schema().feature(c.feature).name.clone(),
                op: c.direction.symbol(),
                bound: c.bound,
            })
            .collect(),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn explain(args: &ExplainArgs) -> Result<(), String> {
    let (data, model) = args.io.load()?;
    let x = data
        .instances()
        .get(args.instance)
        .ok_or_else(|| format!("row {} out of range ({} rows)", args.instance, data.m()))?;
    let score = model.predict(x).map_err(|e| e.to_string())?;
    let params = args.search.params();
    let res = args.algo.run(x, &model, &data, &params).map_err(|e| e.to_string())?;

    let text = match args.format {
        Format::Json => {
            let doc = ExplainJson {
                algorithm: args.algo,
                instance: args.instance,
                values: x.values(),
                score,
                rules: res.rules.iter().enumerate().map(|(i, r)| rule_json(i + 1, r, &data)).collect(),
                stats: StatsJson {
                    iterations: res.stats.iterations,
                    classifier_calls: res.stats.classifier_calls,
                    cf_calls: res.stats.cf_calls,
                    rules_scored: res.stats.rules_scored,
                    hit_iteration_cap: res.stats.hit_iteration_cap,
                    cf_rules_iterations: &res.stats.cf_rules_iterations,
                    timings: args.timings.then(|| timings_of(&res.stats)),
                },
            };
            serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())? + "\n"
        }
        Format::Text => {
            let mut s = format!("row {} (score {score}) explained by {}\n", args.instance, args.algo);
            for (i, r) in res.rules.iter().enumerate() {
                s += &format!(
                    "{:>2}. [{}{}] score {:.4}  {}\n",
                    i + 1,
                    r.level.level,
                    if r.cf_verified { ", verified" } else { "" },
                    r.score,
                    r.rule.describe(data.schema())
                );
            }
            s += &format!(
                "iterations {}  classifier calls {}  counterfactual queries {}{}\n",
                res.stats.iterations,
                res.stats.classifier_calls,
                res.stats.cf_calls,
                if res.stats.hit_iteration_cap { "  (iteration cap reached)" } else { "" }
            );
            if args.timings {
                let t = timings_of(&res.stats);
                s += &format!(
                    "wall {:.1} ms: generate {:.1}, select {:.1}, cf-rules {:.1}, verify {:.1}, reduce {:.1}\n",
                    t.wall_ms, t.generate_ms, t.select_ms, t.cf_rules_ms, t.verify_ms, t.reduce_ms
                );
            }
            s
        }
    };
    emit(args.out.as_deref(), &text)
}

#[derive(Serialize)]
struct SyntheticJson {
    runs: Vec<ExperimentReport>,
}

fn synthetic(args: &SyntheticArgs) -> Result<(), String> {
    let schema = grid_schema(args.features, &args.domain_size).map_err(|e| e.to_string())?;
    let params = args.search.params();
    let mut runs = Vec::new();
    let mut summary = String::new();
    for &components in &args.components {
        let mut spec = SyntheticSpec::new(schema.clone(), components, args.trials, args.search.seed)
            .map_err(|e| e.to_string())?;
        spec.rows = args.rows;
        let mut report = run_synthetic_experiment(&spec, &args.algos, &params).map_err(|e| e.to_string())?;
        if !args.timings {
            report.strip_timings();
        }
        for a in &report.algorithms {
            let p = &a.percentages;
            summary += &format!(
                "components {components:>2}  {:<9}  minimal {:>5.1}%  redundant {:>5.1}%  inconsistent {:>5.1}%  failed {:>5.1}%",
                a.algorithm.name(),
                p.consistent_minimal,
                p.consistent_redundant,
                p.inconsistent,
                p.failed
            );
            if let Some(rt) = &a.runtime {
                summary += &format!("  mean {:.1} ms  p90 {:.1} ms", rt.mean_ms, rt.p90_ms);
            }
            summary.push('\n');
        }
        runs.push(report);
    }
    let json = serde_json::to_string_pretty(&SyntheticJson { runs }).map_err(|e| e.to_string())? + "\n";
    match &args.out {
        Some(p) => {
            emit(Some(p), &json)?;
            emit(None, &summary)
        }
        None => emit(None, &json),
    }
}

fn verify(args: &VerifyArgs) -> Result<(), String> {
    let (data, model) = args.io.load()?;
    let text = fs::read_to_string(&args.rule).map_err(|e| format!("{}: {e}", args.rule.display()))?;
    let rule = Rule::parse_rule_file(&text, data.schema()).map_err(|e| format!("{}: {e}", args.rule.display()))?;
    let line = match args.mode {
        Mode::Data | Mode::Sample => {
            let s = if matches!(args.mode, Mode::Data) { 0 } else { args.s };
            let lvl = consistency_level(&rule, &data, &model, s, args.seed).map_err(|e| e.to_string())?;
            if matches!(args.mode, Mode::Data) {
                let verdict = if lvl.vd == 0 { "consistent" } else { "inconsistent" };
                format!("data {verdict} (violations {})\n", lvl.vd)
            } else {
                format!("level {} (data violations {}, sample violations {} of {s})\n", lvl.level, lvl.vd, lvl.vs)
            }
        }
        Mode::Brute => match brute_force_global_consistent(&rule, &model, data.schema(), DEFAULT_BRUTE_FORCE_CAP) {
            BruteForce::Consistent => "brute consistent\n".to_string(),
            BruteForce::Inconsistent => "brute inconsistent\n".to_string(),
            BruteForce::TooLarge => format!("brute too-large (over {DEFAULT_BRUTE_FORCE_CAP} instances)\n"),
        },
        Mode::Cf => {
            let x = anchor_for(&rule, &data, &model, args.instance)?;
            let oracle = GeneticCf::new();
            let cache = CfCache::new();
            let ctx = CfContext {
                model: &model,
                data: &data,
                anchor: &x,
                oracle: &oracle,
                cache: &cache,
                settings: Default::default(),
                covers: Default::default(),
                seed: args.seed,
            };
            let ok = ctx.is_consistent(&rule).map_err(|e| e.to_string())?;
            format!("cf {}\n", if ok { "consistent" } else { "inconsistent" })
        }
    };
    emit(None, &line)
}

fn anchor_for(rule: &Rule, data: &Dataset, model: &Classifier, row: Option<usize>) -> Result<Instance, String> {
    let x = match row {
        Some(i) => data.instances().get(i).ok_or_else(|| format!("row {i} out of range"))?.clone(),
        None => data
            .instances()
            .iter()
            .find(|x| rule.eval(x.values()) && is_bad(model.score(x.values())))
            .ok_or("no bad row satisfies the rule; pass --instance")?
            .clone(),
    };
    if !rule.eval(x.values()) {
        return Err("the anchor row does not satisfy the rule".into());
    }
    Ok(x)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Explain(a) => explain(a),
        Command::Synthetic(a) => synthetic(a),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rulecf: {e}");
            ExitCode::FAILURE
        }
    }
}

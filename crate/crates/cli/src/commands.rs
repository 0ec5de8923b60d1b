use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use atomshap::eval::{aggregate, evaluate_queries, EvalConfig, Scenario, ScenarioResult, SelectionMethod, TableRow};
use atomshap::executor::classify_answers;
use atomshap::kg::{DatasetBundle, EntityId};
use atomshap::query::{
    load_query_file, parse_query, render, render_atom, write_query_file, QueryInstance, Shape, Vocab,
};
use atomshap::scorer::{CachedScorer, EmbeddingTable};
use atomshap::shapley::QueryExplainer;
use atomshap::synth::{generate_graph, sample_query_set, GraphConfig, QueryConfig};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

fn print_json(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_queries(path: &Path, bundle: &DatasetBundle) -> Result<Vec<QueryInstance>> {
    Ok(load_query_file(path, bundle.entity_count(), bundle.relation_count())?)
}

/// Comma-separated list where `all` expands to every value.
fn parse_list<T: Copy>(text: &str, all: &[T], parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    if text == "all" {
        return Ok(all.to_vec());
    }
    text.split(',').map(|t| parse(t.trim())).collect()
}

#[derive(Args, Debug)]
pub struct IngestArgs {}

/// Validates a dataset directory and reports its size. With `--out` the
/// dataset is rewritten in the cumulative layout.
pub fn ingest(config: &RunConfig, _args: &IngestArgs) -> Result<()> {
    let bundle = config.load_dataset()?;
    if bundle.entity_count() == 0 {
        bail!("dataset has no entities");
    }
    if let Some(out) = &config.out {
        bundle.write(out)?;
    }
    print_json(&json!({
        "dataset": config.dataset_name(),
        "summary": bundle.summary(),
        "cumulative_input": config.cumulative,
    }))
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    /// Query in the text syntax, e.g. `?V1: r1(A,V1) AND r2(B,V1)`.
    #[arg(long, conflicts_with = "queries")]
    pub query: Option<String>,
    /// Query file; pick one entry with `--index`.
    #[arg(long, value_name = "FILE", requires = "index")]
    pub queries: Option<std::path::PathBuf>,
    #[arg(long)]
    pub index: Option<usize>,
    /// Entity to explain, as a label or `e:<index>`.
    #[arg(long)]
    pub target: String,
}

/// Shapley report for one (query, target) pair.
pub fn explain(config: &RunConfig, args: &ExplainArgs) -> Result<()> {
    let bundle = config.load_dataset()?;
    let vocab = Vocab::labels(&bundle.entities, &bundle.relations);
    let (observed, full) = config.graphs(&bundle);
    let query = match (&args.query, &args.queries, args.index) {
        (Some(text), _, _) => {
            // answers from the graphs: easy on the observed split, hard on the full one
            let q = parse_query(text, &vocab)?;
            let audit = classify_answers(&q, observed, full);
            q.with_answers(audit.answer_sets())
        }
        (None, Some(path), Some(i)) => {
            let mut qs = load_queries(path, &bundle)?;
            let n = qs.len();
            if i >= n {
                bail!("query index {i} is out of range ({n} queries)");
            }
            qs.swap_remove(i)
        }
        _ => bail!("give either --query or --queries with --index"),
    };
    let target = vocab
        .entity(&args.target)
        .with_context(|| format!("unknown entity `{}`", args.target))?;
    let scorer = config.scorer(&bundle)?;
    let cached = CachedScorer::new(scorer.as_ref());
    let report = QueryExplainer::new(&query, &cached, observed, config.exec())?.explain(target)?;
    let atoms: Vec<String> = (0..query.graph().num_atoms())
        .map(|a| render_atom(query.graph(), a, &vocab))
        .collect();
    let mut doc = report.to_json(&render(query.graph(), &vocab), &atoms);
    doc["target_label"] = Value::String(vocab.entity_name(target));
    doc["shape"] = json!(query.shape());
    doc["answer"] = Value::String(answer_kind(&query, target).into());
    doc["config"] = json!(config.provenance());
    print_json(&doc)
}

fn answer_kind(q: &QueryInstance, e: EntityId) -> &'static str {
    if q.answers().hard().contains(&e) {
        "hard"
    } else if q.answers().easy().contains(&e) {
        "easy"
    } else {
        "non-answer"
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Necessary,
    Sufficient,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub queries: std::path::PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub scenario: ScenarioArg,
    /// `all` or a comma-separated list of selection methods.
    #[arg(long, default_value = "all")]
    pub methods: String,
    /// `all` or a comma-separated list of shapes.
    #[arg(long, default_value = "all")]
    pub shapes: String,
    /// Format of the table printed to stdout.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,
    /// Dataset name written into the table; defaults to the directory name.
    #[arg(long)]
    pub name: Option<String>,
}

fn csv_bytes(rows: &[TableRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

/// Necessary and sufficient tables. Writes `table.csv` and `table.json` to
/// `--out` when given.
pub fn evaluate(config: &RunConfig, args: &EvaluateArgs) -> Result<()> {
    let methods = parse_list(&args.methods, &SelectionMethod::ALL, |t| Ok(t.parse()?))?;
    let shapes = parse_list(&args.shapes, &Shape::ALL, |t| Ok(t.parse()?))?;
    let scenarios = match args.scenario {
        ScenarioArg::Necessary => vec![Scenario::Necessary],
        ScenarioArg::Sufficient => vec![Scenario::Sufficient],
        ScenarioArg::Both => Scenario::ALL.to_vec(),
    };
    let bundle = config.load_dataset()?;
    let (observed, _) = config.graphs(&bundle);
    let queries: Vec<QueryInstance> = load_queries(&args.queries, &bundle)?
        .into_iter()
        .filter(|q| shapes.contains(&q.shape()))
        .collect();
    log::info!("evaluating {} queries", queries.len());
    let scorer = config.scorer(&bundle)?;
    let eval_config = EvalConfig {
        exec: config.exec(),
        seed: config.seed,
    };
    let evals = evaluate_queries(&queries, scorer.as_ref(), observed, &eval_config, &methods, &scenarios)?;
    let results: Vec<ScenarioResult> = scenarios
        .iter()
        .flat_map(|&s| methods.iter().map(move |&m| (s, m)))
        .map(|(s, m)| ScenarioResult::from_evaluations(&evals, s, m))
        .collect();
    let name = args.name.clone().unwrap_or_else(|| config.dataset_name());
    let rows = aggregate(&name, config.seed, &results, &shapes);
    let skipped: BTreeMap<Scenario, usize> = scenarios
        .iter()
        .map(|&s| (s, evals.iter().map(|e| e.skipped[s as usize]).sum()))
        .collect();
    let doc = json!({
        "dataset": name,
        "queries": queries.len(),
        "skipped_pairs": skipped,
        "config": config.provenance(),
        "rows": rows,
    });
    let csv = csv_bytes(&rows)?;
    if let Some(out) = &config.out {
        write_file(out, "table.csv", &csv)?;
        write_file(out, "table.json", serde_json::to_string_pretty(&doc)?.as_bytes())?;
    }
    match args.format {
        TableFormat::Csv => std::io::stdout().lock().write_all(&csv)?,
        TableFormat::Json => print_json(&doc)?,
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[arg(long, value_name = "FILE")]
    pub queries: std::path::PathBuf,
}

#[derive(Serialize)]
struct AuditRow {
    shape: Shape,
    queries: usize,
    mean_easy: Option<f64>,
    mean_hard_labelled: Option<f64>,
    mean_hard_recomputed: Option<f64>,
    /// Labelled hard answers the observed graph already reaches.
    not_genuinely_hard: usize,
    queries_with_flags: usize,
}

/// Per-shape answer statistics and labelled-hard answers that are in fact
/// reachable on the observed graph.
pub fn audit_hardness(config: &RunConfig, args: &AuditArgs) -> Result<()> {
    let bundle = config.load_dataset()?;
    let (observed, full) = config.graphs(&bundle);
    let queries = load_queries(&args.queries, &bundle)?;
    let mut rows: Vec<AuditRow> = Shape::ALL
        .iter()
        .map(|&shape| AuditRow {
            shape,
            queries: 0,
            mean_easy: None,
            mean_hard_labelled: None,
            mean_hard_recomputed: None,
            not_genuinely_hard: 0,
            queries_with_flags: 0,
        })
        .collect();
    let mut sums = [[0usize; 3]; 8];
    for q in &queries {
        let slot = Shape::ALL
            .iter()
            .position(|&s| s == q.shape())
            .expect("every shape is listed");
        let audit = classify_answers(q, observed, full);
        let row = &mut rows[slot];
        row.queries += 1;
        row.not_genuinely_hard += audit.not_genuinely_hard.len();
        row.queries_with_flags += (!audit.not_genuinely_hard.is_empty()) as usize;
        sums[slot][0] += q.answers().easy().len();
        sums[slot][1] += q.answers().hard().len();
        sums[slot][2] += audit.hard.len();
    }
    for (row, sum) in rows.iter_mut().zip(sums) {
        let mean = |x: usize| (row.queries > 0).then(|| x as f64 / row.queries as f64);
        row.mean_easy = mean(sum[0]);
        row.mean_hard_labelled = mean(sum[1]);
        row.mean_hard_recomputed = mean(sum[2]);
    }
    print_json(&json!({
        "dataset": config.dataset_name(),
        "observed": config.observed,
        "queries": queries.len(),
        "shapes": rows,
    }))
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_name = "FILE")]
    pub queries: std::path::PathBuf,
    /// Timed pairs per shape; each uses the query's first hard answer.
    #[arg(long, default_value_t = 20)]
    pub per_shape: usize,
    /// Untimed pairs run first to warm caches and the allocator.
    #[arg(long, default_value_t = 2)]
    pub warmup: usize,
}

#[derive(Serialize)]
struct BenchShape {
    pairs: usize,
    mean_ms: Option<f64>,
}

/// Mean explain() latency per shape. Every pair starts from an empty
/// score cache.
pub fn bench(config: &RunConfig, args: &BenchArgs) -> Result<()> {
    let bundle = config.load_dataset()?;
    let (observed, _) = config.graphs(&bundle);
    let queries = load_queries(&args.queries, &bundle)?;
    let scorer = config.scorer(&bundle)?;
    let explain_once = |q: &QueryInstance, target: EntityId| -> Result<()> {
        let cached = CachedScorer::new(scorer.as_ref());
        QueryExplainer::new(q, &cached, observed, config.exec())?.explain(target)?;
        Ok(())
    };
    let mut shapes = BTreeMap::new();
    for shape in Shape::ALL {
        let pairs: Vec<(&QueryInstance, EntityId)> = queries
            .iter()
            .filter(|q| q.shape() == shape)
            .filter_map(|q| q.answers().hard().iter().next().map(|&t| (q, t)))
            .take(args.warmup + args.per_shape)
            .collect();
        let warm = args.warmup.min(pairs.len());
        for &(q, t) in &pairs[..warm] {
            explain_once(q, t)?;
        }
        let timed = &pairs[warm..];
        let start = Instant::now();
        for &(q, t) in timed {
            explain_once(q, t)?;
        }
        let total = start.elapsed().as_secs_f64() * 1e3;
        shapes.insert(
            shape.as_str(),
            BenchShape {
                pairs: timed.len(),
                mean_ms: (!timed.is_empty()).then(|| total / timed.len() as f64),
            },
        );
    }
    print_json(&json!({
        "dataset": config.dataset_name(),
        "entities": bundle.entity_count(),
        "threads": rayon::current_num_threads(),
        "config": config.provenance(),
        "shapes": shapes,
    }))
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = GraphConfig::default().entities)]
    pub entities: usize,
    #[arg(long, default_value_t = GraphConfig::default().relations)]
    pub relations: usize,
    /// Distinct objects reachable through each relation.
    #[arg(long, default_value_t = GraphConfig::default().range)]
    pub range: usize,
    #[arg(long, default_value_t = GraphConfig::default().density)]
    pub density: f64,
    #[arg(long, default_value_t = GraphConfig::default().missing_rate)]
    pub missing_rate: f64,
    #[arg(long, default_value_t = QueryConfig::default().per_shape)]
    pub per_shape: usize,
    /// Also write random embeddings of this dimension (0 to skip).
    #[arg(long, default_value_t = 0)]
    pub dim: usize,
}

/// Writes a synthetic dataset, its test queries (`queries.json`) and
/// optionally random embeddings (`embeddings.bin`) to `--out`.
pub fn synth(config: &RunConfig, args: &SynthArgs) -> Result<()> {
    let out = config.out.as_deref().context("--out is required")?;
    let graph_config = GraphConfig {
        entities: args.entities,
        relations: args.relations,
        range: args.range.min(args.entities),
        density: args.density,
        missing_rate: args.missing_rate,
        seed: config.seed,
        ..GraphConfig::default()
    };
    let bundle = generate_graph(&graph_config);
    bundle.write(out)?;
    let queries = sample_query_set(
        &Shape::ALL,
        &bundle.test,
        &bundle.valid,
        &QueryConfig {
            per_shape: args.per_shape,
            seed: config.seed,
            ..QueryConfig::default()
        },
    );
    write_query_file(&out.join("queries.json"), &queries)?;
    if args.dim > 0 {
        EmbeddingTable::random(args.entities, args.relations, args.dim, config.seed)
            .write(&out.join("embeddings.bin"))?;
    }
    let mut per_shape = BTreeMap::new();
    for q in &queries {
        *per_shape.entry(q.shape().as_str()).or_insert(0usize) += 1;
    }
    print_json(&json!({
        "out": out.display().to_string(),
        "summary": bundle.summary(),
        "queries": per_shape,
        "seed": config.seed,
    }))
}

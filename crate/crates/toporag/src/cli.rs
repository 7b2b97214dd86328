//! Command-line pipeline driver.
//!
//! `toporag` strings the library stages into a file-based pipeline: `ingest`
//! loads and splits a dataset, `embed` computes topological and text
//! embeddings, `index` precomputes retrieval neighbours, `generate` runs the
//! generation experiment, and `correlate`, `evaluate`, and `impute` produce
//! reports. Every command reads its inputs from the shared output directory
//! and writes only there, so a pipeline is a sequence of idempotent steps
//! over named artifacts.
//!
//! Options resolve as flags over config file over built-in defaults. The
//! config file is a single JSON document (see [`RunConfig`]). All randomness
//! derives from one global seed through [`stage_seed`], so repeating a
//! command with the same inputs reproduces its outputs byte for byte.
//!
//! Exit codes: 0 success, 2 validation failure (bad flags, bad config, bad
//! input data, mismatched artifacts), 3 environment failure (I/O, network).

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    group_mean_matrix, layer_sweep, pairwise_scores, AnalysisReport, PairSelection,
};
use crate::embedding::{EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{
    impute_features, score_records, train_node_classifier, ClassifierConfig, ImputeStrategy,
    RunStats, TextImputeSource,
};
use crate::generation::{
    run_experiment, ExperimentConfig, GenerationBackend, RecordStore, TemplateId,
};
use crate::graph::{
    load_graph, load_summary, split_nodes, write_dataset, write_reindex_map, SplitAssignment,
    SplitStrategy, TextAttributedGraph,
};
use crate::proximity::{proximity_embeddings, DiffusionConfig};
use crate::retrieval::{RetrievalContext, RetrievalPlan, Strategy, TopKIndex};
use crate::role::{role_embeddings, WaveConfig, DEFAULT_EIGENSOLVER_CAP};
use crate::text_embed::{
    fnv1a64, graph_text_embeddings, text_embedding_fingerprint, EmbeddingProvider, TextSubset,
};

pub const NODES_FILE: &str = "graph.nodes.jsonl";
pub const EDGES_FILE: &str = "graph.edges.tsv";
pub const REINDEX_FILE: &str = "reindex.jsonl";
pub const SPLIT_FILE: &str = "split.json";
pub const PRUNED_EDGES_FILE: &str = "pruned.edges.tsv";
pub const INDEX_FILE: &str = "index.jsonl";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const EVAL_JSON_FILE: &str = "eval.json";
pub const EVAL_CSV_FILE: &str = "eval.csv";
pub const CORRELATE_FILE: &str = "correlate.json";
pub const IMPUTE_FILE: &str = "impute.json";

/// Artifact file holding an embedding of `kind`.
pub fn embedding_file(kind: EmbeddingKind) -> &'static str {
    match kind {
        EmbeddingKind::Proximity => "proximity.emb",
        EmbeddingKind::Role => "role.emb",
        EmbeddingKind::Text => "text.emb",
    }
}

/// Per-stage seed derived from the global seed and a stage name.
///
/// Stages in use: `split`, `subsample`, `proximity`, `text`, `pair-sample`,
/// `random-retrieval`, `generate-sample`, `impute-random`.
pub fn stage_seed(global: u64, stage: &str) -> u64 {
    fnv1a64(global, stage.as_bytes())
}

/// Run configuration; every field is optional and overridable by flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dataset: DatasetSection,
    pub split: SplitSection,
    pub diffusion: DiffusionSection,
    pub wave: WaveSection,
    pub provider: ProviderSection,
    pub generation: GenerationSection,
    pub retrieval: RetrievalSection,
    pub index: IndexSection,
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    /// Drop nodes with fewer text words than this.
    pub min_text_words: Option<usize>,
    /// Crawl a connected subgraph of this many nodes before splitting.
    pub subsample: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub strategy: Option<SplitStrategy>,
    pub fraction: Option<f64>,
    pub starting_words: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionSection {
    pub depth: Option<usize>,
    /// Explicit layer weights; override `depth` when present.
    pub alphas: Option<Vec<f64>>,
    pub projection_dim: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveSection {
    pub scale: Option<f64>,
    pub sample_points: Option<usize>,
    pub sample_lo: Option<f64>,
    pub sample_hi: Option<f64>,
    pub eigensolver_cap: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderSection {
    /// `"fallback"` or a service base URL.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub dimension: Option<usize>,
    pub batch_size: Option<usize>,
    pub auth_env: Option<String>,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationSection {
    /// `"mock"` or a service base URL.
    pub backend: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub auth_env: Option<String>,
    pub word_budget: Option<usize>,
    pub context_limit: Option<usize>,
    pub sample_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalSection {
    pub strategy: Option<Strategy>,
    pub k: Option<usize>,
    pub rank_offset: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexSection {
    pub embedding: Option<EmbeddingKind>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub topo: Option<EmbeddingKind>,
    pub sample_count: Option<usize>,
    pub bins: Option<usize>,
    pub layer_sweep: Option<usize>,
}

/// Per-strategy imputation outcome written to `impute.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImputeReport {
    pub missing_nodes: usize,
    pub missing_rate: f64,
    pub features_dim: usize,
    pub strategies: Vec<ImputeStrategyReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImputeStrategyReport {
    pub name: String,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub per_run: Vec<f64>,
}

#[derive(Parser)]
#[command(
    name = "toporag",
    version,
    about = "Topology-aware retrieval-augmented generation over text-attributed graphs"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON run configuration; flags override config fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory all artifacts are read from and written to.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed; every stage derives its own seed from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset, split nodes, and write the leakage-safe graph.
    Ingest(IngestArgs),
    /// Compute one embedding over the ingested graph.
    Embed(EmbedArgs),
    /// Correlate a topological embedding against the text embedding.
    Correlate(CorrelateArgs),
    /// Precompute top-K retrieval neighbours from an embedding.
    Index(IndexArgs),
    /// Run the generation experiment over the partial split.
    Generate(GenerateArgs),
    /// Score a record store against the held-out suffixes.
    Evaluate(EvaluateArgs),
    /// Impute held-out node features and compare classification accuracy.
    Impute(ImputeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmbedKindArg {
    TopoProximity,
    TopoRole,
    Text,
}

impl From<EmbedKindArg> for EmbeddingKind {
    fn from(v: EmbedKindArg) -> EmbeddingKind {
        match v {
            EmbedKindArg::TopoProximity => EmbeddingKind::Proximity,
            EmbedKindArg::TopoRole => EmbeddingKind::Role,
            EmbedKindArg::Text => EmbeddingKind::Text,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitStrategyArg {
    Random,
    Time,
}

impl From<SplitStrategyArg> for SplitStrategy {
    fn from(v: SplitStrategyArg) -> SplitStrategy {
        match v {
            SplitStrategyArg::Random => SplitStrategy::Random,
            SplitStrategyArg::Time => SplitStrategy::Time,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    None,
    Random,
    Text,
    Topo,
}

impl From<StrategyArg> for Strategy {
    fn from(v: StrategyArg) -> Strategy {
        match v {
            StrategyArg::None => Strategy::None,
            StrategyArg::Random => Strategy::Random,
            StrategyArg::Text => Strategy::Text,
            StrategyArg::Topo => Strategy::Topo,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PairsArg {
    /// Every ordered pair, self pairs included.
    All,
    /// Unordered distinct pairs.
    Unordered,
    /// Seeded sample of unordered distinct pairs.
    Sample,
}

#[derive(Args)]
struct IngestArgs {
    /// Nodes file (JSON lines).
    #[arg(long)]
    nodes: Option<PathBuf>,
    /// Edges file (tab-separated id pairs).
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Drop nodes with fewer text words than this.
    #[arg(long)]
    min_text_words: Option<usize>,
    /// Crawl a connected subgraph of this many nodes before splitting.
    #[arg(long)]
    subsample: Option<usize>,
    /// How partial nodes are chosen.
    #[arg(long, value_enum)]
    split_strategy: Option<SplitStrategyArg>,
    /// Fraction of nodes hidden as partial.
    #[arg(long)]
    fraction: Option<f64>,
    /// Observed prefix length in words.
    #[arg(long)]
    starting_words: Option<usize>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Which embedding to compute.
    #[arg(long, value_enum)]
    kind: EmbedKindArg,
    /// Diffusion depth (topo-proximity).
    #[arg(long)]
    depth: Option<usize>,
    /// Projection dimension (topo-proximity).
    #[arg(long)]
    projection_dim: Option<usize>,
    /// Heat kernel scale (topo-role).
    #[arg(long)]
    scale: Option<f64>,
    /// Dense eigensolver cap (topo-role).
    #[arg(long)]
    eigensolver_cap: Option<usize>,
    /// Embedding endpoint, "fallback" or a service URL (text).
    #[arg(long)]
    endpoint: Option<String>,
    /// Remote embedding model name (text).
    #[arg(long)]
    model: Option<String>,
    /// Text embedding dimension (text).
    #[arg(long)]
    dimension: Option<usize>,
}

#[derive(Args)]
struct CorrelateArgs {
    /// Topological embedding to correlate against text.
    #[arg(long, value_enum)]
    topo: Option<EmbedKindArg>,
    /// Which node pairs enter the correlation.
    #[arg(long, value_enum)]
    pairs: Option<PairsArg>,
    /// Pair count for --pairs sample.
    #[arg(long)]
    sample_count: Option<usize>,
    /// Equal-width bins for the text-score curve.
    #[arg(long)]
    bins: Option<usize>,
    /// Also sweep diffusion depth 1..=K and correlate each depth.
    #[arg(long, value_name = "K")]
    layer_sweep: Option<usize>,
    /// Skip the per-label group mean matrix.
    #[arg(long)]
    no_group_matrix: bool,
}

#[derive(Args)]
struct IndexArgs {
    /// Embedding the index ranks by.
    #[arg(long, value_enum)]
    embedding: Option<EmbedKindArg>,
    /// Neighbours kept per node.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    /// How context texts are chosen.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Context texts per prompt.
    #[arg(long)]
    k: Option<usize>,
    /// Skip the best candidates first (ranked strategies).
    #[arg(long)]
    rank_offset: Option<usize>,
    /// Generation backend, "mock" or a service URL.
    #[arg(long)]
    backend: Option<String>,
    /// Remote generation model name.
    #[arg(long)]
    model: Option<String>,
    /// Sampling temperature for remote backends.
    #[arg(long)]
    temperature: Option<f64>,
    /// How many partial nodes to run (default: all of them).
    #[arg(long)]
    sample_size: Option<usize>,
    /// Words the backend is asked for.
    #[arg(long)]
    word_budget: Option<usize>,
    /// Token budget for the context guard.
    #[arg(long)]
    context_limit: Option<usize>,
    /// Re-split with each prefix length and write records.sw{W}.jsonl per
    /// value instead of records.jsonl.
    #[arg(long, value_name = "W", value_delimiter = ',')]
    starting_words_grid: Vec<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Record store to score (default: records.jsonl in the output dir).
    #[arg(long)]
    records: Option<PathBuf>,
    /// Embedding endpoint for token scores, "fallback" or a service URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Remote embedding model name.
    #[arg(long)]
    model: Option<String>,
    /// Token embedding dimension.
    #[arg(long)]
    dimension: Option<usize>,
}

#[derive(Args)]
struct ImputeArgs {
    /// Record store for text imputation (default: records.jsonl).
    #[arg(long)]
    records: Option<PathBuf>,
    /// Retrieval plan key selecting records (inferred when unambiguous).
    #[arg(long)]
    plan_key: Option<String>,
    /// Backend id selecting records (inferred when unambiguous).
    #[arg(long)]
    backend_id: Option<String>,
    /// Classifier hidden width.
    #[arg(long)]
    hidden: Option<usize>,
    /// Classifier training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Classifier seeds (one run per seed).
    #[arg(long, value_delimiter = ',')]
    nc_seeds: Vec<u64>,
}

/// Parse `args` and run the selected command, returning the process exit
/// code. Never exits or panics on user error.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point for the binary.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Resolved global options shared by every command.
struct CommandContext {
    config: RunConfig,
    out: PathBuf,
    seed: u64,
}

impl CommandContext {
    fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn stage_seed(&self, stage: &str) -> u64 {
        stage_seed(self.seed, stage)
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let config = load_config(cli.global.config.as_deref())?;
    let out = cli
        .global
        .out
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("toporag-out"));
    let seed = cli.global.seed.or(config.seed).unwrap_or(0);
    let ctx = CommandContext { config, out, seed };
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&ctx, a),
        Command::Embed(a) => cmd_embed(&ctx, a),
        Command::Correlate(a) => cmd_correlate(&ctx, a),
        Command::Index(a) => cmd_index(&ctx, a),
        Command::Generate(a) => cmd_generate(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::Impute(a) => cmd_impute(&ctx, a),
    }
}

/// Read and parse the config file; any failure is a validation error so a
/// broken config exits 2, not 3.
fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("bad config {}: {e}", path.display())))
}

fn require_artifact(path: PathBuf, produced_by: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::InvalidConfig(format!(
            "missing artifact {}; run `{produced_by}` first",
            path.display()
        )))
    }
}

fn create_out_dir(ctx: &CommandContext) -> Result<()> {
    std::fs::create_dir_all(&ctx.out)
        .map_err(|e| Error::io(ctx.out.display().to_string(), e))
}

/// Load the ingested graph with the given edge artifact (`PRUNED_EDGES_FILE`
/// for retrieval-facing stages, `EDGES_FILE` for task evaluation).
fn load_pipeline_graph(ctx: &CommandContext, edges_file: &str) -> Result<TextAttributedGraph> {
    let nodes = require_artifact(ctx.artifact(NODES_FILE), "toporag ingest")?;
    let edges = require_artifact(ctx.artifact(edges_file), "toporag ingest")?;
    Ok(load_graph(&nodes, &edges, 0)?.graph)
}

fn load_split(ctx: &CommandContext) -> Result<SplitAssignment> {
    SplitAssignment::read_json(&require_artifact(ctx.artifact(SPLIT_FILE), "toporag ingest")?)
}

fn read_embedding(ctx: &CommandContext, kind: EmbeddingKind) -> Result<EmbeddingMatrix> {
    let name = embedding_file(kind);
    let hint = match kind {
        EmbeddingKind::Proximity => "toporag embed --kind topo-proximity",
        EmbeddingKind::Role => "toporag embed --kind topo-role",
        EmbeddingKind::Text => "toporag embed --kind text",
    };
    EmbeddingMatrix::read_binary(&require_artifact(ctx.artifact(name), hint)?)
}

/// Embedding provider resolved from flags and config. Fallback providers are
/// seeded from the `text` stage so every command embeds identically.
fn build_provider(
    ctx: &CommandContext,
    endpoint: Option<String>,
    model: Option<String>,
    dimension: Option<usize>,
) -> EmbeddingProvider {
    let pc = &ctx.config.provider;
    let endpoint = endpoint
        .or_else(|| pc.endpoint.clone())
        .unwrap_or_else(|| "fallback".into());
    let dimension = dimension.or(pc.dimension).unwrap_or(256);
    let mut provider = if endpoint == "fallback" {
        EmbeddingProvider::fallback(dimension, ctx.stage_seed("text"))
    } else {
        let model = model
            .or_else(|| pc.model.clone())
            .unwrap_or_else(|| "default".into());
        EmbeddingProvider::remote(&endpoint, &model, dimension)
    };
    if let Some(b) = pc.batch_size {
        provider.batch_size = b;
    }
    if let Some(env) = &pc.auth_env {
        provider.auth_env = Some(env.clone());
    }
    if let Some(dir) = &pc.cache_dir {
        provider.cache_dir = Some(dir.clone());
    }
    provider
}

fn write_edges_file(graph: &TextAttributedGraph, path: &Path) -> Result<()> {
    let p = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&p, e))?;
    let mut w = BufWriter::new(file);
    for &(a, b) in graph.edges() {
        writeln!(w, "{a}\t{b}").map_err(|e| Error::io(&p, e))?;
    }
    w.flush().map_err(|e| Error::io(&p, e))?;
    Ok(())
}

fn write_json_artifact<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let p = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&p, e))?;
    let mut w = BufWriter::new(file);
    let body = serde_json::to_string_pretty(value).map_err(|e| Error::json(&p, e))?;
    writeln!(w, "{body}").map_err(|e| Error::io(&p, e))?;
    w.flush().map_err(|e| Error::io(&p, e))?;
    Ok(())
}

fn cmd_ingest(ctx: &CommandContext, a: IngestArgs) -> Result<()> {
    let ds = &ctx.config.dataset;
    let nodes = a.nodes.or_else(|| ds.nodes.clone()).ok_or_else(|| {
        Error::InvalidConfig("no nodes file; pass --nodes or set dataset.nodes".into())
    })?;
    let edges = a.edges.or_else(|| ds.edges.clone()).ok_or_else(|| {
        Error::InvalidConfig("no edges file; pass --edges or set dataset.edges".into())
    })?;
    let min_text_words = a.min_text_words.or(ds.min_text_words).unwrap_or(0);

    let loaded = load_graph(&nodes, &edges, min_text_words)?;
    println!("loaded: {}", load_summary(&loaded));
    let mut graph = loaded.graph;
    let mut reindex = loaded.reindex;
    if let Some(target) = a.subsample.or(ds.subsample) {
        let sample = graph.sample_subgraph(target, ctx.stage_seed("subsample"))?;
        reindex = sample
            .node_map
            .iter()
            .enumerate()
            .map(|(new, &mid)| (reindex[mid as usize].0, new as u32))
            .collect();
        graph = sample.graph;
        println!(
            "subsampled: nodes={} edges={}",
            graph.node_count(),
            graph.edge_count()
        );
    }

    let sp = &ctx.config.split;
    let strategy = a
        .split_strategy
        .map(SplitStrategy::from)
        .or(sp.strategy)
        .unwrap_or(SplitStrategy::Random);
    let fraction = a.fraction.or(sp.fraction).unwrap_or(0.2);
    let starting_words = a.starting_words.or(sp.starting_words).unwrap_or(10);
    let split = split_nodes(&graph, strategy, fraction, starting_words, ctx.stage_seed("split"))?;
    let pruned = graph.remove_partial_partial_edges(&split)?;

    create_out_dir(ctx)?;
    write_dataset(&graph, &ctx.artifact(NODES_FILE), &ctx.artifact(EDGES_FILE))?;
    write_reindex_map(&reindex, &ctx.artifact(REINDEX_FILE))?;
    split.write_json(&ctx.artifact(SPLIT_FILE))?;
    write_edges_file(&pruned, &ctx.artifact(PRUNED_EDGES_FILE))?;

    println!(
        "split: full={} partial={} excluded={}",
        split.full_ids.len(),
        split.partial_ids.len(),
        split.excluded.len()
    );
    println!(
        "pruned edges: kept {} of {}",
        pruned.edge_count(),
        graph.edge_count()
    );
    Ok(())
}

fn cmd_embed(ctx: &CommandContext, a: EmbedArgs) -> Result<()> {
    // Retrieval-facing embeddings always come from the leakage-safe graph.
    let graph = load_pipeline_graph(ctx, PRUNED_EDGES_FILE)?;
    let kind = EmbeddingKind::from(a.kind);
    let emb = match a.kind {
        EmbedKindArg::TopoProximity => {
            let dc = &ctx.config.diffusion;
            let projection_dim = a.projection_dim.or(dc.projection_dim).unwrap_or(256);
            let seed = ctx.stage_seed("proximity");
            let config = match &dc.alphas {
                Some(alphas) if a.depth.is_none() => DiffusionConfig {
                    depth: alphas.len(),
                    alphas: alphas.clone(),
                    projection_dim,
                    seed,
                },
                _ => {
                    let depth = a.depth.or(dc.depth).unwrap_or(3);
                    DiffusionConfig::uniform(depth, projection_dim, seed)
                }
            };
            proximity_embeddings(&graph, &config)?
        }
        EmbedKindArg::TopoRole => {
            let wc = &ctx.config.wave;
            let scale = a.scale.or(wc.scale).unwrap_or(1.0);
            let count = wc.sample_points.unwrap_or(50);
            let lo = wc.sample_lo.unwrap_or(0.0);
            let hi = wc.sample_hi.unwrap_or(100.0);
            let mut config = WaveConfig::evenly_spaced(scale, count, lo, hi)?;
            config.eigensolver_cap = a
                .eigensolver_cap
                .or(wc.eigensolver_cap)
                .unwrap_or(DEFAULT_EIGENSOLVER_CAP);
            role_embeddings(&graph, &config)?
        }
        EmbedKindArg::Text => {
            let provider = build_provider(ctx, a.endpoint, a.model, a.dimension);
            graph_text_embeddings(&provider, &graph, TextSubset::All)?
        }
    };
    create_out_dir(ctx)?;
    let path = ctx.artifact(embedding_file(kind));
    emb.write_binary(&path)?;
    println!(
        "wrote {}: kind={} n={} dim={} fingerprint={}",
        path.display(),
        emb.kind(),
        emb.n(),
        emb.dim(),
        emb.fingerprint()
    );
    Ok(())
}

fn cmd_correlate(ctx: &CommandContext, a: CorrelateArgs) -> Result<()> {
    let graph = load_pipeline_graph(ctx, PRUNED_EDGES_FILE)?;
    let ac = &ctx.config.analysis;
    let topo_kind = a.topo.map(EmbeddingKind::from).or(ac.topo).unwrap_or(EmbeddingKind::Proximity);
    if topo_kind == EmbeddingKind::Text {
        return Err(Error::InvalidConfig(
            "correlate needs a topological embedding: topo-proximity or topo-role".into(),
        ));
    }
    let text_emb = read_embedding(ctx, EmbeddingKind::Text)?;
    let topo_emb = read_embedding(ctx, topo_kind)?;

    let selection = match a.pairs.unwrap_or(PairsArg::Unordered) {
        PairsArg::All => PairSelection::AllOrdered,
        PairsArg::Unordered => PairSelection::UnorderedNoSelf,
        PairsArg::Sample => PairSelection::Sampled {
            count: a.sample_count.or(ac.sample_count).unwrap_or(10_000),
            seed: ctx.stage_seed("pair-sample"),
        },
    };
    let sample = pairwise_scores(&graph, &text_emb, &topo_emb, selection)?;
    let coefficient = sample.pearson()?;

    let nbins = a.bins.or(ac.bins).unwrap_or(10);
    if nbins == 0 {
        return Err(Error::InvalidConfig("bin count must be >= 1".into()));
    }
    // pearson() already rejected constant text scores, so lo < hi holds.
    let lo = sample.text_scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample.text_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = (hi - lo) / nbins as f64;
    let edges: Vec<f64> = (0..=nbins).map(|b| lo + step * b as f64).collect();
    let bins = sample.curve(&edges)?;

    let distinct_labels: BTreeSet<&str> = (0..graph.node_count() as u32)
        .filter_map(|i| graph.label(i).expect("id in range"))
        .collect();
    let group_matrix = if !a.no_group_matrix && distinct_labels.len() >= 2 {
        Some(group_mean_matrix(&graph, &sample.pairs, &sample.text_scores)?)
    } else {
        None
    };

    let sweep = match a.layer_sweep.or(ac.layer_sweep) {
        Some(k_max) => {
            let projection_dim = ctx.config.diffusion.projection_dim.unwrap_or(256);
            Some(layer_sweep(
                &graph,
                &text_emb,
                k_max,
                projection_dim,
                ctx.stage_seed("proximity"),
                selection,
            )?)
        }
        None => None,
    };

    let report = AnalysisReport {
        pair_selection: sample.selection.clone(),
        topo_metric: sample.topo_metric.clone(),
        pairs: sample.pairs.len(),
        pearson: coefficient,
        pearson_all_ordered: None,
        bins,
        group_matrix,
        layer_sweep: sweep,
        text_fingerprint: text_emb.fingerprint().to_owned(),
        topo_fingerprint: topo_emb.fingerprint().to_owned(),
    };
    create_out_dir(ctx)?;
    write_json_artifact(&report, &ctx.artifact(CORRELATE_FILE))?;
    println!(
        "pearson={:.4} pairs={} metric={}",
        coefficient,
        report.pairs,
        report.topo_metric
    );
    if let Some(sweep) = &report.layer_sweep {
        let rendered: Vec<String> = sweep.iter().map(|c| format!("{c:.4}")).collect();
        println!("layer sweep: [{}]", rendered.join(", "));
    }
    Ok(())
}

fn cmd_index(ctx: &CommandContext, a: IndexArgs) -> Result<()> {
    let ic = &ctx.config.index;
    let kind = a
        .embedding
        .map(EmbeddingKind::from)
        .or(ic.embedding)
        .unwrap_or(EmbeddingKind::Proximity);
    let emb = read_embedding(ctx, kind)?;
    let split = load_split(ctx)?;
    let k = a.k.or(ic.k).unwrap_or(8);
    let index = TopKIndex::from_embedding(&emb, &split.full_ids, k)?;
    create_out_dir(ctx)?;
    let path = ctx.artifact(INDEX_FILE);
    index.save(&path)?;
    println!(
        "wrote {}: kind={} k={} nodes={}",
        path.display(),
        index.kind(),
        index.k(),
        index.node_count()
    );
    Ok(())
}

fn cmd_generate(ctx: &CommandContext, a: GenerateArgs) -> Result<()> {
    let split = load_split(ctx)?;
    let graph = load_pipeline_graph(ctx, PRUNED_EDGES_FILE)?;
    let rc = &ctx.config.retrieval;
    let strategy = a.strategy.map(Strategy::from).or(rc.strategy).unwrap_or(Strategy::Topo);
    let plan = RetrievalPlan {
        strategy,
        k: a.k.or(rc.k).unwrap_or(2),
        rank_offset: a.rank_offset.or(rc.rank_offset).unwrap_or(0),
        seed: ctx.stage_seed("random-retrieval"),
    };

    let index = match strategy {
        Strategy::Topo => {
            let path = require_artifact(ctx.artifact(INDEX_FILE), "toporag index")?;
            let index = TopKIndex::load(&path)?;
            // The index must have been built from the embedding file as it
            // stands now, not an earlier run's version.
            let emb = read_embedding(ctx, index.kind())?;
            if emb.fingerprint() != index.fingerprint() {
                return Err(Error::FingerprintMismatch {
                    left: format!("index built from {}", index.fingerprint()),
                    right: format!(
                        "{} holds {}",
                        embedding_file(index.kind()),
                        emb.fingerprint()
                    ),
                });
            }
            Some(index)
        }
        _ => None,
    };
    let (text_emb, provider) = match strategy {
        Strategy::Text => {
            let emb = read_embedding(ctx, EmbeddingKind::Text)?;
            let provider = build_provider(ctx, None, None, Some(emb.dim()));
            let expected = text_embedding_fingerprint(&graph, &provider, TextSubset::All);
            if emb.fingerprint() != expected {
                return Err(Error::FingerprintMismatch {
                    left: format!("text.emb holds {}", emb.fingerprint()),
                    right: format!("current graph and provider give {expected}"),
                });
            }
            (Some(emb), Some(provider))
        }
        _ => (None, None),
    };

    let gc = &ctx.config.generation;
    let backend_spec = a
        .backend
        .or_else(|| gc.backend.clone())
        .unwrap_or_else(|| "mock".into());
    let mut backend = if backend_spec == "mock" {
        GenerationBackend::mock()
    } else {
        let model = a
            .model
            .or_else(|| gc.model.clone())
            .unwrap_or_else(|| "default".into());
        GenerationBackend::remote(&backend_spec, &model)
    };
    if let Some(t) = a.temperature.or(gc.temperature) {
        backend.temperature = t;
    }
    if let Some(env) = &gc.auth_env {
        backend.auth_env = Some(env.clone());
    }

    let cfg = ExperimentConfig {
        sample_size: a
            .sample_size
            .or(gc.sample_size)
            .unwrap_or(split.partial_ids.len()),
        seed: ctx.stage_seed("generate-sample"),
        word_budget: a.word_budget.or(gc.word_budget).unwrap_or(50),
        context_limit: a.context_limit.or(gc.context_limit).unwrap_or(4096),
        template: TemplateId::DefaultV1,
    };

    create_out_dir(ctx)?;
    // The grid resplits with each prefix length; strategy, fraction, and
    // seed are pinned, so the partial id set is identical across entries.
    let runs: Vec<(SplitAssignment, PathBuf)> = if a.starting_words_grid.is_empty() {
        vec![(split, ctx.artifact(RECORDS_FILE))]
    } else {
        let mut runs = Vec::new();
        for &w in &a.starting_words_grid {
            let resplit = split_nodes(&graph, split.strategy, split.fraction, w, split.seed)?;
            runs.push((resplit, ctx.artifact(&format!("records.sw{w}.jsonl"))));
        }
        runs
    };

    for (split, path) in &runs {
        let retrieval_ctx = RetrievalContext {
            graph: &graph,
            pool: &split.full_ids,
            index: index.as_ref(),
            text_emb: text_emb.as_ref(),
            provider: provider.as_ref(),
        };
        let mut store = RecordStore::open(path)?;
        let records = run_experiment(split, &plan, &retrieval_ctx, &backend, &cfg, &mut store)?;
        store.compact()?;
        let generated = records.iter().filter(|r| !r.excluded).count();
        println!(
            "{}: {} generated, {} excluded (strategy {})",
            path.display(),
            generated,
            records.len() - generated,
            plan.key()
        );
    }
    Ok(())
}

fn cmd_evaluate(ctx: &CommandContext, a: EvaluateArgs) -> Result<()> {
    let records_path = match a.records {
        Some(p) => require_artifact(p, "toporag generate")?,
        None => require_artifact(ctx.artifact(RECORDS_FILE), "toporag generate")?,
    };
    let bytes = std::fs::read(&records_path)
        .map_err(|e| Error::io(records_path.display().to_string(), e))?;
    let fingerprint = hex::encode(Sha256::digest(&bytes));
    let store = RecordStore::open(&records_path)?;
    let records: Vec<_> = store.records().cloned().collect();
    let provider = build_provider(ctx, a.endpoint, a.model, a.dimension);
    let report = score_records(&records, &provider, Some(fingerprint))?;
    create_out_dir(ctx)?;
    report.write_json(&ctx.artifact(EVAL_JSON_FILE))?;
    report.write_csv(&ctx.artifact(EVAL_CSV_FILE))?;
    for s in &report.summaries {
        println!(
            "{}: scored={} excluded={} bleu4={:.4} rouge_l={:.4} emb_f1={:.4}",
            s.strategy, s.scored, s.excluded, s.mean_bleu4, s.mean_rouge_l, s.mean_emb_f1
        );
    }
    Ok(())
}

fn cmd_impute(ctx: &CommandContext, a: ImputeArgs) -> Result<()> {
    // Tasks run on the real structure; only retrieval needed the pruned one.
    let graph = load_pipeline_graph(ctx, EDGES_FILE)?;
    let split = load_split(ctx)?;
    let features_emb = read_embedding(ctx, EmbeddingKind::Text)?;
    let features = features_emb.matrix();
    let missing = &split.partial_ids;

    let records_path = match a.records {
        Some(p) => require_artifact(p, "toporag generate")?,
        None => require_artifact(ctx.artifact(RECORDS_FILE), "toporag generate")?,
    };
    let store = RecordStore::open(&records_path)?;
    let mut keys: BTreeSet<(String, String)> = store
        .records()
        .map(|r| (r.strategy.clone(), r.backend.clone()))
        .collect();
    if let Some(plan) = &a.plan_key {
        keys.retain(|(s, _)| s == plan);
    }
    if let Some(backend) = &a.backend_id {
        keys.retain(|(_, b)| b == backend);
    }
    let (strategy_key, backend_id) = match keys.len() {
        1 => keys.into_iter().next().expect("one element"),
        0 => {
            return Err(Error::InvalidConfig(format!(
                "no records in {} match the requested plan/backend",
                records_path.display()
            )))
        }
        _ => {
            let listed: Vec<String> = keys
                .iter()
                .map(|(s, b)| format!("{s} @ {b}"))
                .collect();
            return Err(Error::InvalidConfig(format!(
                "record store holds several runs ({}); pick one with --plan-key/--backend-id",
                listed.join(", ")
            )));
        }
    };
    let provider = build_provider(ctx, None, None, Some(features.ncols()));
    let source = TextImputeSource {
        store: &store,
        provider: &provider,
        strategy_key: &strategy_key,
        backend_id: &backend_id,
    };

    let mut nc = ClassifierConfig::default();
    if let Some(h) = a.hidden {
        nc.hidden = h;
    }
    if let Some(e) = a.epochs {
        nc.epochs = e;
    }
    if !a.nc_seeds.is_empty() {
        nc.seeds = a.nc_seeds.clone();
    }

    let strategies: Vec<(&str, Option<ImputeStrategy>)> = vec![
        ("original", None),
        ("zero", Some(ImputeStrategy::Zero)),
        (
            "random",
            Some(ImputeStrategy::Random {
                seed: ctx.stage_seed("impute-random"),
            }),
        ),
        ("global_mean", Some(ImputeStrategy::GlobalMean)),
        ("toporag_text", Some(ImputeStrategy::TopoRagText)),
    ];
    let mut reports = Vec::new();
    for (name, strategy) in &strategies {
        let imputed = match strategy {
            None => features.clone(),
            Some(s) => impute_features(features, missing, s, Some(&source))?,
        };
        let stats: RunStats = train_node_classifier(&imputed, &graph, missing, &nc)?;
        println!(
            "{name}: accuracy {:.4} +- {:.4} over {} runs",
            stats.mean,
            stats.std,
            stats.per_run.len()
        );
        reports.push(ImputeStrategyReport {
            name: (*name).to_owned(),
            accuracy_mean: stats.mean,
            accuracy_std: stats.std,
            per_run: stats.per_run,
        });
    }

    let report = ImputeReport {
        missing_nodes: missing.len(),
        missing_rate: missing.len() as f64 / graph.node_count() as f64,
        features_dim: features.ncols(),
        strategies: reports,
    };
    create_out_dir(ctx)?;
    write_json_artifact(&report, &ctx.artifact(IMPUTE_FILE))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_seeds_differ_by_stage_and_global_seed() {
        assert_eq!(stage_seed(7, "split"), stage_seed(7, "split"));
        assert_ne!(stage_seed(7, "split"), stage_seed(7, "proximity"));
        assert_ne!(stage_seed(7, "split"), stage_seed(8, "split"));
    }

    #[test]
    fn config_parses_sections_and_rejects_unknown_fields() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{
                "seed": 3,
                "out": "artifacts",
                "split": {"strategy": "time", "fraction": 0.5},
                "retrieval": {"strategy": "topo", "k": 4}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.split.strategy, Some(SplitStrategy::Time));
        assert_eq!(cfg.retrieval.k, Some(4));
        assert!(serde_json::from_str::<RunConfig>(r#"{"spli": {}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"split": {"frac": 0.5}}"#).is_err());
    }

    #[test]
    fn broken_config_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, "{ not json").unwrap();
        let err = load_config(Some(&path)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = load_config(Some(&dir.path().join("absent.json"))).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn help_and_bad_flags_map_to_exit_codes() {
        assert_eq!(run_from(["toporag", "--help"]), 0);
        assert_eq!(run_from(["toporag", "frobnicate"]), 2);
        assert_eq!(run_from(["toporag", "embed", "--kind", "nonsense"]), 2);
    }

    #[test]
    fn missing_artifact_names_the_producing_command() {
        let dir = tempfile::tempdir().unwrap();
        let err = require_artifact(dir.path().join("split.json"), "toporag ingest").unwrap_err();
        assert!(err.to_string().contains("toporag ingest"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }
}

//! Prompt assembly, generation backends, and the experiment runner.
//!
//! A [`PromptBundle`] renders a fixed template: the instruction with the word
//! budget, numbered reference texts, then the prefix to continue. A token
//! guard estimates prompt length (1.4 tokens per whitespace word, rounded up)
//! and excludes prompts over the caller's context limit instead of sending
//! them.
//!
//! Backends implement one call: prompt in, text out. The deterministic mock
//! backend needs no network and makes experiments reproducible end to end:
//! with references it cycles their words up to the word budget, without it
//! echoes the prefix words reversed. The remote backend POSTs to
//! `{endpoint}/generate` with `{"model", "prompt", "max_words",
//! "temperature"}`, expects `{"text"}`, and retries like the embedding
//! client.
//!
//! [`run_experiment`] samples generation targets from the partial split,
//! retrieves context per the plan, and appends one [`GenerationRecord`] per
//! target to a [`RecordStore`] keyed by `(target, plan, backend)`. Re-running
//! with the same store skips every record already present, so interrupted
//! runs resume instead of regenerating.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SplitAssignment;
use crate::retrieval::{retrieve, RetrievalContext, RetrievalPlan};
use crate::text_embed::post_json_with_retry;

/// Default environment variable consulted for the generation bearer token.
pub const DEFAULT_AUTH_ENV: &str = "GEN_API_KEY";

/// Prompt template identifier, recorded with every prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateId {
    #[serde(rename = "default-v1")]
    DefaultV1,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::DefaultV1 => "default-v1",
        }
    }
}

/// Everything needed to render one generation request.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub target: u32,
    pub prefix: String,
    pub retrieved: Vec<String>,
    pub word_budget: usize,
    pub template: TemplateId,
}

/// Bundle the prompt parts; rendering happens in
/// [`PromptBundle::prompt_text`].
pub fn assemble_prompt(
    target: u32,
    prefix: &str,
    retrieved: &[String],
    word_budget: usize,
    template: TemplateId,
) -> PromptBundle {
    PromptBundle {
        target,
        prefix: prefix.to_owned(),
        retrieved: retrieved.to_vec(),
        word_budget,
        template,
    }
}

impl PromptBundle {
    /// Deterministic rendering of the template.
    pub fn prompt_text(&self) -> String {
        match self.template {
            TemplateId::DefaultV1 => {
                let mut s = format!(
                    "Continue the following text in the same style; write approximately {} words.\n",
                    self.word_budget
                );
                for (i, r) in self.retrieved.iter().enumerate() {
                    s.push_str(&format!("\nReference {}: {}\n", i + 1, r));
                }
                s.push_str(&format!("\nText to continue: {}", self.prefix));
                s
            }
        }
    }

    /// Crude token estimate: 1.4 tokens per whitespace word, rounded up.
    pub fn estimated_tokens(&self) -> usize {
        let words = self.prompt_text().split_whitespace().count();
        (words as f64 * 1.4).ceil() as usize
    }
}

/// Outcome of the context-length guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardDecision {
    Accept { estimated_tokens: usize },
    Exclude { estimated_tokens: usize, limit: usize },
}

/// Accept the bundle iff its token estimate fits `limit` (estimates equal to
/// the limit pass).
pub fn context_guard(bundle: &PromptBundle, limit: usize) -> GuardDecision {
    let estimated_tokens = bundle.estimated_tokens();
    if estimated_tokens <= limit {
        GuardDecision::Accept { estimated_tokens }
    } else {
        GuardDecision::Exclude {
            estimated_tokens,
            limit,
        }
    }
}

/// Where generations come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendEndpoint {
    /// Deterministic offline generator.
    Mock,
    /// Base URL of a generation service.
    Remote(String),
}

/// Configuration of one generation backend.
#[derive(Debug, Clone)]
pub struct GenerationBackend {
    pub endpoint: BackendEndpoint,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub auth_env: Option<String>,
    pub retry_backoff: Duration,
}

impl GenerationBackend {
    pub fn mock() -> GenerationBackend {
        GenerationBackend {
            endpoint: BackendEndpoint::Mock,
            model: "mock".into(),
            temperature: 0.0,
            timeout: Duration::from_secs(120),
            auth_env: Some(DEFAULT_AUTH_ENV.into()),
            retry_backoff: Duration::from_millis(250),
        }
    }

    pub fn remote(endpoint: &str, model: &str) -> GenerationBackend {
        GenerationBackend {
            endpoint: BackendEndpoint::Remote(endpoint.trim_end_matches('/').to_owned()),
            model: model.to_owned(),
            temperature: 0.0,
            timeout: Duration::from_secs(120),
            auth_env: Some(DEFAULT_AUTH_ENV.into()),
            retry_backoff: Duration::from_millis(250),
        }
    }

    /// Stable backend identifier, part of every record key.
    pub fn id(&self) -> String {
        match &self.endpoint {
            BackendEndpoint::Mock => "mock".into(),
            BackendEndpoint::Remote(url) => format!("{}@{}", self.model, url),
        }
    }
}

fn mock_generate(bundle: &PromptBundle) -> String {
    if bundle.retrieved.is_empty() {
        let mut words: Vec<&str> = bundle.prefix.split_whitespace().collect();
        words.reverse();
        return words.join(" ");
    }
    let words: Vec<&str> = bundle
        .retrieved
        .iter()
        .flat_map(|t| t.split_whitespace())
        .collect();
    if words.is_empty() {
        return String::new();
    }
    let take = bundle.word_budget.max(1);
    let mut out = Vec::with_capacity(take);
    for i in 0..take {
        out.push(words[i % words.len()]);
    }
    out.join(" ")
}

/// Run one generation. Empty backend output is an error; the experiment
/// runner turns it into an excluded record.
pub fn generate(backend: &GenerationBackend, bundle: &PromptBundle) -> Result<String> {
    let text = match &backend.endpoint {
        BackendEndpoint::Mock => mock_generate(bundle),
        BackendEndpoint::Remote(url) => {
            let payload = serde_json::json!({
                "model": backend.model,
                "prompt": bundle.prompt_text(),
                "max_words": bundle.word_budget,
                "temperature": backend.temperature,
            });
            let body = post_json_with_retry(
                &format!("{url}/generate"),
                backend.auth_env.as_deref(),
                backend.timeout,
                backend.retry_backoff,
                &payload,
            )
            .map_err(Error::Backend)?;
            #[derive(Deserialize)]
            struct GenResponse {
                text: String,
            }
            let resp: GenResponse = serde_json::from_value(body)
                .map_err(|e| Error::Backend(format!("malformed generate response: {e}")))?;
            resp.text
        }
    };
    if text.trim().is_empty() {
        return Err(Error::Backend(format!(
            "{} returned empty output",
            backend.id()
        )));
    }
    Ok(text)
}

/// One target's generation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub target: u32,
    /// Retrieval plan key, e.g. `topo:k=3:offset=0`.
    pub strategy: String,
    pub backend: String,
    pub prompt: String,
    /// Observed prefix the model was asked to continue.
    pub prefix: String,
    /// Held-out continuation, when the target had one.
    pub reference: Option<String>,
    /// Generated text; present exactly when the record is not excluded.
    pub output: Option<String>,
    pub excluded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusion_reason: Option<String>,
}

impl GenerationRecord {
    /// Store key: target, plan key, backend id.
    pub fn key(&self) -> String {
        format!("{}|{}|{}", self.target, self.strategy, self.backend)
    }

    /// Leading strategy name without its parameters.
    pub fn strategy_name(&self) -> &str {
        self.strategy.split(':').next().unwrap_or(&self.strategy)
    }
}

/// Append-only store of generation records, optionally file-backed.
///
/// The on-disk form is JSON lines; on load, a later line for the same key
/// wins, so appending updated records is safe. [`compact`](Self::compact)
/// rewrites the file without the shadowed lines.
#[derive(Debug)]
pub struct RecordStore {
    path: Option<PathBuf>,
    records: BTreeMap<String, GenerationRecord>,
}

impl RecordStore {
    pub fn in_memory() -> RecordStore {
        RecordStore {
            path: None,
            records: BTreeMap::new(),
        }
    }

    /// Open a file-backed store; a missing file is an empty store.
    pub fn open(path: &Path) -> Result<RecordStore> {
        let p = path.display().to_string();
        let mut records = BTreeMap::new();
        match File::open(path) {
            Ok(file) => {
                for (lineno, line) in BufReader::new(file).lines().enumerate() {
                    let line = line.map_err(|e| Error::io(&p, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let rec: GenerationRecord =
                        serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                            path: p.clone(),
                            line: lineno + 1,
                            message: e.to_string(),
                        })?;
                    records.insert(rec.key(), rec);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(&p, e)),
        }
        Ok(RecordStore {
            path: Some(path.to_owned()),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&GenerationRecord> {
        self.records.get(key)
    }

    pub fn records(&self) -> impl Iterator<Item = &GenerationRecord> {
        self.records.values()
    }

    /// Insert, appending to the backing file when there is one.
    pub fn insert(&mut self, record: GenerationRecord) -> Result<()> {
        if let Some(path) = &self.path {
            let p = path.display().to_string();
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(&p, e))?;
            let line = serde_json::to_string(&record).map_err(|e| Error::json(&p, e))?;
            writeln!(f, "{line}").map_err(|e| Error::io(&p, e))?;
        }
        self.records.insert(record.key(), record);
        Ok(())
    }

    /// Drop records failing the predicate, rewriting the backing file.
    pub fn retain<F: FnMut(&GenerationRecord) -> bool>(&mut self, mut keep: F) -> Result<()> {
        self.records.retain(|_, r| keep(r));
        self.rewrite()
    }

    /// Rewrite the backing file with exactly one line per key.
    pub fn compact(&self) -> Result<()> {
        self.rewrite()
    }

    fn rewrite(&self) -> Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let p = path.display().to_string();
        let mut f = File::create(path).map_err(|e| Error::io(&p, e))?;
        for rec in self.records.values() {
            let line = serde_json::to_string(rec).map_err(|e| Error::json(&p, e))?;
            writeln!(f, "{line}").map_err(|e| Error::io(&p, e))?;
        }
        f.flush().map_err(|e| Error::io(&p, e))?;
        Ok(())
    }
}

/// Parameters of one generation experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// How many partial nodes to run.
    pub sample_size: usize,
    /// Seed for target sampling.
    pub seed: u64,
    /// Words the backend is asked for.
    pub word_budget: usize,
    /// Token budget for the context guard.
    pub context_limit: usize,
    pub template: TemplateId,
}

/// Sample targets, retrieve, assemble, guard, generate; one record per
/// target, reusing any record already in the store under the same key.
///
/// Per-record failures (over-long context, backend errors, missing prefix)
/// become excluded records; configuration problems (pool too small, rank
/// window past the list) abort the run.
pub fn run_experiment(
    split: &SplitAssignment,
    plan: &RetrievalPlan,
    ctx: &RetrievalContext<'_>,
    backend: &GenerationBackend,
    cfg: &ExperimentConfig,
    store: &mut RecordStore,
) -> Result<Vec<GenerationRecord>> {
    if cfg.sample_size == 0 || cfg.sample_size > split.partial_ids.len() {
        return Err(Error::SampleTooLarge {
            requested: cfg.sample_size,
            available: split.partial_ids.len(),
        });
    }
    if cfg.word_budget == 0 {
        return Err(Error::InvalidConfig("word budget must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut targets: Vec<u32> = index_sample(&mut rng, split.partial_ids.len(), cfg.sample_size)
        .into_iter()
        .map(|i| split.partial_ids[i])
        .collect();
    targets.sort_unstable();

    let plan_key = plan.key();
    let backend_id = backend.id();
    let mut out = Vec::with_capacity(targets.len());
    for target in targets {
        let key = format!("{target}|{plan_key}|{backend_id}");
        if let Some(existing) = store.get(&key) {
            out.push(existing.clone());
            continue;
        }
        let record = match split.prefixes.get(&target) {
            None => GenerationRecord {
                target,
                strategy: plan_key.clone(),
                backend: backend_id.clone(),
                prompt: String::new(),
                prefix: String::new(),
                reference: None,
                output: None,
                excluded: true,
                exclusion_reason: Some("short_text".into()),
            },
            Some(pt) => {
                let retrieved = retrieve(plan, target, ctx, &pt.prefix)?;
                let texts: Vec<String> = retrieved.into_iter().map(|r| r.text).collect();
                let bundle =
                    assemble_prompt(target, &pt.prefix, &texts, cfg.word_budget, cfg.template);
                match context_guard(&bundle, cfg.context_limit) {
                    GuardDecision::Exclude { .. } => GenerationRecord {
                        target,
                        strategy: plan_key.clone(),
                        backend: backend_id.clone(),
                        prompt: bundle.prompt_text(),
                        prefix: pt.prefix.clone(),
                        reference: Some(pt.suffix.clone()),
                        output: None,
                        excluded: true,
                        exclusion_reason: Some("context_limit".into()),
                    },
                    GuardDecision::Accept { .. } => match generate(backend, &bundle) {
                        Ok(output) => GenerationRecord {
                            target,
                            strategy: plan_key.clone(),
                            backend: backend_id.clone(),
                            prompt: bundle.prompt_text(),
                            prefix: pt.prefix.clone(),
                            reference: Some(pt.suffix.clone()),
                            output: Some(output),
                            excluded: false,
                            exclusion_reason: None,
                        },
                        Err(_) => GenerationRecord {
                            target,
                            strategy: plan_key.clone(),
                            backend: backend_id.clone(),
                            prompt: bundle.prompt_text(),
                            prefix: pt.prefix.clone(),
                            reference: Some(pt.suffix.clone()),
                            output: None,
                            excluded: true,
                            exclusion_reason: Some("backend_error".into()),
                        },
                    },
                }
            }
        };
        store.insert(record.clone())?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{split_nodes, SplitStrategy, TextAttributedGraph};
    use crate::proximity::{proximity_embeddings, DiffusionConfig};
    use crate::retrieval::{RetrievalPlan, Strategy, TopKIndex};

    #[test]
    fn template_renders_exactly() {
        let bundle = assemble_prompt(
            3,
            "the opening words",
            &["first reference text".into(), "second one".into()],
            150,
            TemplateId::DefaultV1,
        );
        let want = "Continue the following text in the same style; write approximately 150 words.\n\
                    \nReference 1: first reference text\n\
                    \nReference 2: second one\n\
                    \nText to continue: the opening words";
        assert_eq!(bundle.prompt_text(), want);
    }

    #[test]
    fn template_without_references_has_no_reference_lines() {
        let bundle = assemble_prompt(0, "just a prefix", &[], 50, TemplateId::DefaultV1);
        let text = bundle.prompt_text();
        assert!(!text.contains("Reference"));
        assert!(text.ends_with("Text to continue: just a prefix"));
    }

    #[test]
    fn token_estimate_and_guard_boundary() {
        let bundle = assemble_prompt(0, "a b c", &[], 10, TemplateId::DefaultV1);
        // prompt: 11 instruction words + "Text to continue:" (3) + 3 prefix
        let words = bundle.prompt_text().split_whitespace().count();
        let want = (words as f64 * 1.4).ceil() as usize;
        assert_eq!(bundle.estimated_tokens(), want);
        assert_eq!(
            context_guard(&bundle, want),
            GuardDecision::Accept { estimated_tokens: want },
            "estimate equal to the limit passes"
        );
        assert_eq!(
            context_guard(&bundle, want - 1),
            GuardDecision::Exclude { estimated_tokens: want, limit: want - 1 }
        );
    }

    #[test]
    fn mock_cycles_reference_words_to_the_budget() {
        let bundle = assemble_prompt(
            0,
            "prefix words",
            &["a b c".into(), "d e".into()],
            7,
            TemplateId::DefaultV1,
        );
        let out = generate(&GenerationBackend::mock(), &bundle).unwrap();
        assert_eq!(out, "a b c d e a b");
        let again = generate(&GenerationBackend::mock(), &bundle).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn mock_without_references_reverses_the_prefix() {
        let bundle = assemble_prompt(0, "one two three", &[], 10, TemplateId::DefaultV1);
        let out = generate(&GenerationBackend::mock(), &bundle).unwrap();
        assert_eq!(out, "three two one");
    }

    #[test]
    fn mock_with_nothing_to_say_is_an_error() {
        let bundle = assemble_prompt(0, "", &[], 10, TemplateId::DefaultV1);
        assert!(matches!(
            generate(&GenerationBackend::mock(), &bundle),
            Err(Error::Backend(_))
        ));
    }

    fn record(target: u32, strategy: &str, output: Option<&str>) -> GenerationRecord {
        GenerationRecord {
            target,
            strategy: strategy.into(),
            backend: "mock".into(),
            prompt: "p".into(),
            prefix: "a b".into(),
            reference: Some("c d".into()),
            output: output.map(str::to_owned),
            excluded: output.is_none(),
            exclusion_reason: output.is_none().then(|| "backend_error".into()),
        }
    }

    #[test]
    fn store_roundtrips_and_later_lines_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        {
            let mut store = RecordStore::open(&path).unwrap();
            assert!(store.is_empty(), "missing file is an empty store");
            store.insert(record(1, "none", Some("v1"))).unwrap();
            store.insert(record(2, "none", Some("x"))).unwrap();
            store.insert(record(1, "none", Some("v2"))).unwrap();
        }
        let raw = std::fs::read_to_string(&path).unwrap();
        assert_eq!(raw.lines().count(), 3, "append-only file keeps both versions");
        let store = RecordStore::open(&path).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(
            store.get("1|none|mock").unwrap().output.as_deref(),
            Some("v2"),
            "later line wins"
        );
        store.compact().unwrap();
        let raw = std::fs::read_to_string(&path).unwrap();
        assert_eq!(raw.lines().count(), 2, "compaction drops shadowed lines");
        let reopened = RecordStore::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);
    }

    #[test]
    fn record_key_and_strategy_name() {
        let r = record(5, "topo:k=3:offset=0", Some("out"));
        assert_eq!(r.key(), "5|topo:k=3:offset=0|mock");
        assert_eq!(r.strategy_name(), "topo");
    }

    fn community_graph() -> TextAttributedGraph {
        let mut b = TextAttributedGraph::builder();
        let themes = [
            "solar panels and inverters convert sunlight into usable power for the grid",
            "sourdough bread needs patient fermentation and a lively starter culture",
            "alpine hiking routes reward early starts with quiet trails and long views",
        ];
        for c in 0..3u32 {
            for i in 0..5u32 {
                b.add_node(&format!("{} item {i}", themes[c as usize]));
            }
        }
        for c in 0..3u32 {
            let base = c * 5;
            for i in 0..5 {
                for j in (i + 1)..5 {
                    b.add_edge(base + i, base + j);
                }
            }
        }
        b.add_edge(0, 5);
        b.add_edge(5, 10);
        b.build().unwrap()
    }

    fn run_setup(
        store: &mut RecordStore,
        plan: &RetrievalPlan,
        sample_size: usize,
    ) -> Vec<GenerationRecord> {
        let g = community_graph();
        let split = split_nodes(&g, SplitStrategy::Random, 0.4, 3, 11).unwrap();
        let pruned = g.remove_partial_partial_edges(&split).unwrap();
        let emb = proximity_embeddings(&pruned, &DiffusionConfig::uniform(3, 16, 1)).unwrap();
        let idx = TopKIndex::from_embedding(&emb, &split.full_ids, 8).unwrap();
        let ctx = RetrievalContext {
            graph: &g,
            pool: &split.full_ids,
            index: Some(&idx),
            text_emb: None,
            provider: None,
        };
        let cfg = ExperimentConfig {
            sample_size,
            seed: 5,
            word_budget: 20,
            context_limit: 4000,
            template: TemplateId::DefaultV1,
        };
        run_experiment(&split, plan, &ctx, &GenerationBackend::mock(), &cfg, store).unwrap()
    }

    #[test]
    fn experiment_is_deterministic_and_ordered() {
        let plan = RetrievalPlan::new(Strategy::Topo, 2);
        let mut s1 = RecordStore::in_memory();
        let mut s2 = RecordStore::in_memory();
        let a = run_setup(&mut s1, &plan, 5);
        let b = run_setup(&mut s2, &plan, 5);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.windows(2).all(|w| w[0].target < w[1].target));
        for r in &a {
            if !r.excluded {
                assert!(r.output.as_deref().is_some_and(|o| !o.is_empty()));
                assert!(r.reference.is_some());
                assert!(r.prompt.contains("Text to continue:"));
            }
        }
    }

    #[test]
    fn experiment_resumes_from_the_store() {
        let plan = RetrievalPlan::new(Strategy::Topo, 2);
        let mut full_store = RecordStore::in_memory();
        let full = run_setup(&mut full_store, &plan, 6);

        // drop half the records and re-run: only the missing half is
        // regenerated, and the results agree exactly
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        {
            let mut partial = RecordStore::open(&path).unwrap();
            for r in full.iter().take(3) {
                partial.insert(r.clone()).unwrap();
            }
        }
        let mut resumed_store = RecordStore::open(&path).unwrap();
        assert_eq!(resumed_store.len(), 3);
        let resumed = run_setup(&mut resumed_store, &plan, 6);
        assert_eq!(resumed, full);
        assert_eq!(resumed_store.len(), 6);
    }

    #[test]
    fn experiment_rejects_oversize_samples() {
        let plan = RetrievalPlan::new(Strategy::None, 2);
        let mut store = RecordStore::in_memory();
        let g = community_graph();
        let split = split_nodes(&g, SplitStrategy::Random, 0.4, 3, 11).unwrap();
        let ctx = RetrievalContext {
            graph: &g,
            pool: &split.full_ids,
            index: None,
            text_emb: None,
            provider: None,
        };
        let cfg = ExperimentConfig {
            sample_size: 100,
            seed: 5,
            word_budget: 20,
            context_limit: 4000,
            template: TemplateId::DefaultV1,
        };
        assert!(matches!(
            run_experiment(&split, &plan, &ctx, &GenerationBackend::mock(), &cfg, &mut store),
            Err(Error::SampleTooLarge { requested: 100, .. })
        ));
    }

    #[test]
    fn over_long_contexts_become_excluded_records() {
        let plan = RetrievalPlan::new(Strategy::Topo, 2);
        let g = community_graph();
        let split = split_nodes(&g, SplitStrategy::Random, 0.4, 3, 11).unwrap();
        let emb = proximity_embeddings(&g, &DiffusionConfig::uniform(3, 16, 1)).unwrap();
        let idx = TopKIndex::from_embedding(&emb, &split.full_ids, 8).unwrap();
        let ctx = RetrievalContext {
            graph: &g,
            pool: &split.full_ids,
            index: Some(&idx),
            text_emb: None,
            provider: None,
        };
        let cfg = ExperimentConfig {
            sample_size: 4,
            seed: 5,
            word_budget: 20,
            context_limit: 10, // far below any real prompt
            template: TemplateId::DefaultV1,
        };
        let mut store = RecordStore::in_memory();
        let records =
            run_experiment(&split, &plan, &ctx, &GenerationBackend::mock(), &cfg, &mut store)
                .unwrap();
        assert!(records.iter().all(|r| r.excluded));
        assert!(records
            .iter()
            .all(|r| r.exclusion_reason.as_deref() == Some("context_limit")));
        assert!(records.iter().all(|r| r.output.is_none()));
    }

    #[test]
    fn short_prefix_targets_become_excluded_records() {
        let mut b = TextAttributedGraph::builder();
        for i in 0..6 {
            // two-word texts cannot produce a 3-word prefix plus suffix
            b.add_node(&format!("short {i}"));
        }
        for i in 1..6 {
            b.add_edge(i - 1, i);
        }
        let g = b.build().unwrap();
        let split = split_nodes(&g, SplitStrategy::Random, 0.5, 3, 1).unwrap();
        assert_eq!(split.excluded, split.partial_ids, "every partial text is short");
        let plan = RetrievalPlan::new(Strategy::None, 1);
        let ctx = RetrievalContext {
            graph: &g,
            pool: &split.full_ids,
            index: None,
            text_emb: None,
            provider: None,
        };
        let cfg = ExperimentConfig {
            sample_size: split.partial_ids.len(),
            seed: 0,
            word_budget: 10,
            context_limit: 1000,
            template: TemplateId::DefaultV1,
        };
        let mut store = RecordStore::in_memory();
        let records =
            run_experiment(&split, &plan, &ctx, &GenerationBackend::mock(), &cfg, &mut store)
                .unwrap();
        assert!(records
            .iter()
            .all(|r| r.excluded && r.exclusion_reason.as_deref() == Some("short_text")));
    }
}

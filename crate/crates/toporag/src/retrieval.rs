//! Top-K retrieval: persisted neighbour indexes and retrieval strategies.
//!
//! A [`TopKIndex`] stores, for every node, its `k` best-scoring candidates
//! from a fixed pool, sorted by descending score with ascending-id
//! tie-breaks. Building costs one pass over node-candidate combinations;
//! queries are slice lookups. The index carries the fingerprint of the
//! embedding it was built from so downstream stages can refuse stale
//! pairings.
//!
//! [`retrieve`] implements the strategies used in generation experiments:
//! nothing, seeded random context, textual similarity to the query prefix,
//! and topological neighbours from an index, optionally shifted to a lower
//! rank window. [`two_stage_retrieve`] handles mailbox-style graphs: first
//! find structurally similar nodes for the two endpoints, then pick their
//! textually closest attached documents.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::TextAttributedGraph;
use crate::role;
use crate::text_embed::{node_texts, EmbeddingProvider, TextSubset};

/// Per-node top-K candidate lists with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKIndex {
    k: usize,
    kind: EmbeddingKind,
    fingerprint: String,
    entries: Vec<Vec<(u32, f64)>>,
}

/// Keep-best-k heap entry: the heap's top is the worst kept candidate.
#[derive(PartialEq)]
struct Worst {
    score: f64,
    id: u32,
}

impl Eq for Worst {}

impl Ord for Worst {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match self.score.total_cmp(&other.score) {
            std::cmp::Ordering::Less => std::cmp::Ordering::Greater,
            std::cmp::Ordering::Greater => std::cmp::Ordering::Less,
            std::cmp::Ordering::Equal => self.id.cmp(&other.id),
        }
    }
}

impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Build per-node lists of the `k` best pool candidates under `score`.
///
/// Lists never contain the node itself; order is descending score, then
/// ascending id. Nodes short on candidates get shorter lists. Scores must be
/// finite.
pub fn build_index<F: Fn(u32, u32) -> f64>(
    n: usize,
    pool: &[u32],
    k: usize,
    kind: EmbeddingKind,
    fingerprint: &str,
    score: F,
) -> Result<TopKIndex> {
    if k == 0 {
        return Err(Error::InvalidConfig("index k must be >= 1".into()));
    }
    for &p in pool {
        if p as usize >= n {
            return Err(Error::InvalidNodeId { id: p, count: n });
        }
    }
    let mut entries = Vec::with_capacity(n);
    for i in 0..n as u32 {
        let mut heap = std::collections::BinaryHeap::with_capacity(k + 1);
        for &j in pool {
            if j == i {
                continue;
            }
            let s = score(i, j);
            if !s.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("index score for pair ({i}, {j})"),
                });
            }
            heap.push(Worst { score: s, id: j });
            if heap.len() > k {
                heap.pop();
            }
        }
        // ascending by worseness = best first
        let list: Vec<(u32, f64)> = heap
            .into_sorted_vec()
            .into_iter()
            .map(|w| (w.id, w.score))
            .collect();
        entries.push(list);
    }
    Ok(TopKIndex {
        k,
        kind,
        fingerprint: fingerprint.to_owned(),
        entries,
    })
}

/// Score function an embedding kind induces: reciprocal L2 distance for role
/// embeddings, cosine for everything else.
pub fn embedding_score(emb: &EmbeddingMatrix, i: u32, j: u32) -> f64 {
    if emb.kind() == EmbeddingKind::Role {
        role::role_similarity(emb, i, j).expect("ids validated by caller")
    } else {
        cosine(
            emb.row(i).expect("id validated by caller"),
            emb.row(j).expect("id validated by caller"),
        )
    }
}

impl TopKIndex {
    /// Build from an embedding, scoring by [`embedding_score`]; the index
    /// inherits the embedding's fingerprint.
    pub fn from_embedding(emb: &EmbeddingMatrix, pool: &[u32], k: usize) -> Result<TopKIndex> {
        for &p in pool {
            if p as usize >= emb.n() {
                return Err(Error::InvalidNodeId {
                    id: p,
                    count: emb.n(),
                });
            }
        }
        build_index(emb.n(), pool, k, emb.kind(), emb.fingerprint(), |i, j| {
            embedding_score(emb, i, j)
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn node_count(&self) -> usize {
        self.entries.len()
    }

    /// The node's candidate list, best first.
    pub fn query(&self, node: u32) -> Result<&[(u32, f64)]> {
        let i = node as usize;
        if i >= self.entries.len() {
            return Err(Error::InvalidNodeId {
                id: node,
                count: self.entries.len(),
            });
        }
        Ok(&self.entries[i])
    }

    /// Write as JSON lines: a header object, then one `{"id", "nn"}` object
    /// per node.
    pub fn save(&self, path: &Path) -> Result<()> {
        let p = path.display().to_string();
        let file = File::create(path).map_err(|e| Error::io(&p, e))?;
        let mut w = BufWriter::new(file);
        let header = IndexHeader {
            k: self.k,
            kind: self.kind,
            fingerprint: self.fingerprint.clone(),
        };
        let line = serde_json::to_string(&header).map_err(|e| Error::json(&p, e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(&p, e))?;
        for (id, nn) in self.entries.iter().enumerate() {
            let line = serde_json::to_string(&IndexLine {
                id: id as u32,
                nn: nn.clone(),
            })
            .map_err(|e| Error::json(&p, e))?;
            writeln!(w, "{line}").map_err(|e| Error::io(&p, e))?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TopKIndex> {
        let p = path.display().to_string();
        let corrupt = |message: String| Error::CorruptIndex {
            path: p.clone(),
            message,
        };
        let file = File::open(path).map_err(|e| Error::io(&p, e))?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| corrupt("empty file".into()))?
            .map_err(|e| Error::io(&p, e))?;
        let header: IndexHeader = serde_json::from_str(&header_line)
            .map_err(|e| corrupt(format!("bad header: {e}")))?;
        let mut entries = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::io(&p, e))?;
            let parsed: IndexLine = serde_json::from_str(&line)
                .map_err(|e| corrupt(format!("line {}: {e}", entries.len() + 2)))?;
            if parsed.id as usize != entries.len() {
                return Err(corrupt(format!(
                    "expected id {} in order, got {}",
                    entries.len(),
                    parsed.id
                )));
            }
            if parsed.nn.len() > header.k {
                return Err(corrupt(format!(
                    "node {} has {} neighbours, k is {}",
                    parsed.id,
                    parsed.nn.len(),
                    header.k
                )));
            }
            entries.push(parsed.nn);
        }
        Ok(TopKIndex {
            k: header.k,
            kind: header.kind,
            fingerprint: header.fingerprint,
            entries,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    k: usize,
    kind: EmbeddingKind,
    fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct IndexLine {
    id: u32,
    nn: Vec<(u32, f64)>,
}

/// How context texts are chosen for a generation target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// No retrieval at all.
    None,
    /// Seeded uniform picks from the pool.
    Random,
    /// Closest pool texts to the query prefix, by text embedding cosine.
    Text,
    /// Neighbours from a topological index.
    Topo,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Strategy> {
        match s {
            "none" => Ok(Strategy::None),
            "random" => Ok(Strategy::Random),
            "text" => Ok(Strategy::Text),
            "topo" => Ok(Strategy::Topo),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy {other:?} (expected none|random|text|topo)"
            ))),
        }
    }
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Random => "random",
            Strategy::Text => "text",
            Strategy::Topo => "topo",
        }
    }
}

/// Fully specified retrieval behaviour.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalPlan {
    pub strategy: Strategy,
    /// Context size.
    pub k: usize,
    /// Skip the best `rank_offset` candidates first (ranked strategies only).
    pub rank_offset: usize,
    /// Seed for the random strategy.
    pub seed: u64,
}

impl RetrievalPlan {
    pub fn new(strategy: Strategy, k: usize) -> RetrievalPlan {
        RetrievalPlan {
            strategy,
            k,
            rank_offset: 0,
            seed: 0,
        }
    }

    /// Stable string identifying this plan; used to key stored records.
    pub fn key(&self) -> String {
        match self.strategy {
            Strategy::None => "none".into(),
            Strategy::Random => format!("random:k={}:seed={}", self.k, self.seed),
            Strategy::Text => format!("text:k={}:offset={}", self.k, self.rank_offset),
            Strategy::Topo => format!("topo:k={}:offset={}", self.k, self.rank_offset),
        }
    }
}

/// One retrieved context text.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrieved {
    pub node: u32,
    /// Retrieval score where the strategy has one.
    pub score: Option<f64>,
    pub text: String,
}

/// Everything [`retrieve`] may need; unused parts can stay `None`.
pub struct RetrievalContext<'a> {
    pub graph: &'a TextAttributedGraph,
    /// Candidate pool, normally the full-text node ids.
    pub pool: &'a [u32],
    pub index: Option<&'a TopKIndex>,
    pub text_emb: Option<&'a EmbeddingMatrix>,
    pub provider: Option<&'a EmbeddingProvider>,
}

/// Retrieve context texts for `target` according to `plan`.
///
/// The random strategy derives an independent stream per target from the
/// plan seed, so records stay reproducible no matter which subset of targets
/// a run processes. Ranked strategies (text, topo) honour `rank_offset`;
/// asking for a window past the end of the ranking is an error.
pub fn retrieve(
    plan: &RetrievalPlan,
    target: u32,
    ctx: &RetrievalContext<'_>,
    prefix: &str,
) -> Result<Vec<Retrieved>> {
    if plan.strategy == Strategy::None {
        return Ok(Vec::new());
    }
    if plan.k == 0 {
        return Err(Error::InvalidConfig("retrieval k must be >= 1".into()));
    }
    ctx.graph.text(target)?;
    match plan.strategy {
        Strategy::None => unreachable!("handled above"),
        Strategy::Random => {
            let pool: Vec<u32> = ctx.pool.iter().copied().filter(|&j| j != target).collect();
            if pool.len() < plan.k {
                return Err(Error::PoolTooSmall {
                    available: pool.len(),
                    k: plan.k,
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            rng.set_stream(target as u64);
            let mut picks: Vec<u32> = index_sample(&mut rng, pool.len(), plan.k)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            picks.sort_unstable();
            picks
                .into_iter()
                .map(|node| {
                    Ok(Retrieved {
                        node,
                        score: None,
                        text: ctx.graph.text(node)?.to_owned(),
                    })
                })
                .collect()
        }
        Strategy::Text => {
            let emb = ctx.text_emb.ok_or_else(|| {
                Error::InvalidConfig("text retrieval needs a text embedding".into())
            })?;
            let provider = ctx.provider.ok_or_else(|| {
                Error::InvalidConfig("text retrieval needs an embedding provider".into())
            })?;
            let query = provider.embed_texts(&[prefix])?.matrix;
            let mut scored: Vec<(u32, f64)> = Vec::with_capacity(ctx.pool.len());
            for &j in ctx.pool {
                if j == target {
                    continue;
                }
                scored.push((j, cosine(query.row(0), emb.row(j)?)));
            }
            ranked_window(scored, plan, ctx.graph)
        }
        Strategy::Topo => {
            let index = ctx.index.ok_or_else(|| {
                Error::InvalidConfig("topological retrieval needs an index".into())
            })?;
            let list = index.query(target)?;
            let end = plan.rank_offset + plan.k;
            if end > list.len() {
                return Err(Error::RankWindow {
                    offset: plan.rank_offset,
                    end,
                    len: list.len(),
                });
            }
            list[plan.rank_offset..end]
                .iter()
                .map(|&(node, score)| {
                    Ok(Retrieved {
                        node,
                        score: Some(score),
                        text: ctx.graph.text(node)?.to_owned(),
                    })
                })
                .collect()
        }
    }
}

fn ranked_window(
    mut scored: Vec<(u32, f64)>,
    plan: &RetrievalPlan,
    graph: &TextAttributedGraph,
) -> Result<Vec<Retrieved>> {
    let end = plan.rank_offset + plan.k;
    if end > scored.len() {
        return Err(Error::RankWindow {
            offset: plan.rank_offset,
            end,
            len: scored.len(),
        });
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored[plan.rank_offset..end]
        .iter()
        .map(|&(node, score)| {
            Ok(Retrieved {
                node,
                score: Some(score),
                text: graph.text(node)?.to_owned(),
            })
        })
        .collect()
}

/// One document picked by [`two_stage_retrieve`].
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedDocument {
    /// Node the document belongs to.
    pub owner: u32,
    /// Position in the owner's document list.
    pub doc_index: usize,
    pub score: f64,
    pub text: String,
}

/// Result of the two-stage mailbox retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageRetrieval {
    pub items: Vec<RetrievedDocument>,
    /// True when stage one found nobody or the found nodes own no documents.
    pub pool_empty: bool,
}

/// Mailbox retrieval in two stages: find the structurally most similar node
/// for each endpoint via `index`, pool every document those nodes own, then
/// keep the `k` documents textually closest to `prefix`.
///
/// An empty pool is not an error; it is flagged so callers can fall back.
pub fn two_stage_retrieve(
    graph: &TextAttributedGraph,
    sender: u32,
    receiver: u32,
    prefix: &str,
    index: &TopKIndex,
    k: usize,
    provider: &EmbeddingProvider,
) -> Result<TwoStageRetrieval> {
    if k == 0 {
        return Err(Error::InvalidConfig("retrieval k must be >= 1".into()));
    }
    graph.text(sender)?;
    graph.text(receiver)?;
    let mut picked: Vec<u32> = Vec::new();
    for endpoint in [sender, receiver] {
        if let Some(&(top, _)) = index.query(endpoint)?.first() {
            if !picked.contains(&top) {
                picked.push(top);
            }
        }
    }
    let mut docs: Vec<(u32, usize, String)> = Vec::new();
    for &owner in &picked {
        for (doc_index, text) in node_texts(graph, owner, TextSubset::All)?
            .into_iter()
            .enumerate()
        {
            if !text.is_empty() {
                docs.push((owner, doc_index, text));
            }
        }
    }
    if docs.is_empty() {
        return Ok(TwoStageRetrieval {
            items: Vec::new(),
            pool_empty: true,
        });
    }
    let mut texts: Vec<&str> = vec![prefix];
    texts.extend(docs.iter().map(|(_, _, t)| t.as_str()));
    let embedded = provider.embed_texts(&texts)?.matrix;
    let query = embedded.row(0);
    let mut scored: Vec<(usize, f64)> = docs
        .iter()
        .enumerate()
        .map(|(i, _)| (i, cosine(query, embedded.row(i + 1))))
        .collect();
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| docs[a.0].0.cmp(&docs[b.0].0))
            .then_with(|| docs[a.0].1.cmp(&docs[b.0].1))
    });
    let items = scored
        .into_iter()
        .take(k)
        .map(|(i, score)| {
            let (owner, doc_index, ref text) = docs[i];
            RetrievedDocument {
                owner,
                doc_index,
                score,
                text: text.clone(),
            }
        })
        .collect();
    Ok(TwoStageRetrieval {
        items,
        pool_empty: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TextDirection;
    use crate::proximity::{proximity_embeddings, DiffusionConfig};
    use rand::Rng;

    fn word_graph(texts: &[&str], edges: &[(u32, u32)]) -> TextAttributedGraph {
        let mut b = TextAttributedGraph::builder();
        for t in texts {
            b.add_node(t);
        }
        for &(a, c) in edges {
            b.add_edge(a, c);
        }
        b.build().unwrap()
    }

    /// Exhaustive reference: sort the whole pool per node.
    fn full_sort_index<F: Fn(u32, u32) -> f64>(
        n: usize,
        pool: &[u32],
        k: usize,
        score: F,
    ) -> Vec<Vec<(u32, f64)>> {
        (0..n as u32)
            .map(|i| {
                let mut all: Vec<(u32, f64)> = pool
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (j, score(i, j)))
                    .collect();
                all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                all.truncate(k);
                all
            })
            .collect()
    }

    #[test]
    fn index_matches_full_sort_reference() {
        let n = 25;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut table = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..n {
                table[i][j] = (rng.gen::<f64>() * 8.0).round() / 8.0; // coarse grid forces ties
            }
        }
        let score = |i: u32, j: u32| table[i as usize][j as usize];
        let pool: Vec<u32> = (0..n as u32).step_by(2).collect();
        for k in [1, 3, 7, 64] {
            let idx = build_index(n, &pool, k, EmbeddingKind::Proximity, "fp", score).unwrap();
            let want = full_sort_index(n, &pool, k, score);
            for i in 0..n as u32 {
                assert_eq!(
                    idx.query(i).unwrap(),
                    want[i as usize].as_slice(),
                    "node {i}, k {k}"
                );
            }
        }
    }

    #[test]
    fn ties_rank_lower_ids_first() {
        let idx = build_index(5, &[0, 1, 2, 3, 4], 3, EmbeddingKind::Text, "fp", |_, _| 0.5)
            .unwrap();
        assert_eq!(idx.query(4).unwrap(), &[(0, 0.5), (1, 0.5), (2, 0.5)]);
        assert_eq!(idx.query(0).unwrap(), &[(1, 0.5), (2, 0.5), (3, 0.5)]);
    }

    #[test]
    fn short_pools_give_short_lists() {
        let idx = build_index(4, &[0, 1], 10, EmbeddingKind::Text, "fp", |i, j| {
            (i + j) as f64
        })
        .unwrap();
        assert_eq!(idx.query(0).unwrap().len(), 1, "self excluded");
        assert_eq!(idx.query(3).unwrap().len(), 2);
    }

    #[test]
    fn index_rejects_bad_input() {
        assert!(build_index(3, &[7], 2, EmbeddingKind::Text, "fp", |_, _| 0.0).is_err());
        assert!(build_index(3, &[0], 0, EmbeddingKind::Text, "fp", |_, _| 0.0).is_err());
        assert!(
            build_index(3, &[0, 1], 2, EmbeddingKind::Text, "fp", |_, _| f64::NAN).is_err()
        );
        let idx = build_index(3, &[0, 1], 2, EmbeddingKind::Text, "fp", |_, _| 1.0).unwrap();
        assert!(idx.query(9).is_err());
    }

    #[test]
    fn save_load_roundtrip_is_byte_identical() {
        let g = word_graph(
            &["alpha text", "beta text", "gamma text", "delta text"],
            &[(0, 1), (1, 2), (2, 3)],
        );
        let emb = proximity_embeddings(&g, &DiffusionConfig::uniform(2, 8, 1)).unwrap();
        let idx = TopKIndex::from_embedding(&emb, &[0, 1, 2, 3], 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.jsonl");
        let p2 = dir.path().join("b.jsonl");
        idx.save(&p1).unwrap();
        let back = TopKIndex::load(&p1).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.fingerprint(), emb.fingerprint());
        back.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let text = std::fs::read_to_string(&p1).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.contains("\"k\":2") && first.contains("\"kind\":\"proximity\""));
    }

    #[test]
    fn load_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("idx.jsonl");
        std::fs::write(&p, "not json\n").unwrap();
        assert!(matches!(
            TopKIndex::load(&p),
            Err(Error::CorruptIndex { .. })
        ));
        std::fs::write(
            &p,
            "{\"k\":2,\"kind\":\"text\",\"fingerprint\":\"f\"}\n{\"id\":1,\"nn\":[]}\n",
        )
        .unwrap();
        assert!(matches!(
            TopKIndex::load(&p),
            Err(Error::CorruptIndex { .. })
        ));
    }

    fn plain_ctx<'a>(
        graph: &'a TextAttributedGraph,
        pool: &'a [u32],
    ) -> RetrievalContext<'a> {
        RetrievalContext {
            graph,
            pool,
            index: None,
            text_emb: None,
            provider: None,
        }
    }

    #[test]
    fn none_strategy_returns_nothing() {
        let g = word_graph(&["a b c", "d e f"], &[(0, 1)]);
        let plan = RetrievalPlan::new(Strategy::None, 3);
        let got = retrieve(&plan, 0, &plain_ctx(&g, &[1]), "a").unwrap();
        assert!(got.is_empty());
        assert_eq!(plan.key(), "none");
    }

    #[test]
    fn random_strategy_is_per_target_deterministic() {
        let texts: Vec<String> = (0..12).map(|i| format!("document {i} body")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let g = word_graph(&refs, &[(0, 1)]);
        let pool: Vec<u32> = (0..10).collect();
        let mut plan = RetrievalPlan::new(Strategy::Random, 3);
        plan.seed = 7;
        let ctx = plain_ctx(&g, &pool);
        let a = retrieve(&plan, 11, &ctx, "").unwrap();
        let b = retrieve(&plan, 11, &ctx, "").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|r| r.node != 11 && r.score.is_none()));
        assert!(a.windows(2).all(|w| w[0].node < w[1].node));
        let other_target = retrieve(&plan, 10, &ctx, "").unwrap();
        let other_seed = {
            let mut p2 = plan.clone();
            p2.seed = 8;
            retrieve(&p2, 11, &ctx, "").unwrap()
        };
        // independent streams: either a different target or a different seed
        // may collide occasionally, but not both here
        assert!(a != other_target || a != other_seed);
        for r in &a {
            assert_eq!(r.text, g.text(r.node).unwrap());
        }
    }

    #[test]
    fn random_strategy_needs_a_big_enough_pool() {
        let g = word_graph(&["a", "b", "c"], &[(0, 1)]);
        let mut plan = RetrievalPlan::new(Strategy::Random, 3);
        plan.seed = 1;
        let pool = [0u32, 1];
        assert!(matches!(
            retrieve(&plan, 0, &plain_ctx(&g, &pool), ""),
            Err(Error::PoolTooSmall { available: 1, k: 3 })
        ));
    }

    #[test]
    fn text_strategy_ranks_by_prefix_similarity() {
        let g = word_graph(
            &[
                "the solar panel inverter hums quietly",
                "completely unrelated cooking recipe with basil",
                "solar panel efficiency depends on the inverter",
                "another cooking text about pasta and basil leaves",
            ],
            &[(0, 1), (1, 2), (2, 3)],
        );
        let provider = EmbeddingProvider::fallback(64, 0);
        let emb =
            crate::text_embed::graph_text_embeddings(&provider, &g, TextSubset::All).unwrap();
        let pool = [1u32, 2, 3];
        let ctx = RetrievalContext {
            graph: &g,
            pool: &pool,
            index: None,
            text_emb: Some(&emb),
            provider: Some(&provider),
        };
        let plan = RetrievalPlan::new(Strategy::Text, 1);
        let got = retrieve(&plan, 0, &ctx, "the solar panel inverter").unwrap();
        assert_eq!(got[0].node, 2, "solar text outranks cooking texts");
        assert!(got[0].score.unwrap() > 0.0);

        // shifting the window by one drops the best hit
        let mut shifted = plan.clone();
        shifted.rank_offset = 1;
        let second = retrieve(&shifted, 0, &ctx, "the solar panel inverter").unwrap();
        assert_ne!(second[0].node, 2);

        let mut wide = plan.clone();
        wide.k = 2;
        let both = retrieve(&wide, 0, &ctx, "the solar panel inverter").unwrap();
        assert_eq!(both[1], second[0], "offset window matches the wider tail");

        let mut too_far = plan.clone();
        too_far.rank_offset = 3;
        assert!(matches!(
            retrieve(&too_far, 0, &ctx, "query"),
            Err(Error::RankWindow { .. })
        ));
    }

    #[test]
    fn topo_strategy_walks_the_index_window() {
        let texts: Vec<String> = (0..6).map(|i| format!("node {i} text body")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let g = word_graph(&refs, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        let emb = proximity_embeddings(&g, &DiffusionConfig::uniform(3, 16, 2)).unwrap();
        let pool: Vec<u32> = (0..6).collect();
        let idx = TopKIndex::from_embedding(&emb, &pool, 5).unwrap();
        let ctx = RetrievalContext {
            graph: &g,
            pool: &pool,
            index: Some(&idx),
            text_emb: None,
            provider: None,
        };
        let plan = RetrievalPlan::new(Strategy::Topo, 2);
        let got = retrieve(&plan, 0, &ctx, "").unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(
            (got[0].node, got[0].score.unwrap()),
            idx.query(0).unwrap()[0]
        );
        // window [offset, offset+k) equals the tail of a wider window
        let mut shifted = plan.clone();
        shifted.rank_offset = 2;
        let tail = retrieve(&shifted, 0, &ctx, "").unwrap();
        let mut wide = plan.clone();
        wide.k = 4;
        let wide_got = retrieve(&wide, 0, &ctx, "").unwrap();
        assert_eq!(&wide_got[2..], tail.as_slice());
        let mut off_end = plan.clone();
        off_end.rank_offset = 4;
        assert!(matches!(
            retrieve(&off_end, 0, &ctx, ""),
            Err(Error::RankWindow { offset: 4, end: 6, len: 5 })
        ));
    }

    fn mailbox_graph() -> TextAttributedGraph {
        let mut b = TextAttributedGraph::builder();
        let a = b.add_node("employee alpha");
        let c = b.add_node("employee beta");
        let d = b.add_node("employee gamma");
        let e = b.add_node("employee delta");
        b.add_extra_text(d, "budget meeting moved to thursday", Some(TextDirection::Sent));
        b.add_extra_text(d, "the budget numbers need another pass", Some(TextDirection::Received));
        b.add_extra_text(e, "offsite logistics and travel plans", Some(TextDirection::Sent));
        b.add_edge(a, c);
        b.add_edge(a, d);
        b.add_edge(c, e);
        b.build().unwrap()
    }

    #[test]
    fn two_stage_pools_documents_of_stage_one_winners() {
        let g = mailbox_graph();
        let provider = EmbeddingProvider::fallback(64, 0);
        // force stage one: alpha's closest is gamma (2), beta's is delta (3)
        let table = [
            [0.0, 0.1, 0.9, 0.2],
            [0.1, 0.0, 0.2, 0.9],
            [0.9, 0.2, 0.0, 0.1],
            [0.2, 0.9, 0.1, 0.0],
        ];
        let idx = build_index(4, &[0, 1, 2, 3], 3, EmbeddingKind::Role, "fp", |i, j| {
            table[i as usize][j as usize]
        })
        .unwrap();
        let got = two_stage_retrieve(&g, 0, 1, "budget numbers for the meeting", &idx, 2, &provider)
            .unwrap();
        assert!(!got.pool_empty);
        assert_eq!(got.items.len(), 2);
        for item in &got.items {
            assert!(
                item.owner == 2 || item.owner == 3,
                "documents come from stage-one winners, got owner {}",
                item.owner
            );
        }
        assert!(
            got.items[0].text.contains("budget"),
            "budget mail outranks travel mail for a budget query"
        );
        assert!(got.items[0].score >= got.items[1].score);
    }

    #[test]
    fn two_stage_flags_an_empty_pool() {
        // the stage-one winner owns no documents and has no text of its own
        let mut b = TextAttributedGraph::builder();
        b.add_node("sender");
        b.add_node("receiver");
        b.add_node("");
        b.add_edge(0, 1);
        b.add_edge(1, 2);
        let g = b.build().unwrap();
        let idx = build_index(3, &[2], 1, EmbeddingKind::Role, "fp", |_, _| 1.0).unwrap();
        let provider = EmbeddingProvider::fallback(16, 0);
        let got = two_stage_retrieve(&g, 0, 1, "query", &idx, 2, &provider).unwrap();
        assert!(got.pool_empty);
        assert!(got.items.is_empty());
    }
}

//! Graph store: text-attributed graphs, dataset loading, splits, edge
//! surgery, and subgraph sampling.
//!
//! A [`TextAttributedGraph`] is an undirected simple graph over contiguous
//! `u32` node ids. Every node carries a text (whitespace-normalized on
//! ingest), an optional categorical label, an optional timestamp, and an
//! optional list of extra tagged texts for datasets where one node owns many
//! documents (e.g. a mailbox). The adjacency is stored symmetric and hollow;
//! neighbour lists are sorted ascending.
//!
//! On-disk dataset format:
//! - nodes: JSON lines `{"id": int, "text": str, "label": str|int|null,
//!   "timestamp": int|null, "extra_texts": [...]}` where only `id` and
//!   `text` are required;
//! - edges: one `src<TAB>dst` pair of original node ids per line.
//!
//! Loading re-indexes nodes to `0..N` in ascending original-id order and can
//! drop nodes below a minimum text length; a re-index map records the
//! old-to-new assignment whenever ids move.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Collapse runs of whitespace to single spaces and trim the ends.
///
/// Applied to every text on ingest so that prefix/suffix splits reconstruct
/// the stored text exactly by joining with a single space.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Direction tag for extra texts on multi-document nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextDirection {
    Sent,
    Received,
}

/// One extra document attached to a node, with an optional direction tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedText {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<TextDirection>,
}

/// Sparse row-major matrix with sorted column indices per row.
///
/// Used for the row-normalized adjacency; multiplication iterates rows in
/// order and accumulates in stored index order, so results are bit-stable.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row `(col, value)` lists; each list must be sorted by
    /// column and free of duplicates.
    pub fn from_sorted_rows(cols: usize, rows: Vec<Vec<(u32, f64)>>) -> CsrMatrix {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in &rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for &(c, v) in row {
                debug_assert!((c as usize) < cols);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    /// Dense product `self * b`. Panics if inner dimensions disagree.
    pub fn mul_dense(&self, b: &ndarray::Array2<f64>) -> ndarray::Array2<f64> {
        assert_eq!(self.cols, b.nrows(), "csr * dense inner dimension");
        let d = b.ncols();
        let mut out = ndarray::Array2::<f64>::zeros((self.rows, d));
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let mut out_row = out.row_mut(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let b_row = b.row(c as usize);
                for j in 0..d {
                    out_row[j] += v * b_row[j];
                }
            }
        }
        out
    }

    /// Stable digest over shape and contents, for fingerprinting.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.rows as u64).to_le_bytes());
        h.update((self.cols as u64).to_le_bytes());
        for &p in &self.indptr {
            h.update((p as u64).to_le_bytes());
        }
        for &c in &self.indices {
            h.update(c.to_le_bytes());
        }
        for &v in &self.values {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Undirected text-attributed graph with contiguous `u32` node ids.
#[derive(Debug, Clone)]
pub struct TextAttributedGraph {
    texts: Vec<String>,
    labels: Vec<Option<String>>,
    timestamps: Vec<Option<i64>>,
    text_missing: Vec<bool>,
    extra_texts: Vec<Vec<TaggedText>>,
    /// Canonical edge list: `a < b`, sorted, deduplicated.
    edges: Vec<(u32, u32)>,
    adj_indptr: Vec<usize>,
    adj_indices: Vec<u32>,
}

impl TextAttributedGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn node_count(&self) -> usize {
        self.texts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical undirected edge list: `a < b`, ascending.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    fn check_id(&self, id: u32) -> Result<usize> {
        let i = id as usize;
        if i >= self.node_count() {
            return Err(Error::InvalidNodeId {
                id,
                count: self.node_count(),
            });
        }
        Ok(i)
    }

    pub fn text(&self, id: u32) -> Result<&str> {
        Ok(&self.texts[self.check_id(id)?])
    }

    pub fn label(&self, id: u32) -> Result<Option<&str>> {
        Ok(self.labels[self.check_id(id)?].as_deref())
    }

    pub fn timestamp(&self, id: u32) -> Result<Option<i64>> {
        Ok(self.timestamps[self.check_id(id)?])
    }

    /// True when the node was ingested without usable text.
    pub fn text_missing(&self, id: u32) -> Result<bool> {
        Ok(self.text_missing[self.check_id(id)?])
    }

    /// Extra documents attached to the node (empty for single-text datasets).
    pub fn extra_texts(&self, id: u32) -> Result<&[TaggedText]> {
        Ok(&self.extra_texts[self.check_id(id)?])
    }

    /// Neighbour ids, sorted ascending.
    pub fn neighbors(&self, id: u32) -> Result<&[u32]> {
        let i = self.check_id(id)?;
        Ok(&self.adj_indices[self.adj_indptr[i]..self.adj_indptr[i + 1]])
    }

    pub fn degree(&self, id: u32) -> Result<usize> {
        Ok(self.neighbors(id)?.len())
    }

    /// Row-normalized adjacency `D^{-1} A`; rows of isolated nodes are empty.
    pub fn normalized_adjacency(&self) -> CsrMatrix {
        let n = self.node_count();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let nbrs = &self.adj_indices[self.adj_indptr[i]..self.adj_indptr[i + 1]];
            let deg = nbrs.len();
            if deg == 0 {
                rows.push(Vec::new());
            } else {
                let w = 1.0 / deg as f64;
                rows.push(nbrs.iter().map(|&j| (j, w)).collect());
            }
        }
        CsrMatrix::from_sorted_rows(n, rows)
    }

    /// Digest over node count and edge structure only.
    pub fn structure_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.node_count() as u64).to_le_bytes());
        for &(a, b) in &self.edges {
            h.update(a.to_le_bytes());
            h.update(b.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Digest over structure plus all texts and labels.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.structure_hash().as_bytes());
        for t in &self.texts {
            h.update((t.len() as u64).to_le_bytes());
            h.update(t.as_bytes());
        }
        for l in &self.labels {
            match l {
                Some(s) => {
                    h.update([1u8]);
                    h.update(s.as_bytes());
                }
                None => h.update([0u8]),
            }
        }
        for extras in &self.extra_texts {
            h.update((extras.len() as u64).to_le_bytes());
            for e in extras {
                h.update((e.text.len() as u64).to_le_bytes());
                h.update(e.text.as_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Breadth-first connectivity check (isolated-node-free single component).
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0u32]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u).expect("id in range") {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    /// Clone with every edge joining two partial nodes removed.
    ///
    /// Used before building retrieval structures so that held-out nodes never
    /// leak information to each other through direct links.
    pub fn remove_partial_partial_edges(&self, split: &SplitAssignment) -> Result<TextAttributedGraph> {
        let n = self.node_count();
        let mut partial = vec![false; n];
        for &id in &split.partial_ids {
            let i = self.check_id(id)?;
            partial[i] = true;
        }
        let kept: Vec<(u32, u32)> = self
            .edges
            .iter()
            .copied()
            .filter(|&(a, b)| !(partial[a as usize] && partial[b as usize]))
            .collect();
        Ok(Self::from_parts(
            self.texts.clone(),
            self.labels.clone(),
            self.timestamps.clone(),
            self.text_missing.clone(),
            self.extra_texts.clone(),
            kept,
        ))
    }

    /// Frontier sampling: grow a connected node set from a seeded start node,
    /// picking uniformly among the current boundary, then return the induced
    /// subgraph re-packed to contiguous ids (ascending original id) together
    /// with the new-to-old id map.
    ///
    /// Errors if `target` exceeds the node count or the start component is
    /// exhausted first.
    pub fn sample_subgraph(&self, target: usize, seed: u64) -> Result<SubgraphSample> {
        let n = self.node_count();
        if target == 0 || target > n {
            return Err(Error::SampleTooLarge {
                requested: target,
                available: n,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = rng.gen_range(0..n) as u32;
        let mut visited = BTreeSet::new();
        let mut boundary = BTreeSet::new();
        visited.insert(start);
        for &v in self.neighbors(start)? {
            boundary.insert(v);
        }
        while visited.len() < target {
            if boundary.is_empty() {
                return Err(Error::SampleTooLarge {
                    requested: target,
                    available: visited.len(),
                });
            }
            let pick_idx = rng.gen_range(0..boundary.len());
            let &pick = boundary.iter().nth(pick_idx).expect("index in range");
            boundary.remove(&pick);
            visited.insert(pick);
            for &v in self.neighbors(pick)? {
                if !visited.contains(&v) {
                    boundary.insert(v);
                }
            }
        }
        let node_map: Vec<u32> = visited.into_iter().collect();
        let mut new_id = BTreeMap::new();
        for (new, &old) in node_map.iter().enumerate() {
            new_id.insert(old, new as u32);
        }
        let mut edges = Vec::new();
        for &(a, b) in &self.edges {
            if let (Some(&na), Some(&nb)) = (new_id.get(&a), new_id.get(&b)) {
                edges.push((na, nb));
            }
        }
        let texts = node_map.iter().map(|&o| self.texts[o as usize].clone()).collect();
        let labels = node_map.iter().map(|&o| self.labels[o as usize].clone()).collect();
        let timestamps = node_map.iter().map(|&o| self.timestamps[o as usize]).collect();
        let missing = node_map.iter().map(|&o| self.text_missing[o as usize]).collect();
        let extra = node_map
            .iter()
            .map(|&o| self.extra_texts[o as usize].clone())
            .collect();
        Ok(SubgraphSample {
            graph: Self::from_parts(texts, labels, timestamps, missing, extra, edges),
            node_map,
        })
    }

    fn from_parts(
        texts: Vec<String>,
        labels: Vec<Option<String>>,
        timestamps: Vec<Option<i64>>,
        text_missing: Vec<bool>,
        extra_texts: Vec<Vec<TaggedText>>,
        mut edges: Vec<(u32, u32)>,
    ) -> TextAttributedGraph {
        let n = texts.len();
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges.retain(|&(a, b)| a != b);
        let mut neighbor_sets: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(a, b) in &edges {
            neighbor_sets[a as usize].push(b);
            neighbor_sets[b as usize].push(a);
        }
        let mut adj_indptr = Vec::with_capacity(n + 1);
        let mut adj_indices = Vec::with_capacity(edges.len() * 2);
        adj_indptr.push(0);
        for mut nbrs in neighbor_sets {
            nbrs.sort_unstable();
            adj_indices.extend_from_slice(&nbrs);
            adj_indptr.push(adj_indices.len());
        }
        TextAttributedGraph {
            texts,
            labels,
            timestamps,
            text_missing,
            extra_texts,
            edges,
            adj_indptr,
            adj_indices,
        }
    }
}

/// Result of [`TextAttributedGraph::sample_subgraph`].
#[derive(Debug, Clone)]
pub struct SubgraphSample {
    pub graph: TextAttributedGraph,
    /// `node_map[new_id] = old_id`, ascending.
    pub node_map: Vec<u32>,
}

/// Incremental construction of a [`TextAttributedGraph`].
///
/// Texts are whitespace-normalized; edges are deduplicated and self loops
/// dropped at `build` time.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    texts: Vec<String>,
    labels: Vec<Option<String>>,
    timestamps: Vec<Option<i64>>,
    extra_texts: Vec<Vec<TaggedText>>,
    edges: Vec<(u32, u32)>,
}

impl GraphBuilder {
    /// Append a node and return its id.
    pub fn add_node(&mut self, text: &str) -> u32 {
        self.add_node_full(text, None, None)
    }

    pub fn add_node_full(&mut self, text: &str, label: Option<&str>, timestamp: Option<i64>) -> u32 {
        let id = self.texts.len() as u32;
        self.texts.push(normalize_text(text));
        self.labels.push(label.map(str::to_owned));
        self.timestamps.push(timestamp);
        self.extra_texts.push(Vec::new());
        id
    }

    pub fn add_extra_text(&mut self, node: u32, text: &str, direction: Option<TextDirection>) {
        self.extra_texts[node as usize].push(TaggedText {
            text: normalize_text(text),
            direction,
        });
    }

    pub fn add_edge(&mut self, a: u32, b: u32) {
        self.edges.push((a, b));
    }

    pub fn build(self) -> Result<TextAttributedGraph> {
        let n = self.texts.len();
        for &(a, b) in &self.edges {
            for id in [a, b] {
                if id as usize >= n {
                    return Err(Error::InvalidNodeId { id, count: n });
                }
            }
        }
        let text_missing = self.texts.iter().map(|t| t.is_empty()).collect();
        Ok(TextAttributedGraph::from_parts(
            self.texts,
            self.labels,
            self.timestamps,
            text_missing,
            self.extra_texts,
            self.edges,
        ))
    }
}

#[derive(Debug, Deserialize)]
struct NodeLine {
    id: u64,
    #[serde(default)]
    text: String,
    #[serde(default)]
    label: Option<serde_json::Value>,
    #[serde(default)]
    timestamp: Option<i64>,
    #[serde(default)]
    extra_texts: Option<Vec<ExtraTextLine>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ExtraTextLine {
    Plain(String),
    Tagged { text: String, direction: Option<TextDirection> },
}

#[derive(Debug, Serialize)]
struct NodeLineOut<'a> {
    id: u64,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<i64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    extra_texts: Vec<&'a TaggedText>,
}

fn label_to_string(v: serde_json::Value, path: &str, line: usize) -> Result<Option<String>> {
    match v {
        serde_json::Value::Null => Ok(None),
        serde_json::Value::String(s) => Ok(Some(s)),
        serde_json::Value::Number(n) => Ok(Some(n.to_string())),
        other => Err(Error::MalformedRecord {
            path: path.to_owned(),
            line,
            message: format!("label must be string, integer or null, got {other}"),
        }),
    }
}

/// Outcome of [`load_graph`]: the re-indexed graph plus bookkeeping.
#[derive(Debug)]
pub struct LoadedGraph {
    pub graph: TextAttributedGraph,
    /// `(original id, new id)` pairs, ascending by original id.
    pub reindex: Vec<(u64, u32)>,
    /// Nodes dropped for having fewer than `min_text_words` words.
    pub dropped_nodes: usize,
    /// Edges dropped because an endpoint was filtered out or `src == dst`.
    pub dropped_edges: usize,
}

/// Load a dataset from a nodes JSONL file and a tab-separated edge file.
///
/// Nodes are re-indexed to `0..N` in ascending original-id order. Nodes whose
/// normalized text has fewer than `min_text_words` words are dropped along
/// with their incident edges. Edge endpoints that never appear in the nodes
/// file are an error; endpoints dropped by the word filter silently remove
/// the edge. With `min_text_words == 0` empty-text nodes are kept and flagged
/// as missing text.
pub fn load_graph(
    nodes_path: &Path,
    edges_path: &Path,
    min_text_words: usize,
) -> Result<LoadedGraph> {
    let npath = nodes_path.display().to_string();
    let file = File::open(nodes_path).map_err(|e| Error::io(&npath, e))?;
    let reader = BufReader::new(file);
    let mut by_id: BTreeMap<u64, (String, Option<String>, Option<i64>, Vec<TaggedText>)> =
        BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(&npath, e))?;
        let parsed: NodeLine = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: npath.clone(),
            line: lineno,
            message: e.to_string(),
        })?;
        if by_id.contains_key(&parsed.id) {
            return Err(Error::DuplicateNode {
                path: npath.clone(),
                line: lineno,
                id: parsed.id,
            });
        }
        let label = match parsed.label {
            Some(v) => label_to_string(v, &npath, lineno)?,
            None => None,
        };
        let extras = parsed
            .extra_texts
            .unwrap_or_default()
            .into_iter()
            .map(|e| match e {
                ExtraTextLine::Plain(text) => TaggedText {
                    text: normalize_text(&text),
                    direction: None,
                },
                ExtraTextLine::Tagged { text, direction } => TaggedText {
                    text: normalize_text(&text),
                    direction,
                },
            })
            .collect();
        by_id.insert(
            parsed.id,
            (normalize_text(&parsed.text), label, parsed.timestamp, extras),
        );
    }

    let total_nodes = by_id.len();
    let mut reindex = Vec::new();
    let mut texts = Vec::new();
    let mut labels = Vec::new();
    let mut timestamps = Vec::new();
    let mut text_missing = Vec::new();
    let mut extra_texts = Vec::new();
    let mut known_ids = BTreeSet::new();
    for (old_id, (text, label, ts, extras)) in by_id {
        known_ids.insert(old_id);
        let words = if text.is_empty() { 0 } else { text.split(' ').count() };
        if words < min_text_words {
            continue;
        }
        let new_id = texts.len() as u32;
        reindex.push((old_id, new_id));
        text_missing.push(text.is_empty());
        texts.push(text);
        labels.push(label);
        timestamps.push(ts);
        extra_texts.push(extras);
    }
    let dropped_nodes = total_nodes - texts.len();
    let kept: BTreeMap<u64, u32> = reindex.iter().copied().collect();

    let epath = edges_path.display().to_string();
    let file = File::open(edges_path).map_err(|e| Error::io(&epath, e))?;
    let reader = BufReader::new(file);
    let mut edges = Vec::new();
    let mut dropped_edges = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(&epath, e))?;
        let mut parts = line.split('\t');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::MalformedRecord {
                    path: epath.clone(),
                    line: lineno,
                    message: format!("expected src<TAB>dst, got {line:?}"),
                })
            }
        };
        let parse = |s: &str| -> Result<u64> {
            s.trim().parse::<u64>().map_err(|_| Error::MalformedRecord {
                path: epath.clone(),
                line: lineno,
                message: format!("invalid node id {s:?}"),
            })
        };
        let (a, b) = (parse(a)?, parse(b)?);
        for id in [a, b] {
            if !known_ids.contains(&id) {
                return Err(Error::DanglingEndpoint {
                    path: epath.clone(),
                    line: lineno,
                    id,
                });
            }
        }
        match (kept.get(&a), kept.get(&b)) {
            (Some(&na), Some(&nb)) if na != nb => edges.push((na, nb)),
            _ => dropped_edges += 1,
        }
    }

    let graph = TextAttributedGraph::from_parts(
        texts,
        labels,
        timestamps,
        text_missing,
        extra_texts,
        edges,
    );
    Ok(LoadedGraph {
        graph,
        reindex,
        dropped_nodes,
        dropped_edges,
    })
}

/// Write a graph back out in the on-disk dataset format (ids as-is).
pub fn write_dataset(
    graph: &TextAttributedGraph,
    nodes_path: &Path,
    edges_path: &Path,
) -> Result<()> {
    let npath = nodes_path.display().to_string();
    let file = File::create(nodes_path).map_err(|e| Error::io(&npath, e))?;
    let mut w = BufWriter::new(file);
    for id in 0..graph.node_count() as u32 {
        let rec = NodeLineOut {
            id: id as u64,
            text: graph.text(id)?,
            label: graph.label(id)?,
            timestamp: graph.timestamp(id)?,
            extra_texts: graph.extra_texts(id)?.iter().collect(),
        };
        let line = serde_json::to_string(&rec).map_err(|e| Error::json(&npath, e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(&npath, e))?;
    }
    w.flush().map_err(|e| Error::io(&npath, e))?;

    let epath = edges_path.display().to_string();
    let file = File::create(edges_path).map_err(|e| Error::io(&epath, e))?;
    let mut w = BufWriter::new(file);
    for &(a, b) in graph.edges() {
        writeln!(w, "{a}\t{b}").map_err(|e| Error::io(&epath, e))?;
    }
    w.flush().map_err(|e| Error::io(&epath, e))?;
    Ok(())
}

/// Write the old-to-new id map produced by [`load_graph`] as JSON lines.
pub fn write_reindex_map(reindex: &[(u64, u32)], path: &Path) -> Result<()> {
    let p = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&p, e))?;
    let mut w = BufWriter::new(file);
    for &(old, new) in reindex {
        writeln!(w, "{{\"old\":{old},\"new\":{new}}}").map_err(|e| Error::io(&p, e))?;
    }
    w.flush().map_err(|e| Error::io(&p, e))?;
    Ok(())
}

/// How partial nodes are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitStrategy {
    /// Seeded uniform choice without replacement.
    Random,
    /// Most recent timestamps first (ties broken by ascending id).
    Time,
}

/// Prefix/suffix decomposition of one partial node's text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialText {
    /// First `starting_words` words.
    pub prefix: String,
    /// Remainder; joining `prefix + " " + suffix` restores the stored text.
    pub suffix: String,
}

/// Assignment of every node to the full-text or partial-text side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub strategy: SplitStrategy,
    pub fraction: f64,
    pub starting_words: usize,
    pub seed: u64,
    /// Nodes whose whole text stays observable, ascending.
    pub full_ids: Vec<u32>,
    /// Held-out nodes, ascending.
    pub partial_ids: Vec<u32>,
    /// Partial nodes without enough words to leave a non-empty suffix; they
    /// stay in `partial_ids` but get no prefix entry.
    pub excluded: Vec<u32>,
    pub prefixes: BTreeMap<u32, PartialText>,
}

impl SplitAssignment {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let p = path.display().to_string();
        let file = File::create(path).map_err(|e| Error::io(&p, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::json(&p, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(&p, e))?;
        w.flush().map_err(|e| Error::io(&p, e))?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<SplitAssignment> {
        let p = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(&p, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(&p, e))
    }
}

/// Partition nodes into full-text and partial-text sets and decompose every
/// partial node's text into a `starting_words`-word prefix and the suffix.
///
/// `ceil(fraction * N)` nodes become partial. Partial nodes whose text has no
/// word beyond the prefix are recorded in `excluded` and receive no prefix
/// entry.
pub fn split_nodes(
    graph: &TextAttributedGraph,
    strategy: SplitStrategy,
    fraction: f64,
    starting_words: usize,
    seed: u64,
) -> Result<SplitAssignment> {
    let n = graph.node_count();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if starting_words == 0 {
        return Err(Error::InvalidConfig(
            "starting_words must be at least 1".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("cannot split an empty graph".into()));
    }
    let m = (fraction * n as f64).ceil() as usize;
    if m >= n {
        return Err(Error::InvalidConfig(format!(
            "partial fraction {fraction} leaves no full-text node"
        )));
    }

    let mut partial_ids: Vec<u32> = match strategy {
        SplitStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index_sample(&mut rng, n, m).iter().map(|i| i as u32).collect()
        }
        SplitStrategy::Time => {
            let missing = (0..n as u32)
                .filter(|&i| graph.timestamp(i).expect("id in range").is_none())
                .count();
            if missing > 0 {
                return Err(Error::TimestampsMissing { missing });
            }
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_by_key(|&i| {
                let ts = graph.timestamp(i).expect("id in range").expect("checked");
                (std::cmp::Reverse(ts), i)
            });
            order.truncate(m);
            order
        }
    };
    partial_ids.sort_unstable();
    let partial_set: BTreeSet<u32> = partial_ids.iter().copied().collect();
    let full_ids: Vec<u32> = (0..n as u32).filter(|i| !partial_set.contains(i)).collect();

    let mut prefixes = BTreeMap::new();
    let mut excluded = Vec::new();
    for &id in &partial_ids {
        let text = graph.text(id)?;
        let words: Vec<&str> = if text.is_empty() {
            Vec::new()
        } else {
            text.split(' ').collect()
        };
        if words.len() <= starting_words {
            excluded.push(id);
            continue;
        }
        let prefix = words[..starting_words].join(" ");
        let suffix = words[starting_words..].join(" ");
        prefixes.insert(id, PartialText { prefix, suffix });
    }

    Ok(SplitAssignment {
        strategy,
        fraction,
        starting_words,
        seed,
        full_ids,
        partial_ids,
        excluded,
        prefixes,
    })
}

/// Render loader bookkeeping as a one-line summary for logs.
pub fn load_summary(loaded: &LoadedGraph) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "nodes={} edges={} dropped_nodes={} dropped_edges={}",
        loaded.graph.node_count(),
        loaded.graph.edge_count(),
        loaded.dropped_nodes,
        loaded.dropped_edges
    );
    s
}

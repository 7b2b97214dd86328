//! Small deterministic graphs for examples, tests, and smoke runs.
//!
//! Everything here is seeded or fully hand-built, so downstream artifacts
//! (embeddings, indexes, generation records) are byte-stable across runs.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{write_dataset, TextAttributedGraph, TextDirection};

const THEME_WORDS: [&[&str]; 3] = [
    &[
        "solar", "panels", "convert", "sunlight", "into", "power", "while", "inverters",
        "balance", "the", "grid", "and", "batteries", "store", "surplus", "energy", "for",
        "cloudy", "afternoons",
    ],
    &[
        "sourdough", "bread", "rises", "slowly", "when", "the", "starter", "culture", "is",
        "lively", "and", "bakers", "fold", "dough", "between", "long", "patient", "rests",
        "overnight",
    ],
    &[
        "alpine", "trails", "reward", "early", "starts", "with", "quiet", "ridges", "and",
        "hikers", "carry", "water", "past", "larch", "forests", "toward", "granite", "summits",
        "above",
    ],
];

const THEME_LABELS: [&str; 3] = ["solar", "bakery", "alpine"];

fn themed_text(theme: usize, variant: usize, words: usize) -> String {
    let pool = THEME_WORDS[theme % THEME_WORDS.len()];
    // stride 3 is coprime with the 19-word pools, so variants differ
    (0..words)
        .map(|w| pool[(variant + 3 * w) % pool.len()])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Thirty nodes in three themed communities of ten, with labels, strictly
/// increasing timestamps, dense intra-community edges, and three bridges.
///
/// Texts are 18 to 22 words, enough for prefix/suffix splits, and each
/// community draws from its own vocabulary so text similarity tracks
/// community membership.
pub fn mini_graph() -> TextAttributedGraph {
    let mut b = TextAttributedGraph::builder();
    for c in 0..3usize {
        for i in 0..10usize {
            let text = themed_text(c, i, 18 + (i % 5));
            b.add_node_full(&text, Some(THEME_LABELS[c]), Some(1_000 + (c * 10 + i) as i64 * 10));
        }
    }
    for c in 0..3u32 {
        let base = c * 10;
        for i in 0..10 {
            b.add_edge(base + i, base + (i + 1) % 10);
        }
        // chords off the ring give the communities internal structure
        for i in (0..10).step_by(2) {
            b.add_edge(base + i, base + (i + 3) % 10);
        }
        b.add_edge(base, base + 5);
    }
    b.add_edge(0, 10);
    b.add_edge(10, 20);
    b.add_edge(5, 25);
    b.build().expect("mini graph is statically valid")
}

/// Write [`mini_graph`] in the on-disk dataset format; returns
/// (nodes path, edges path).
pub fn write_mini_dataset(dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let nodes = dir.join("nodes.jsonl");
    let edges = dir.join("edges.tsv");
    write_dataset(&mini_graph(), &nodes, &edges)?;
    Ok((nodes, edges))
}

/// Planted-partition graph: `blocks` groups of `per_block` nodes, a ring
/// inside each block (so no node is isolated), then independent edges with
/// probability `p_in` inside a block and `p_out` across blocks.
///
/// Nodes are labeled `block0`, `block1`, ... and carry short block-specific
/// synthetic texts.
pub fn planted_partition(
    blocks: usize,
    per_block: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<TextAttributedGraph> {
    if blocks == 0 || per_block < 3 {
        return Err(Error::InvalidConfig(
            "planted partition needs >= 1 block of >= 3 nodes".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Error::InvalidConfig(
            "edge probabilities must lie in [0, 1]".into(),
        ));
    }
    let mut b = TextAttributedGraph::builder();
    let n = blocks * per_block;
    for v in 0..n {
        let blk = v / per_block;
        let text: String = (0..10)
            .map(|k| format!("topic{blk} term{}", (v + 3 * k) % 12))
            .collect::<Vec<_>>()
            .join(" ");
        b.add_node_full(&text, Some(&format!("block{blk}")), None);
    }
    for blk in 0..blocks {
        let base = (blk * per_block) as u32;
        for i in 0..per_block as u32 {
            b.add_edge(base + i, base + (i + 1) % per_block as u32);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n as u32 {
        for j in (i + 1)..n as u32 {
            let same = (i as usize / per_block) == (j as usize / per_block);
            let p = if same { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                b.add_edge(i, j);
            }
        }
    }
    b.build()
}

/// Block-separable node features: label `block{b}` gets mean `3·e_b` plus
/// `noise`-scaled standard normal jitter. Requires every node labeled and
/// `dim` at least the number of distinct labels.
pub fn block_features(
    graph: &TextAttributedGraph,
    dim: usize,
    noise: f64,
    seed: u64,
) -> Result<Array2<f64>> {
    let n = graph.node_count();
    let mut labels: Vec<&str> = Vec::with_capacity(n);
    let mut classes: Vec<&str> = Vec::new();
    for v in 0..n as u32 {
        let Some(label) = graph.label(v)? else {
            return Err(Error::InvalidConfig(format!(
                "block features need a label on every node; node {v} has none"
            )));
        };
        if !classes.contains(&label) {
            classes.push(label);
        }
        labels.push(label);
    }
    classes.sort();
    if dim < classes.len() {
        return Err(Error::InvalidConfig(format!(
            "feature dimension {dim} is below the class count {}",
            classes.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::<f64>::zeros((n, dim));
    for v in 0..n {
        let blk = classes.iter().position(|c| *c == labels[v]).unwrap();
        for d in 0..dim {
            let jitter: f64 = rng.sample(StandardNormal);
            x[[v, d]] = noise * jitter + if d == blk { 3.0 } else { 0.0 };
        }
    }
    Ok(x)
}

/// Eight-person correspondence graph where every node carries tagged sent
/// and received messages on top of a short bio, for the document-level
/// two-stage retrieval path.
pub fn email_mini() -> TextAttributedGraph {
    let people = [
        "ana coordinates the rooftop solar retrofit and tracks permits",
        "ben maintains the inverter firmware and the monitoring dashboards",
        "cora audits energy yields and writes the quarterly grid reports",
        "dev schedules install crews and orders mounting hardware",
        "eli researches battery chemistry for the storage pilot",
        "fay handles community outreach and the open house evenings",
        "gus negotiates utility interconnection agreements",
        "hana reviews safety compliance for every site visit",
    ];
    let mut b = TextAttributedGraph::builder();
    for bio in people {
        b.add_node(bio);
    }
    let mail: [(u32, u32, &str); 12] = [
        (0, 1, "permit packet approved, please flash the new inverter firmware before thursday"),
        (1, 0, "firmware flashed on both test units, dashboards show stable output curves"),
        (0, 3, "crew availability needed for the north block retrofit next month"),
        (3, 0, "two crews free after the tenth, mounting hardware already ordered"),
        (2, 0, "quarterly yield report drafted, rooftop arrays beat the forecast"),
        (4, 1, "battery pilot cells arrived, need telemetry hooks in the dashboard"),
        (5, 6, "open house drew eighty neighbours, utility questions keep coming up"),
        (6, 5, "interconnection agreement redlines are back, outreach talking points attached"),
        (7, 3, "site visit flagged two unsecured rails, hold installs until fixed"),
        (3, 7, "rails re-torqued and photographed, requesting re-inspection"),
        (2, 5, "yield summary attached for the open house slides, happy to present"),
        (5, 2, "neighbours loved the yield charts, forwarding their follow up questions"),
    ];
    for &(from, to, text) in &mail {
        b.add_extra_text(from, text, Some(TextDirection::Sent));
        b.add_extra_text(to, text, Some(TextDirection::Received));
        b.add_edge(from, to);
    }
    b.build().expect("email graph is statically valid")
}

//! Build a top-K retrieval index over an embedding, query it, and round-trip
//! it through its on-disk format.

use toporag::error::Result;
use toporag::fixture::mini_graph;
use toporag::graph::{split_nodes, SplitStrategy};
use toporag::proximity::{proximity_embeddings, DiffusionConfig};
use toporag::retrieval::TopKIndex;

fn main() -> Result<()> {
    let g = mini_graph();
    let split = split_nodes(&g, SplitStrategy::Random, 0.2, 10, 7)?;
    let emb = proximity_embeddings(&g, &DiffusionConfig::uniform(3, 64, 0))?;

    // candidate lists come from the full-text pool only
    let index = TopKIndex::from_embedding(&emb, &split.full_ids, 5)?;
    println!(
        "index over {} candidates, k = {}, fingerprint {}",
        split.full_ids.len(),
        index.k(),
        &index.fingerprint()[..12]
    );

    for target in [0u32, 12, 25] {
        println!("\ntop-5 for node {target} (community {}):", target / 10);
        for &(node, score) in index.query(target)? {
            println!("  node {node:>2} (community {}) score {score:+.4}", node / 10);
        }
    }

    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("index.jsonl");
    index.save(&path)?;
    let reloaded = TopKIndex::load(&path)?;
    assert_eq!(reloaded.query(0)?, index.query(0)?);
    println!("\nsaved and reloaded: fingerprint {}", &reloaded.fingerprint()[..12]);
    Ok(())
}

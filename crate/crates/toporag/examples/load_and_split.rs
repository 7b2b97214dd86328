//! Load a node/edge dataset, split nodes into full-text and partial-text
//! sets, and prune the edges that would leak between partial nodes.

use toporag::error::Result;
use toporag::fixture::write_mini_dataset;
use toporag::graph::{load_graph, load_summary, split_nodes, SplitStrategy};

fn main() -> Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let (nodes, edges) = write_mini_dataset(dir.path())?;
    let loaded = load_graph(&nodes, &edges, 0)?;
    println!("{}", load_summary(&loaded));

    let split = split_nodes(&loaded.graph, SplitStrategy::Random, 0.2, 10, 7)?;
    println!(
        "split: {} full, {} partial, {} excluded",
        split.full_ids.len(),
        split.partial_ids.len(),
        split.excluded.len()
    );
    let (&id, sample) = split.prefixes.iter().next().expect("at least one prefix");
    println!("node {id} keeps {:?}", sample.prefix);
    println!("node {id} holds out {:?}", sample.suffix);

    let pruned = loaded.graph.remove_partial_partial_edges(&split)?;
    println!(
        "pruned partial-partial edges: {} -> {}",
        loaded.graph.edges().len(),
        pruned.edges().len()
    );
    Ok(())
}

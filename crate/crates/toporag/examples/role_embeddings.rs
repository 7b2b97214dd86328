//! Spectral role embeddings: nodes with the same structural position get the
//! same vector even when they sit far apart in the graph.

use toporag::error::Result;
use toporag::graph::TextAttributedGraph;
use toporag::role::{role_distance, role_embeddings, scale_sweep, WaveConfig};

/// Two identical stars joined by a bridge: the hubs share a role, the leaves
/// share a role, and the bridge node has one of its own.
fn double_star() -> TextAttributedGraph {
    let mut b = TextAttributedGraph::builder();
    for i in 0..11 {
        b.add_node(&format!("node {i}"));
    }
    for leaf in 1..=4 {
        b.add_edge(0, leaf);
        b.add_edge(5, 5 + leaf);
    }
    b.add_edge(0, 10);
    b.add_edge(5, 10);
    b.build().expect("static graph")
}

fn main() -> Result<()> {
    let g = double_star();
    let config = WaveConfig::default();
    let emb = role_embeddings(&g, &config)?;

    println!("hub 0 vs hub 5:    distance {:.6}", role_distance(&emb, 0, 5)?);
    println!("leaf 1 vs leaf 6:  distance {:.6}", role_distance(&emb, 1, 6)?);
    println!("hub 0 vs leaf 1:   distance {:.6}", role_distance(&emb, 0, 1)?);
    println!("hub 0 vs bridge:   distance {:.6}", role_distance(&emb, 0, 10)?);

    // the kernel scale controls how far structure is compared
    println!("\nscale sweep, hub vs leaf:");
    for (scale, e) in scale_sweep(&g, &[0.1, 1.0, 10.0], &config)? {
        println!("  scale {scale:>4}: distance {:.6}", role_distance(&e, 0, 1)?);
    }
    Ok(())
}

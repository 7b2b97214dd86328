//! Diffusion proximity embeddings: nearby nodes get similar vectors, and a
//! random projection keeps the dimension fixed regardless of graph size.

use toporag::error::Result;
use toporag::fixture::mini_graph;
use toporag::proximity::{proximity_embeddings, proximity_similarity, DiffusionConfig};

fn main() -> Result<()> {
    let g = mini_graph();
    let config = DiffusionConfig::uniform(3, 64, 0);
    let emb = proximity_embeddings(&g, &config)?;
    println!(
        "{} nodes embedded in {} dimensions (depth {}, fingerprint {})",
        emb.n(),
        emb.dim(),
        config.depth,
        &emb.fingerprint()[..12]
    );

    // nodes 0..10, 10..20, 20..30 form three communities
    println!("\nwithin community 0:");
    for j in [1u32, 2, 5] {
        println!("  sim(0, {j}) = {:+.4}", proximity_similarity(&emb, 0, j)?);
    }
    println!("across communities:");
    for j in [10u32, 20, 25] {
        println!("  sim(0, {j}) = {:+.4}", proximity_similarity(&emb, 0, j)?);
    }

    // deeper diffusion smooths similarities toward the community level
    for depth in 1..=3 {
        let e = proximity_embeddings(&g, &DiffusionConfig::uniform(depth, 64, 0))?;
        println!(
            "depth {depth}: sim(0, 5) = {:+.4}",
            proximity_similarity(&e, 0, 5)?
        );
    }
    Ok(())
}

//! Text embeddings through the provider contract. The deterministic fallback
//! needs no network; swap in `EmbeddingProvider::remote` for a real service.

use toporag::error::Result;
use toporag::fixture::mini_graph;
use toporag::text_embed::{graph_text_embeddings, text_similarity, EmbeddingProvider, TextSubset};

fn main() -> Result<()> {
    let g = mini_graph();
    let provider = EmbeddingProvider::fallback(128, 0);
    println!(
        "provider: {} ({}-dimensional, cache {})",
        provider.model,
        provider.dimension,
        if provider.cache_dir.is_some() { "on" } else { "off" }
    );

    let emb = graph_text_embeddings(&provider, &g, TextSubset::All)?;
    println!("embedded {} node texts, fingerprint {}", emb.n(), &emb.fingerprint()[..12]);

    // communities 0..10, 10..20, 20..30 use distinct vocabularies
    println!("\nsame community:   sim(0, 3)  = {:+.4}", text_similarity(&emb, 0, 3)?);
    println!("same community:   sim(12, 17) = {:+.4}", text_similarity(&emb, 12, 17)?);
    println!("cross community:  sim(0, 12)  = {:+.4}", text_similarity(&emb, 0, 12)?);
    println!("cross community:  sim(3, 24)  = {:+.4}", text_similarity(&emb, 3, 24)?);

    // raw text batches work too, outside any graph
    let free = provider.embed_texts(&["grid tied inverter", "sourdough starter", ""])?;
    println!("\nfree-text batch: {} rows, empty rows at {:?}", free.matrix.nrows(), free.empty_rows);
    Ok(())
}

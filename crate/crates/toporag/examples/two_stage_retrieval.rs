//! Document-level retrieval for mailbox graphs: stage one finds structurally
//! similar people, stage two ranks their messages by textual closeness.

use toporag::error::Result;
use toporag::fixture::email_mini;
use toporag::retrieval::{two_stage_retrieve, TopKIndex};
use toporag::role::{role_embeddings, WaveConfig};
use toporag::text_embed::EmbeddingProvider;

fn main() -> Result<()> {
    let g = email_mini();
    let roles = role_embeddings(&g, &WaveConfig::default())?;
    let pool: Vec<u32> = (0..g.node_count() as u32).collect();
    let index = TopKIndex::from_embedding(&roles, &pool, 3)?;
    let provider = EmbeddingProvider::fallback(128, 0);

    // predict what flows between the retrofit lead (0) and the firmware
    // maintainer (1) given a message opening
    let prefix = "inverter firmware rollout is";
    let got = two_stage_retrieve(&g, 0, 1, prefix, &index, 3, &provider)?;
    println!("prefix: {prefix:?}");
    if got.pool_empty {
        println!("stage-one pool was empty; fall back to another strategy");
        return Ok(());
    }
    for item in &got.items {
        println!(
            "  node {} doc {} score {:+.4}: {}",
            item.owner, item.doc_index, item.score, item.text
        );
    }
    Ok(())
}

//! Retrieval-augmented generation over a graph: pick context via the
//! proximity index, assemble a prompt, and let the backend continue the
//! held-out text. The mock backend is deterministic; swap in
//! `GenerationBackend::remote` for a real model.

use toporag::error::Result;
use toporag::fixture::mini_graph;
use toporag::generation::{
    run_experiment, ExperimentConfig, GenerationBackend, RecordStore, TemplateId,
};
use toporag::graph::{split_nodes, SplitStrategy};
use toporag::proximity::{proximity_embeddings, DiffusionConfig};
use toporag::retrieval::{RetrievalContext, RetrievalPlan, Strategy, TopKIndex};

fn main() -> Result<()> {
    let g = mini_graph();
    let split = split_nodes(&g, SplitStrategy::Random, 0.2, 10, 7)?;
    let pruned = g.remove_partial_partial_edges(&split)?;

    let emb = proximity_embeddings(&pruned, &DiffusionConfig::uniform(3, 64, 0))?;
    let index = TopKIndex::from_embedding(&emb, &split.full_ids, 8)?;

    let plan = RetrievalPlan::new(Strategy::Topo, 2);
    let ctx = RetrievalContext {
        graph: &pruned,
        pool: &split.full_ids,
        index: Some(&index),
        text_emb: None,
        provider: None,
    };
    let backend = GenerationBackend::mock();
    let cfg = ExperimentConfig {
        sample_size: 3,
        seed: 1,
        word_budget: 25,
        context_limit: 4096,
        template: TemplateId::DefaultV1,
    };
    let mut store = RecordStore::in_memory();
    let records = run_experiment(&split, &plan, &ctx, &backend, &cfg, &mut store)?;

    for r in records.iter().filter(|r| !r.excluded) {
        println!("=== node {} (strategy {}) ===", r.target, r.strategy);
        println!("prompt:\n{}", r.prompt);
        println!("generated: {}", r.output.as_deref().unwrap_or(""));
        println!("held out:  {}\n", r.reference.as_deref().unwrap_or(""));
    }
    println!("{} records stored", store.len());
    Ok(())
}

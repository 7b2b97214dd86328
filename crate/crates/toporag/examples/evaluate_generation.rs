//! Score generated continuations against their held-out references with
//! BLEU-4, ROUGE-L, and embedding F1, comparing retrieval strategies.

use toporag::error::Result;
use toporag::evaluation::score_records;
use toporag::fixture::mini_graph;
use toporag::generation::{
    run_experiment, ExperimentConfig, GenerationBackend, RecordStore, TemplateId,
};
use toporag::graph::{split_nodes, SplitStrategy};
use toporag::proximity::{proximity_embeddings, DiffusionConfig};
use toporag::retrieval::{RetrievalContext, RetrievalPlan, Strategy, TopKIndex};
use toporag::text_embed::EmbeddingProvider;

fn main() -> Result<()> {
    let g = mini_graph();
    let split = split_nodes(&g, SplitStrategy::Random, 0.2, 10, 7)?;
    let pruned = g.remove_partial_partial_edges(&split)?;
    let emb = proximity_embeddings(&pruned, &DiffusionConfig::uniform(3, 64, 0))?;
    let index = TopKIndex::from_embedding(&emb, &split.full_ids, 8)?;
    let backend = GenerationBackend::mock();
    let cfg = ExperimentConfig {
        sample_size: split.partial_ids.len(),
        seed: 1,
        word_budget: 50,
        context_limit: 4096,
        template: TemplateId::DefaultV1,
    };

    let mut store = RecordStore::in_memory();
    for strategy in [Strategy::None, Strategy::Random, Strategy::Topo] {
        let mut plan = RetrievalPlan::new(strategy, 2);
        plan.seed = 99;
        let ctx = RetrievalContext {
            graph: &pruned,
            pool: &split.full_ids,
            index: Some(&index),
            text_emb: None,
            provider: None,
        };
        run_experiment(&split, &plan, &ctx, &backend, &cfg, &mut store)?;
    }

    let records: Vec<_> = store.records().cloned().collect();
    let provider = EmbeddingProvider::fallback(128, 0);
    let report = score_records(&records, &provider, None)?;
    println!("{:<22} {:>6} {:>8} {:>8} {:>8}", "strategy", "scored", "bleu4", "rougeL", "embF1");
    for s in &report.summaries {
        println!(
            "{:<22} {:>6} {:>8.4} {:>8.4} {:>8.4}",
            s.strategy, s.scored, s.mean_bleu4, s.mean_rouge_l, s.mean_emb_f1
        );
    }
    Ok(())
}

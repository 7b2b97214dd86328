//! Impute missing node features from generated text and measure what each
//! strategy is worth on node classification.

use toporag::error::Result;
use toporag::evaluation::{
    impute_features, train_node_classifier, ClassifierConfig, ImputeStrategy, TaskModel,
    TextImputeSource,
};
use toporag::fixture::mini_graph;
use toporag::generation::{
    run_experiment, ExperimentConfig, GenerationBackend, RecordStore, TemplateId,
};
use toporag::graph::{split_nodes, SplitStrategy};
use toporag::proximity::{proximity_embeddings, DiffusionConfig};
use toporag::retrieval::{RetrievalContext, RetrievalPlan, Strategy, TopKIndex};
use toporag::text_embed::{graph_text_embeddings, EmbeddingProvider, TextSubset};

fn main() -> Result<()> {
    let g = mini_graph();
    // half the nodes lose their features
    let split = split_nodes(&g, SplitStrategy::Random, 0.5, 10, 2)?;
    let pruned = g.remove_partial_partial_edges(&split)?;
    let provider = EmbeddingProvider::fallback(64, 8);
    let features = graph_text_embeddings(&provider, &pruned, TextSubset::All)?;

    // generate text for the missing nodes from retrieved context
    let emb = proximity_embeddings(&pruned, &DiffusionConfig::uniform(3, 64, 8))?;
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
        sample_size: split.partial_ids.len(),
        seed: 6,
        word_budget: 30,
        context_limit: 4096,
        template: TemplateId::DefaultV1,
    };
    let mut store = RecordStore::in_memory();
    run_experiment(&split, &plan, &ctx, &backend, &cfg, &mut store)?;
    let source = TextImputeSource {
        store: &store,
        provider: &provider,
        strategy_key: &plan.key(),
        backend_id: &backend.id(),
    };

    // fifteen training nodes: dropout would swamp the signal, and a
    // three-node validation set would stop training before it starts
    let nc = ClassifierConfig {
        model: TaskModel::Mlp,
        hidden: 16,
        epochs: 300,
        dropout: 0.0,
        val_fraction: 0.0,
        seeds: vec![0, 1, 2],
        ..ClassifierConfig::default()
    };
    let strategies: [(&str, ImputeStrategy); 4] = [
        ("zero", ImputeStrategy::Zero),
        ("random", ImputeStrategy::Random { seed: 5 }),
        ("global_mean", ImputeStrategy::GlobalMean),
        ("toporag_text", ImputeStrategy::TopoRagText),
    ];
    println!(
        "missing rate {:.2}, {} strategies, accuracy on the {} missing nodes:",
        split.partial_ids.len() as f64 / g.node_count() as f64,
        strategies.len(),
        split.partial_ids.len()
    );
    for (name, strategy) in &strategies {
        let needs_text = matches!(strategy, ImputeStrategy::TopoRagText);
        let imputed = impute_features(
            features.matrix(),
            &split.partial_ids,
            strategy,
            needs_text.then_some(&source),
        )?;
        let stats = train_node_classifier(&imputed, &g, &split.partial_ids, &nc)?;
        println!("  {name:<12} {:.4} +- {:.4}", stats.mean, stats.std);
    }
    Ok(())
}

//! Downstream task harnesses: node classification and link prediction on a
//! planted two-block graph, informative features against random ones.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use toporag::error::Result;
use toporag::evaluation::{
    link_prediction_eval, train_node_classifier, ClassifierConfig, LinkPredictionConfig, TaskModel,
};
use toporag::fixture::{block_features, planted_partition};

fn main() -> Result<()> {
    let g = planted_partition(2, 20, 0.5, 0.05, 3)?;
    let features = block_features(&g, 16, 0.1, 4)?;
    let test_ids: Vec<u32> = (0..g.node_count() as u32).step_by(3).collect();

    for model in [TaskModel::Mlp, TaskModel::PropagatedMlp] {
        let config = ClassifierConfig {
            model,
            hidden: 16,
            epochs: 300,
            patience: 60,
            seeds: vec![0, 1, 2],
            ..ClassifierConfig::default()
        };
        let stats = train_node_classifier(&features, &g, &test_ids, &config)?;
        println!(
            "{model:?}: accuracy {:.4} +- {:.4} over {} seeds",
            stats.mean,
            stats.std,
            stats.per_run.len()
        );
    }

    // link prediction on a sparser planted graph
    let lp_graph = planted_partition(2, 30, 0.15, 0.05, 7)?;
    let informative = block_features(&lp_graph, 16, 0.1, 9)?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let random = Array2::<f64>::from_shape_fn(informative.raw_dim(), |_| {
        rng.sample::<f64, _>(StandardNormal)
    });
    let config = LinkPredictionConfig {
        hidden: 16,
        epochs: 100,
        learning_rate: 0.01,
        patience: 100,
        eval_negatives: 300,
        hits_k: 100,
        negative_seed: 1,
        seeds: vec![0, 1, 2],
        ..LinkPredictionConfig::default()
    };
    for (name, feats) in [("informative", &informative), ("random", &random)] {
        let lp = link_prediction_eval(feats, &lp_graph, &config)?;
        println!(
            "link prediction with {name} features: hits@{} {:.4} +- {:.4} ({} test edges)",
            config.hits_k, lp.mean, lp.std, lp.test_edges
        );
    }
    Ok(())
}

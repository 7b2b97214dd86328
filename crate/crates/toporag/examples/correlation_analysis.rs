//! How strongly does textual similarity track topological proximity? Pearson
//! over node pairs, a binned curve, per-label group means, and a diffusion
//! depth sweep.

use toporag::analysis::{group_mean_matrix, layer_sweep, pairwise_scores, PairSelection};
use toporag::error::Result;
use toporag::fixture::mini_graph;
use toporag::proximity::{proximity_embeddings, DiffusionConfig};
use toporag::text_embed::{graph_text_embeddings, EmbeddingProvider, TextSubset};

fn main() -> Result<()> {
    let g = mini_graph();
    let provider = EmbeddingProvider::fallback(128, 0);
    let text = graph_text_embeddings(&provider, &g, TextSubset::All)?;
    let topo = proximity_embeddings(&g, &DiffusionConfig::uniform(3, 64, 0))?;

    let sample = pairwise_scores(&g, &text, &topo, PairSelection::UnorderedNoSelf)?;
    println!("pairs: {}", sample.pairs.len());
    println!("pearson(text, topo) = {:+.4}", sample.pearson()?);

    let (lo, hi) = sample
        .text_scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let edges: Vec<f64> = (0..=6).map(|i| lo + (hi - lo) * i as f64 / 6.0).collect();
    println!("\nmean topo score by text-score bin:");
    for bin in sample.curve(&edges)? {
        match bin.mean {
            Some(m) => println!("  [{:+.3}, {:+.3}) n={:<3} mean {:+.4}", bin.lo, bin.hi, bin.count, m),
            None => println!("  [{:+.3}, {:+.3}) empty", bin.lo, bin.hi),
        }
    }

    let groups = group_mean_matrix(&g, &sample.pairs, &sample.text_scores)?;
    println!("\nmean text similarity by label pair:");
    print!("{:>10}", "");
    for gname in &groups.groups {
        print!("{gname:>10}");
    }
    println!();
    for (i, row) in groups.values.iter().enumerate() {
        print!("{:>10}", groups.groups[i]);
        for v in row {
            match v {
                Some(m) => print!("{m:>10.4}"),
                None => print!("{:>10}", "-"),
            }
        }
        println!();
    }

    println!("\npearson by diffusion depth:");
    for (k, r) in layer_sweep(&g, &text, 3, 64, 0, PairSelection::UnorderedNoSelf)?
        .iter()
        .enumerate()
    {
        println!("  depth {}: {r:+.4}", k + 1);
    }
    Ok(())
}

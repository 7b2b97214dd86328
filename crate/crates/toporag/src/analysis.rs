//! Correlation analysis between text similarity and topological similarity.
//!
//! Given a text embedding and a topological embedding over the same nodes,
//! this module scores node pairs on both axes and summarizes the
//! relationship: a Pearson coefficient, a binned curve (mean topological
//! score per text-similarity bin), and a group-by-group mean matrix for
//! labeled graphs. A layer sweep recomputes the correlation while the
//! diffusion depth grows, which shows where locality stops helping.
//!
//! Pair scores use cosine similarity on both sides, except that role
//! embeddings enter as raw L2 distances (their natural scale); the
//! `topo_metric` label on every result says which convention applied.

use ndarray::ArrayView1;
use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::TextAttributedGraph;
use crate::proximity::{diffuse, gaussian_projection, DiffusionConfig};

/// Which node pairs enter the correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairSelection {
    /// Every ordered pair, self pairs included (`N^2` of them).
    AllOrdered,
    /// Unordered distinct pairs `i < j`.
    UnorderedNoSelf,
    /// Seeded sample of `count` distinct unordered pairs.
    Sampled { count: usize, seed: u64 },
}

impl PairSelection {
    pub fn label(&self) -> String {
        match self {
            PairSelection::AllOrdered => "all_ordered".into(),
            PairSelection::UnorderedNoSelf => "unordered".into(),
            PairSelection::Sampled { count, seed } => {
                format!("sampled(count={count},seed={seed})")
            }
        }
    }
}

/// Node pairs with both scores, ready for correlation or curves.
#[derive(Debug, Clone)]
pub struct PairSample {
    pub selection: String,
    /// `"cosine"` or `"l2_distance"`, depending on the topological kind.
    pub topo_metric: String,
    pub pairs: Vec<(u32, u32)>,
    pub text_scores: Vec<f64>,
    pub topo_scores: Vec<f64>,
}

fn l2_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

/// Map a linear index into the lexicographic list of pairs `i < j`.
fn unrank_pair(n: usize, linear: usize) -> (u32, u32) {
    // f(i) = pairs whose first element is < i
    let f = |i: u128| i * (2 * n as u128 - i - 1) / 2;
    let l = linear as u128;
    let mut lo = 0u128;
    let mut hi = n as u128 - 1;
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if f(mid) <= l {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let i = lo;
    let j = i + 1 + (l - f(i));
    (i as u32, j as u32)
}

/// Score the selected pairs on the text axis and the topological axis.
///
/// Both embeddings must cover exactly the graph's nodes. The topological
/// embedding decides the metric: proximity and text kinds score by cosine,
/// role kind by L2 distance.
pub fn pairwise_scores(
    graph: &TextAttributedGraph,
    text_emb: &EmbeddingMatrix,
    topo_emb: &EmbeddingMatrix,
    selection: PairSelection,
) -> Result<PairSample> {
    let n = graph.node_count();
    text_emb.expect_kind(EmbeddingKind::Text)?;
    for (name, emb) in [("text", text_emb), ("topological", topo_emb)] {
        if emb.n() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{name} embedding with {n} rows"),
                got: format!("{} rows", emb.n()),
            });
        }
    }
    let pairs: Vec<(u32, u32)> = match selection {
        PairSelection::AllOrdered => (0..n as u32)
            .flat_map(|i| (0..n as u32).map(move |j| (i, j)))
            .collect(),
        PairSelection::UnorderedNoSelf => (0..n as u32)
            .flat_map(|i| ((i + 1)..n as u32).map(move |j| (i, j)))
            .collect(),
        PairSelection::Sampled { count, seed } => {
            let total = n * n.saturating_sub(1) / 2;
            if count == 0 || count > total {
                return Err(Error::SampleTooLarge {
                    requested: count,
                    available: total,
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<usize> = index_sample(&mut rng, total, count).into_iter().collect();
            picked.sort_unstable();
            picked.into_iter().map(|l| unrank_pair(n, l)).collect()
        }
    };
    let role = topo_emb.kind() == EmbeddingKind::Role;
    let mut text_scores = Vec::with_capacity(pairs.len());
    let mut topo_scores = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        text_scores.push(cosine(text_emb.row(i)?, text_emb.row(j)?));
        let (a, b) = (topo_emb.row(i)?, topo_emb.row(j)?);
        topo_scores.push(if role { l2_distance(a, b) } else { cosine(a, b) });
    }
    Ok(PairSample {
        selection: selection.label(),
        topo_metric: if role { "l2_distance".into() } else { "cosine".into() },
        pairs,
        text_scores,
        topo_scores,
    })
}

/// Two-pass Pearson correlation coefficient.
///
/// Errors on length mismatch, fewer than two points, non-finite values, or a
/// constant sequence on either side.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} paired values", x.len()),
            got: format!("{} paired values", y.len()),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 points for a correlation, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "correlation input".into(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantSequence);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

impl PairSample {
    /// Pearson correlation between the text and topological scores.
    pub fn pearson(&self) -> Result<f64> {
        pearson(&self.text_scores, &self.topo_scores)
    }

    /// Bin pairs by text score and average the topological scores per bin.
    pub fn curve(&self, edges: &[f64]) -> Result<Vec<Bin>> {
        binned_curve(&self.text_scores, &self.topo_scores, edges)
    }
}

/// One bin of a [`binned_curve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Mean of the y values in the bin; absent when the bin is empty.
    pub mean: Option<f64>,
    /// Standard error of the mean; absent below two points.
    pub stderr: Option<f64>,
}

/// Bin `x` values into `edges` intervals and average `y` per bin.
///
/// Edges must be strictly increasing with at least two entries. Values
/// outside the edge range are clamped into the first or last bin, so bin
/// counts always sum to the number of points.
pub fn binned_curve(x: &[f64], y: &[f64], edges: &[f64]) -> Result<Vec<Bin>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} x values", x.len()),
            got: format!("{} y values", y.len()),
        });
    }
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "bin edges must be strictly increasing with at least two entries".into(),
        ));
    }
    let nbins = edges.len() - 1;
    let mut sums = vec![0.0f64; nbins];
    let mut sq_sums = vec![0.0f64; nbins];
    let mut counts = vec![0usize; nbins];
    for (&xv, &yv) in x.iter().zip(y) {
        if !xv.is_finite() || !yv.is_finite() {
            return Err(Error::NonFinite {
                context: "binned curve input".into(),
            });
        }
        let mut b = match edges.binary_search_by(|e| e.partial_cmp(&xv).expect("finite")) {
            Ok(exact) => exact,
            Err(ins) => ins.saturating_sub(1),
        };
        b = b.min(nbins - 1);
        sums[b] += yv;
        sq_sums[b] += yv * yv;
        counts[b] += 1;
    }
    let mut bins = Vec::with_capacity(nbins);
    for b in 0..nbins {
        let count = counts[b];
        let mean = (count > 0).then(|| sums[b] / count as f64);
        let stderr = (count > 1).then(|| {
            let m = sums[b] / count as f64;
            let var = (sq_sums[b] / count as f64 - m * m).max(0.0) * count as f64
                / (count as f64 - 1.0);
            (var / count as f64).sqrt()
        });
        bins.push(Bin {
            lo: edges[b],
            hi: edges[b + 1],
            count,
            mean,
            stderr,
        });
    }
    Ok(bins)
}

/// Mean pair score for every ordered pair of node groups.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupMeanMatrix {
    /// Distinct labels, sorted.
    pub groups: Vec<String>,
    /// `values[a][b]` is the mean score over pairs with labels `(a, b)`;
    /// `None` where no pair was seen. Symmetric for unordered input pairs.
    pub values: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
}

/// Average `scores` by the label pair of each node pair. Pairs touching an
/// unlabeled node are skipped; fewer than two distinct labels is an error.
pub fn group_mean_matrix(
    graph: &TextAttributedGraph,
    pairs: &[(u32, u32)],
    scores: &[f64],
) -> Result<GroupMeanMatrix> {
    if pairs.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} pairs", pairs.len()),
            got: format!("{} scores", scores.len()),
        });
    }
    let mut groups: Vec<String> = (0..graph.node_count() as u32)
        .filter_map(|i| graph.label(i).expect("id in range").map(str::to_owned))
        .collect();
    groups.sort();
    groups.dedup();
    if groups.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "group matrix needs at least 2 labels, found {}",
            groups.len()
        )));
    }
    let gidx = |id: u32| -> Result<Option<usize>> {
        Ok(graph
            .label(id)?
            .map(|l| groups.binary_search_by(|g| g.as_str().cmp(l)).expect("label seen")))
    };
    let g = groups.len();
    let mut sums = vec![vec![0.0f64; g]; g];
    let mut counts = vec![vec![0usize; g]; g];
    for (&(a, b), &s) in pairs.iter().zip(scores) {
        let (Some(ga), Some(gb)) = (gidx(a)?, gidx(b)?) else {
            continue;
        };
        sums[ga][gb] += s;
        counts[ga][gb] += 1;
        if a != b && ga != gb {
            // unordered input pairs fill both triangles
            sums[gb][ga] += s;
            counts[gb][ga] += 1;
        }
    }
    let values = (0..g)
        .map(|a| {
            (0..g)
                .map(|b| (counts[a][b] > 0).then(|| sums[a][b] / counts[a][b] as f64))
                .collect()
        })
        .collect();
    Ok(GroupMeanMatrix {
        groups,
        values,
        counts,
    })
}

/// Correlation as a function of diffusion depth.
///
/// For every `k = 1..=k_max`, embed with uniform weights over the first `k`
/// layers (same basis throughout) and correlate against the text embedding
/// on the same pair selection. Returns one coefficient per depth.
pub fn layer_sweep(
    graph: &TextAttributedGraph,
    text_emb: &EmbeddingMatrix,
    k_max: usize,
    projection_dim: usize,
    seed: u64,
    selection: PairSelection,
) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(Error::InvalidConfig("layer sweep needs k_max >= 1".into()));
    }
    let adj = graph.normalized_adjacency();
    let basis = gaussian_projection(graph.node_count(), projection_dim, seed);
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let cfg = DiffusionConfig {
            depth: k,
            alphas: vec![1.0 / k as f64; k],
            projection_dim,
            seed,
        };
        let emb = diffuse(&adj, &basis, &cfg)?;
        let sample = pairwise_scores(graph, text_emb, &emb, selection)?;
        out.push(sample.pearson()?);
    }
    Ok(out)
}

/// Serializable summary produced by the correlation stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub pair_selection: String,
    pub topo_metric: String,
    pub pairs: usize,
    pub pearson: f64,
    /// Pearson over every ordered pair, when separately computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson_all_ordered: Option<f64>,
    pub bins: Vec<Bin>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_matrix: Option<GroupMeanMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer_sweep: Option<Vec<f64>>,
    pub text_fingerprint: String,
    pub topo_fingerprint: String,
}

//! Diffusion proximity embeddings.
//!
//! Nodes are embedded by propagating a basis matrix `B` through the
//! row-normalized adjacency: `P = sum_k alpha_k * A_hat^k * B` for
//! `k = 1..=depth`. Rows of `P` are close in cosine terms when the nodes sit
//! close together in the graph. The basis is either a seeded Gaussian random
//! projection (`n x projection_dim`) or any caller-supplied matrix (the
//! identity recovers plain truncated diffusion).
//!
//! The computation is iterative (`B <- A_hat * B`, accumulate), so it costs
//! `O(depth * nnz * dim)` time and `O(n * dim)` memory and never materializes
//! a matrix power. Summation order is fixed; results are bit-stable for a
//! given seed.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::embedding::{cosine, EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, TextAttributedGraph};

/// Parameters for [`diffuse`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionConfig {
    /// Number of diffusion layers `K`; the sum starts at the first hop.
    pub depth: usize,
    /// One weight per layer.
    pub alphas: Vec<f64>,
    /// Columns of the random projection basis.
    pub projection_dim: usize,
    /// Seed for the Gaussian basis.
    pub seed: u64,
}

impl DiffusionConfig {
    /// Uniform weights `1/depth` over `depth` layers.
    pub fn uniform(depth: usize, projection_dim: usize, seed: u64) -> DiffusionConfig {
        DiffusionConfig {
            depth,
            alphas: vec![1.0 / depth.max(1) as f64; depth],
            projection_dim,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidConfig("diffusion depth must be >= 1".into()));
        }
        if self.alphas.len() != self.depth {
            return Err(Error::InvalidConfig(format!(
                "expected {} layer weights, got {}",
                self.depth,
                self.alphas.len()
            )));
        }
        if self.alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidConfig("layer weights must be finite".into()));
        }
        if self.projection_dim == 0 {
            return Err(Error::InvalidConfig("projection_dim must be >= 1".into()));
        }
        Ok(())
    }

    fn canonical(&self) -> String {
        format!(
            "depth={};alphas={:?};projection_dim={};seed={}",
            self.depth, self.alphas, self.projection_dim, self.seed
        )
    }
}

impl Default for DiffusionConfig {
    /// Three layers, uniform weights, 128-dimensional basis.
    fn default() -> Self {
        DiffusionConfig::uniform(3, 128, 0)
    }
}

/// Seeded `n x dim` matrix with i.i.d. standard normal entries, filled
/// row-major so the same seed always yields the same matrix.
pub fn gaussian_projection(n: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Array2::<f64>::zeros((n, dim));
    for i in 0..n {
        for j in 0..dim {
            m[[i, j]] = StandardNormal.sample(&mut rng);
        }
    }
    m
}

fn matrix_digest(m: &Array2<f64>) -> String {
    let mut h = Sha256::new();
    h.update((m.nrows() as u64).to_le_bytes());
    h.update((m.ncols() as u64).to_le_bytes());
    for &v in m.iter() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn fingerprint(adj: &CsrMatrix, basis: &Array2<f64>, config: &DiffusionConfig) -> String {
    let mut h = Sha256::new();
    h.update(b"proximity\x00");
    h.update(adj.digest().as_bytes());
    h.update(b"\x00");
    h.update(matrix_digest(basis).as_bytes());
    h.update(b"\x00");
    h.update(config.canonical().as_bytes());
    hex::encode(h.finalize())
}

/// Propagate `basis` through the normalized adjacency and accumulate the
/// weighted layer sum. Rows of isolated nodes come out all zero.
pub fn diffuse(
    norm_adj: &CsrMatrix,
    basis: &Array2<f64>,
    config: &DiffusionConfig,
) -> Result<EmbeddingMatrix> {
    config.validate()?;
    if norm_adj.rows() != norm_adj.cols() {
        return Err(Error::DimensionMismatch {
            expected: "square adjacency".into(),
            got: format!("{}x{}", norm_adj.rows(), norm_adj.cols()),
        });
    }
    if basis.nrows() != norm_adj.rows() {
        return Err(Error::DimensionMismatch {
            expected: format!("basis with {} rows", norm_adj.rows()),
            got: format!("{} rows", basis.nrows()),
        });
    }
    let fp = fingerprint(norm_adj, basis, config);
    let mut current = basis.clone();
    let mut acc = Array2::<f64>::zeros((basis.nrows(), basis.ncols()));
    for &alpha in &config.alphas {
        current = norm_adj.mul_dense(&current);
        acc.scaled_add(alpha, &current);
    }
    EmbeddingMatrix::new(acc, EmbeddingKind::Proximity, fp)
}

/// Convenience path: seeded Gaussian basis, then [`diffuse`].
pub fn proximity_embeddings(
    graph: &TextAttributedGraph,
    config: &DiffusionConfig,
) -> Result<EmbeddingMatrix> {
    config.validate()?;
    let adj = graph.normalized_adjacency();
    let basis = gaussian_projection(graph.node_count(), config.projection_dim, config.seed);
    diffuse(&adj, &basis, config)
}

/// Cosine similarity between two proximity rows; rows of isolated nodes are
/// zero and score exactly 0 against everything.
pub fn proximity_similarity(emb: &EmbeddingMatrix, i: u32, j: u32) -> Result<f64> {
    emb.expect_kind(EmbeddingKind::Proximity)?;
    Ok(cosine(emb.row(i)?, emb.row(j)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TextAttributedGraph;
    use ndarray::array;
    use rand::Rng;

    fn graph_from_edges(n: usize, edges: &[(u32, u32)]) -> TextAttributedGraph {
        let mut b = TextAttributedGraph::builder();
        for i in 0..n {
            b.add_node(&format!("node {i}"));
        }
        for &(a, c) in edges {
            b.add_edge(a, c);
        }
        b.build().unwrap()
    }

    /// Dense reference: explicit matrix powers, no iteration tricks.
    fn dense_diffuse(graph: &TextAttributedGraph, basis: &Array2<f64>, alphas: &[f64]) -> Array2<f64> {
        let n = graph.node_count();
        let mut a_hat = Array2::<f64>::zeros((n, n));
        for i in 0..n as u32 {
            let nbrs = graph.neighbors(i).unwrap();
            if nbrs.is_empty() {
                continue;
            }
            let w = 1.0 / nbrs.len() as f64;
            for &j in nbrs {
                a_hat[[i as usize, j as usize]] = w;
            }
        }
        let mut acc = Array2::<f64>::zeros((n, basis.ncols()));
        let mut power = Array2::<f64>::eye(n);
        for &alpha in alphas {
            power = power.dot(&a_hat);
            acc = acc + alpha * &power.dot(basis);
        }
        acc
    }

    #[test]
    fn single_edge_one_layer_is_the_swap() {
        let g = graph_from_edges(2, &[(0, 1)]);
        let cfg = DiffusionConfig {
            depth: 1,
            alphas: vec![1.0],
            projection_dim: 2,
            seed: 0,
        };
        let basis = Array2::eye(2);
        let e = diffuse(&g.normalized_adjacency(), &basis, &cfg).unwrap();
        assert_eq!(e.matrix(), &array![[0.0, 1.0], [1.0, 0.0]]);
        // one hop lands on the opposite node, so the rows are orthogonal
        assert_eq!(proximity_similarity(&e, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn triangle_one_layer_cosine_is_half() {
        let g = graph_from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
        let cfg = DiffusionConfig {
            depth: 1,
            alphas: vec![1.0],
            projection_dim: 3,
            seed: 0,
        };
        let e = diffuse(&g.normalized_adjacency(), &Array2::eye(3), &cfg).unwrap();
        for (i, j) in [(0u32, 1u32), (1, 2), (0, 2)] {
            let s = proximity_similarity(&e, i, j).unwrap();
            assert!((s - 0.5).abs() < 1e-12, "pair ({i},{j}) scored {s}");
        }
    }

    #[test]
    fn matches_dense_matrix_power_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 14;
        let mut edges = Vec::new();
        for a in 0..n as u32 {
            for b in (a + 1)..n as u32 {
                if rng.gen_bool(0.3) {
                    edges.push((a, b));
                }
            }
        }
        let g = graph_from_edges(n, &edges);
        let basis = gaussian_projection(n, 5, 7);
        let cfg = DiffusionConfig {
            depth: 4,
            alphas: vec![0.4, 0.3, 0.2, 0.1],
            projection_dim: 5,
            seed: 7,
        };
        let got = diffuse(&g.normalized_adjacency(), &basis, &cfg).unwrap();
        let want = dense_diffuse(&g, &basis, &cfg.alphas);
        let max_err = got
            .matrix()
            .iter()
            .zip(want.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-10, "max deviation {max_err}");
    }

    #[test]
    fn layer_sum_is_linear_in_the_weights() {
        let g = graph_from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)]);
        let adj = g.normalized_adjacency();
        let basis = gaussian_projection(6, 4, 3);
        let mk = |alphas: Vec<f64>| DiffusionConfig {
            depth: 3,
            alphas,
            projection_dim: 4,
            seed: 3,
        };
        let a = diffuse(&adj, &basis, &mk(vec![0.5, 0.25, 0.1])).unwrap();
        let b = diffuse(&adj, &basis, &mk(vec![0.1, 0.5, 0.4])).unwrap();
        let ab = diffuse(&adj, &basis, &mk(vec![0.6, 0.75, 0.5])).unwrap();
        let max_err = (a.matrix() + b.matrix() - ab.matrix())
            .iter()
            .map(|v| v.abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-12, "linearity violated by {max_err}");
    }

    #[test]
    fn isolated_nodes_embed_to_zero() {
        let g = graph_from_edges(3, &[(0, 1)]);
        let e = proximity_embeddings(&g, &DiffusionConfig::uniform(3, 8, 1)).unwrap();
        assert!(e.row(2).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(proximity_similarity(&e, 2, 0).unwrap(), 0.0);
        assert_eq!(proximity_similarity(&e, 2, 2).unwrap(), 0.0);
    }

    #[test]
    fn deep_diffusion_reaches_every_connected_pair() {
        // triangle with a two-node tail: connected, non-bipartite, diameter 3
        let g = graph_from_edges(5, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)]);
        let cfg = DiffusionConfig::uniform(4, 5, 0);
        let e = diffuse(&g.normalized_adjacency(), &Array2::eye(5), &cfg).unwrap();
        for i in 0..5u32 {
            for j in (i + 1)..5u32 {
                let s = proximity_similarity(&e, i, j).unwrap();
                assert!(s > 0.0, "pair ({i},{j}) scored {s}");
            }
        }
    }

    #[test]
    fn projection_is_seed_deterministic() {
        let a = gaussian_projection(10, 6, 42);
        let b = gaussian_projection(10, 6, 42);
        let c = gaussian_projection(10, 6, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fingerprint_tracks_structure_and_config() {
        let g1 = graph_from_edges(4, &[(0, 1), (1, 2), (2, 3)]);
        let g2 = graph_from_edges(4, &[(0, 1), (1, 2), (0, 3)]);
        let cfg = DiffusionConfig::uniform(2, 4, 5);
        let e1 = proximity_embeddings(&g1, &cfg).unwrap();
        let e1b = proximity_embeddings(&g1, &cfg).unwrap();
        let e2 = proximity_embeddings(&g2, &cfg).unwrap();
        let e3 = proximity_embeddings(&g1, &DiffusionConfig::uniform(3, 4, 5)).unwrap();
        assert_eq!(e1.fingerprint(), e1b.fingerprint());
        assert_ne!(e1.fingerprint(), e2.fingerprint());
        assert_ne!(e1.fingerprint(), e3.fingerprint());
    }

    #[test]
    fn validates_shapes_and_weights() {
        let g = graph_from_edges(3, &[(0, 1), (1, 2)]);
        let adj = g.normalized_adjacency();
        let bad_rows = Array2::<f64>::zeros((2, 4));
        let cfg = DiffusionConfig::uniform(2, 4, 0);
        assert!(diffuse(&adj, &bad_rows, &cfg).is_err());
        let cfg_bad = DiffusionConfig {
            depth: 2,
            alphas: vec![1.0],
            projection_dim: 4,
            seed: 0,
        };
        assert!(diffuse(&adj, &Array2::zeros((3, 4)), &cfg_bad).is_err());
        assert!(DiffusionConfig::uniform(0, 4, 0).validate().is_err());
    }
}

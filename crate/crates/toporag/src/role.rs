//! Spectral role embeddings.
//!
//! Each node is described by how heat spreads from it: the heat kernel
//! `Psi = U * diag(exp(-lambda * s)) * U^T` of the combinatorial Laplacian
//! `L = D - A` gives every node a diffusion pattern (a column of `Psi`), and
//! the embedding is the empirical characteristic function of that pattern
//! sampled at fixed points `t`: for node `a` and point `t`,
//! `phi_a(t) = mean_b exp(i * t * Psi_ab)`. Rows hold the real parts at all
//! sample points followed by the imaginary parts, so the matrix is `N x 2d`.
//!
//! Two nodes get similar rows exactly when their neighbourhood shapes match,
//! independent of where they sit in the graph; similarity is the reciprocal
//! of the L2 row distance with a fixed floor to keep identical patterns
//! finite.
//!
//! The eigendecomposition is dense and refuses matrices above a configured
//! order cap.

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::embedding::{EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::TextAttributedGraph;

/// Floor added to the L2 distance before taking the reciprocal, so identical
/// rows score `1/epsilon` instead of diverging.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Scales covered by [`scale_sweep`] when the caller has no better idea.
pub const DEFAULT_SCALES: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

/// Largest matrix order the dense eigensolver accepts by default.
pub const DEFAULT_EIGENSOLVER_CAP: usize = 5000;

/// Parameters for the characteristic-function embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveConfig {
    /// Heat kernel scale `s`.
    pub scale: f64,
    /// Evaluation points `t`, strictly increasing.
    pub sample_points: Vec<f64>,
    /// Dense eigensolver refuses matrices of order above this.
    pub eigensolver_cap: usize,
}

impl WaveConfig {
    /// `count` evenly spaced points on `[lo, hi]`, endpoints included.
    pub fn evenly_spaced(scale: f64, count: usize, lo: f64, hi: f64) -> Result<WaveConfig> {
        if count < 2 {
            return Err(Error::InvalidConfig(
                "need at least 2 sample points".into(),
            ));
        }
        if !(hi > lo) {
            return Err(Error::InvalidConfig(format!(
                "sample interval [{lo}, {hi}] is empty"
            )));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let sample_points = (0..count).map(|j| lo + step * j as f64).collect();
        let cfg = WaveConfig {
            scale,
            sample_points,
            eigensolver_cap: DEFAULT_EIGENSOLVER_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "heat scale must be positive, got {}",
                self.scale
            )));
        }
        if self.sample_points.is_empty() {
            return Err(Error::InvalidConfig("no sample points".into()));
        }
        if self.sample_points.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig("sample points must be finite".into()));
        }
        if self.sample_points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "sample points must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    fn canonical(&self) -> String {
        format!(
            "scale={};points={:?}",
            self.scale, self.sample_points
        )
    }
}

impl Default for WaveConfig {
    /// Scale 1.0 and 50 points on `[0, 100]`.
    fn default() -> Self {
        WaveConfig::evenly_spaced(1.0, 50, 0.0, 100.0).expect("valid default")
    }
}

/// Combinatorial Laplacian `L = D - A` as a dense matrix.
pub fn laplacian(graph: &TextAttributedGraph) -> Array2<f64> {
    let n = graph.node_count();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n as u32 {
        let nbrs = graph.neighbors(i).expect("id in range");
        l[[i as usize, i as usize]] = nbrs.len() as f64;
        for &j in nbrs {
            l[[i as usize, j as usize]] = -1.0;
        }
    }
    l
}

/// Heat kernel `exp(-scale * L)` via dense symmetric eigendecomposition.
///
/// The result is symmetrized to remove floating-point asymmetry; its columns
/// sum to 1 (heat is conserved). Errors on non-symmetric input or an order
/// above `cap`.
pub fn heat_wavelets(lap: &Array2<f64>, scale: f64, cap: usize) -> Result<Array2<f64>> {
    let n = lap.nrows();
    if lap.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: "square Laplacian".into(),
            got: format!("{}x{}", n, lap.ncols()),
        });
    }
    if n > cap {
        return Err(Error::EigensolverCap { n, cap });
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "heat scale must be positive, got {scale}"
        )));
    }
    let mut max_delta = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_delta = max_delta.max((lap[[i, j]] - lap[[j, i]]).abs());
        }
    }
    if max_delta > 1e-8 {
        return Err(Error::NotSymmetric { max_delta });
    }

    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| lap[[i, j]]);
    let eig = nalgebra::SymmetricEigen::new(m);
    let u = eig.eigenvectors;
    let mut scaled = u.clone();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let w = (-scale * lambda).exp();
        scaled.column_mut(k).scale_mut(w);
    }
    let psi = scaled * u.transpose();
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = 0.5 * (psi[(i, j)] + psi[(j, i)]);
        }
    }
    Ok(out)
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

/// Empirical characteristic function of every node's heat pattern, sampled
/// at `config.sample_points`. Output is `N x 2d`: real parts then imaginary
/// parts.
pub fn characteristic_embedding(
    wavelets: &Array2<f64>,
    config: &WaveConfig,
) -> Result<EmbeddingMatrix> {
    config.validate()?;
    let n = wavelets.nrows();
    if wavelets.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: "square wavelet matrix".into(),
            got: format!("{}x{}", n, wavelets.ncols()),
        });
    }
    let d = config.sample_points.len();
    let mut rows = Array2::<f64>::zeros((n, 2 * d));
    let inv_n = 1.0 / n as f64;
    for a in 0..n {
        let pattern = wavelets.row(a);
        for (jt, &t) in config.sample_points.iter().enumerate() {
            let mut re = 0.0;
            let mut im = 0.0;
            for &psi in pattern {
                let x = t * psi;
                re += x.cos();
                im += x.sin();
            }
            rows[[a, jt]] = re * inv_n;
            rows[[a, d + jt]] = im * inv_n;
        }
    }
    let mut h = Sha256::new();
    h.update(b"role\x00");
    h.update(matrix_digest(wavelets).as_bytes());
    h.update(b"\x00");
    h.update(config.canonical().as_bytes());
    let fp = hex::encode(h.finalize());
    EmbeddingMatrix::new(rows, EmbeddingKind::Role, fp)
}

/// Convenience path: Laplacian, heat kernel, characteristic embedding.
pub fn role_embeddings(
    graph: &TextAttributedGraph,
    config: &WaveConfig,
) -> Result<EmbeddingMatrix> {
    let lap = laplacian(graph);
    let psi = heat_wavelets(&lap, config.scale, config.eigensolver_cap)?;
    characteristic_embedding(&psi, config)
}

/// L2 distance between two role rows.
pub fn role_distance(emb: &EmbeddingMatrix, i: u32, j: u32) -> Result<f64> {
    emb.expect_kind(EmbeddingKind::Role)?;
    let a = emb.row(i)?;
    let b = emb.row(j)?;
    let mut acc = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    Ok(acc.sqrt())
}

/// Reciprocal role distance `1 / (epsilon + d)`; identical patterns score
/// `1/epsilon`.
pub fn role_similarity(emb: &EmbeddingMatrix, i: u32, j: u32) -> Result<f64> {
    Ok(1.0 / (DEFAULT_EPSILON + role_distance(emb, i, j)?))
}

/// Embeddings for every scale in `scales`, sharing the remaining config.
pub fn scale_sweep(
    graph: &TextAttributedGraph,
    scales: &[f64],
    config: &WaveConfig,
) -> Result<Vec<(f64, EmbeddingMatrix)>> {
    let lap = laplacian(graph);
    let mut out = Vec::with_capacity(scales.len());
    for &s in scales {
        let psi = heat_wavelets(&lap, s, config.eigensolver_cap)?;
        let cfg = WaveConfig {
            scale: s,
            sample_points: config.sample_points.clone(),
            eigensolver_cap: config.eigensolver_cap,
        };
        out.push((s, characteristic_embedding(&psi, &cfg)?));
    }
    Ok(out)
}

//! Filling whole missing feature rows.
//!
//! Missingness is node-level: a node either has its full feature row or
//! none of it. Observed rows are never touched by any strategy.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::generation::RecordStore;
use crate::text_embed::EmbeddingProvider;

/// How a missing feature row gets a value.
#[derive(Debug, Clone, PartialEq)]
pub enum ImputeStrategy {
    /// All zeros.
    Zero,
    /// Seeded standard-normal rows, filled in ascending node order.
    Random { seed: u64 },
    /// Per-dimension mean over the observed rows.
    GlobalMean,
    /// Text embedding of the generated continuation for each missing node.
    TopoRagText,
}

/// Where [`ImputeStrategy::TopoRagText`] finds and embeds generated text.
pub struct TextImputeSource<'a> {
    pub store: &'a RecordStore,
    pub provider: &'a EmbeddingProvider,
    /// Retrieval plan key of the records to use.
    pub strategy_key: &'a str,
    /// Backend id of the records to use.
    pub backend_id: &'a str,
}

/// Return a copy of `features` with the `missing` rows replaced per the
/// strategy. Rows not listed are returned bit-identical.
pub fn impute_features(
    features: &Array2<f64>,
    missing: &[u32],
    strategy: &ImputeStrategy,
    text_source: Option<&TextImputeSource<'_>>,
) -> Result<Array2<f64>> {
    let n = features.nrows();
    let d = features.ncols();
    let missing: BTreeSet<u32> = missing.iter().copied().collect();
    for &v in &missing {
        if v as usize >= n {
            return Err(Error::InvalidNodeId { id: v, count: n });
        }
    }
    let mut out = features.clone();
    if missing.is_empty() {
        return Ok(out);
    }
    match strategy {
        ImputeStrategy::Zero => {
            for &v in &missing {
                out.row_mut(v as usize).fill(0.0);
            }
        }
        ImputeStrategy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for &v in &missing {
                for x in out.row_mut(v as usize) {
                    *x = rng.sample(StandardNormal);
                }
            }
        }
        ImputeStrategy::GlobalMean => {
            let observed: Vec<usize> = (0..n)
                .filter(|i| !missing.contains(&(*i as u32)))
                .collect();
            if observed.is_empty() {
                return Err(Error::InvalidConfig(
                    "global mean imputation needs at least one observed row".into(),
                ));
            }
            let mut mean = vec![0.0; d];
            for &i in &observed {
                for (j, m) in mean.iter_mut().enumerate() {
                    *m += features[[i, j]];
                }
            }
            for m in &mut mean {
                *m /= observed.len() as f64;
            }
            for &v in &missing {
                for (j, x) in out.row_mut(v as usize).iter_mut().enumerate() {
                    *x = mean[j];
                }
            }
        }
        ImputeStrategy::TopoRagText => {
            let Some(src) = text_source else {
                return Err(Error::InvalidConfig(
                    "text imputation needs a record store and a provider".into(),
                ));
            };
            let mut texts = Vec::with_capacity(missing.len());
            for &v in &missing {
                let key = format!("{v}|{}|{}", src.strategy_key, src.backend_id);
                let text = src
                    .store
                    .get(&key)
                    .and_then(|rec| rec.output.clone())
                    .ok_or(Error::MissingRecord { node: v })?;
                texts.push(text);
            }
            let embedded = src.provider.embed_texts(&texts)?.matrix;
            if embedded.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: format!("feature dimension {d}"),
                    got: format!("{}", embedded.ncols()),
                });
            }
            for (row, &v) in missing.iter().enumerate() {
                out.row_mut(v as usize).assign(&embedded.row(row));
            }
        }
    }
    Ok(out)
}

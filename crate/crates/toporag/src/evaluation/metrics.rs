//! Text-overlap and embedding metrics for generated continuations.
//!
//! All three metrics share one tokenizer, `ws-punct-v1`: lowercase, then
//! alphanumeric runs become tokens and every other non-whitespace character
//! is a single-character token. Scores live in [0, 1].

use std::collections::{HashMap, HashSet};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::text_embed::EmbeddingProvider;

/// Version tag of [`tokenize`]; recorded in evaluation reports.
pub const TOKENIZER_VERSION: &str = "ws-punct-v1";

/// Lowercase; alphanumeric runs are tokens, punctuation chars are their own
/// tokens, whitespace only separates.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                cur.push(lc);
            }
        } else {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Drop the observed prefix from a generated text so scoring only sees the
/// continuation. Comparison is whitespace-normalized; when the generation
/// does not start with the prefix it is returned unchanged.
pub fn strip_observed_prefix(generated: &str, prefix: &str) -> String {
    let gen_norm = generated.split_whitespace().collect::<Vec<_>>().join(" ");
    let pre_norm = prefix.split_whitespace().collect::<Vec<_>>().join(" ");
    if pre_norm.is_empty() {
        return generated.to_owned();
    }
    if gen_norm == pre_norm {
        return String::new();
    }
    if let Some(rest) = gen_norm.strip_prefix(&format!("{pre_norm} ")) {
        return rest.to_owned();
    }
    generated.to_owned()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Smoothed BLEU-4 against a single reference.
///
/// Geometric mean of clipped n-gram precisions for n = 1..4; a precision
/// with a zero numerator or an empty denominator gets 0.1 added to both.
/// Brevity penalty e^{1 - r/c} applies when the candidate is shorter than
/// the reference. Empty candidate or reference scores 0.
pub fn bleu4(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let rf = tokenize(reference);
    if cand.is_empty() || rf.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cg = ngram_counts(&cand, n);
        let rg = ngram_counts(&rf, n);
        let num: usize = cg
            .iter()
            .map(|(g, &c)| c.min(rg.get(g).copied().unwrap_or(0)))
            .sum();
        let den = cand.len().saturating_sub(n - 1);
        let p = if num == 0 || den == 0 {
            (num as f64 + 0.1) / (den as f64 + 0.1)
        } else {
            num as f64 / den as f64
        };
        log_sum += p.ln();
    }
    let c = cand.len() as f64;
    let r = rf.len() as f64;
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    bp * (log_sum / 4.0).exp()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            cur[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure (β = 1): longest common subsequence precision against
/// the candidate, recall against the reference, harmonic mean. Zero when
/// either side is empty or the LCS is empty.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let rf = tokenize(reference);
    if cand.is_empty() || rf.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&cand, &rf) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / cand.len() as f64;
    let r = lcs / rf.len() as f64;
    2.0 * p * r / (p + r)
}

/// One embedding row per token.
pub trait TokenEmbedder {
    fn embed_tokens(&self, tokens: &[String]) -> Result<Array2<f64>>;
}

impl TokenEmbedder for EmbeddingProvider {
    fn embed_tokens(&self, tokens: &[String]) -> Result<Array2<f64>> {
        EmbeddingProvider::embed_tokens(self, tokens)
    }
}

fn normalize_rows(mut m: Array2<f64>) -> Array2<f64> {
    for mut row in m.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    m
}

/// Greedy-matching embedding F1: precision is the mean over candidate
/// tokens of the best cosine to any reference token, recall the symmetric
/// quantity, F1 their harmonic mean.
///
/// A token that appears verbatim on the other side always counts as a
/// perfect match, so identical sequences score (1, 1, 1) even when the
/// embedder maps some tokens (for example single characters) to zero
/// vectors. No idf weighting, no rescaling.
pub fn embedding_f1(
    candidate: &str,
    reference: &str,
    embedder: &dyn TokenEmbedder,
) -> Result<(f64, f64, f64)> {
    let cand = tokenize(candidate);
    let rf = tokenize(reference);
    if cand.is_empty() || rf.is_empty() {
        return Ok((0.0, 0.0, 0.0));
    }
    let ec = normalize_rows(embedder.embed_tokens(&cand)?);
    let er = normalize_rows(embedder.embed_tokens(&rf)?);
    if ec.nrows() != cand.len() || er.nrows() != rf.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} and {} token rows", cand.len(), rf.len()),
            got: format!("{} and {}", ec.nrows(), er.nrows()),
        });
    }
    if ec.ncols() != er.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("token dimension {}", ec.ncols()),
            got: format!("{}", er.ncols()),
        });
    }
    let sim = ec.dot(&er.t());
    let cand_set: HashSet<&str> = cand.iter().map(String::as_str).collect();
    let rf_set: HashSet<&str> = rf.iter().map(String::as_str).collect();

    let mut precision = 0.0;
    for (i, tok) in cand.iter().enumerate() {
        let best = if rf_set.contains(tok.as_str()) {
            1.0
        } else {
            sim.row(i).iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        };
        precision += best.clamp(-1.0, 1.0);
    }
    precision /= cand.len() as f64;

    let mut recall = 0.0;
    for (j, tok) in rf.iter().enumerate() {
        let best = if cand_set.contains(tok.as_str()) {
            1.0
        } else {
            sim.column(j).iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        };
        recall += best.clamp(-1.0, 1.0);
    }
    recall /= rf.len() as f64;

    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((precision, recall, f1))
}

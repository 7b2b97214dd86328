//! Scoring generated text and probing feature quality on downstream tasks.
//!
//! [`metrics`] holds the text metrics (BLEU-4, ROUGE-L, greedy embedding
//! F1) and their shared tokenizer; this module turns a batch of generation
//! records into an [`EvalReport`] with per-record scores and per-strategy
//! means. [`tasks`] trains small deterministic models for node
//! classification and link prediction; [`impute`] fills missing feature
//! rows, including from generated text.

pub mod impute;
pub mod metrics;
pub mod tasks;

pub use impute::{impute_features, ImputeStrategy, TextImputeSource};
pub use metrics::{
    bleu4, embedding_f1, rouge_l, strip_observed_prefix, tokenize, TokenEmbedder,
    TOKENIZER_VERSION,
};
pub use tasks::{
    hits_at, link_prediction_eval, train_node_classifier, ClassifierConfig,
    LinkPredictionConfig, LinkPredictionResult, RunStats, TaskModel,
};

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generation::GenerationRecord;

/// Scores for one generation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordScore {
    pub target: u32,
    pub strategy: String,
    pub backend: String,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub emb_precision: f64,
    pub emb_recall: f64,
    pub emb_f1: f64,
}

/// Per-strategy aggregate over the scored (non-excluded) records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub scored: usize,
    pub excluded: usize,
    pub mean_bleu4: f64,
    pub mean_rouge_l: f64,
    pub mean_emb_f1: f64,
}

/// Full evaluation output: per-record scores plus per-strategy means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Tokenizer version the scores were computed with.
    pub tokenizer: String,
    /// Fingerprint of the experiment the records came from, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    pub records: Vec<RecordScore>,
    pub summaries: Vec<StrategySummary>,
}

impl EvalReport {
    /// Ratio of each mean metric between two strategies (by exact key);
    /// None when either strategy is absent or the baseline mean is zero.
    pub fn boost(&self, strategy: &str, baseline: &str) -> Option<(f64, f64, f64)> {
        let a = self.summaries.iter().find(|s| s.strategy == strategy)?;
        let b = self.summaries.iter().find(|s| s.strategy == baseline)?;
        if b.mean_bleu4 == 0.0 || b.mean_rouge_l == 0.0 || b.mean_emb_f1 == 0.0 {
            return None;
        }
        Some((
            a.mean_bleu4 / b.mean_bleu4,
            a.mean_rouge_l / b.mean_rouge_l,
            a.mean_emb_f1 / b.mean_emb_f1,
        ))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let p = path.display().to_string();
        let file = File::create(path).map_err(|e| Error::io(&p, e))?;
        let mut w = BufWriter::new(file);
        let body = serde_json::to_string_pretty(self).map_err(|e| Error::json(&p, e))?;
        writeln!(w, "{body}").map_err(|e| Error::io(&p, e))?;
        w.flush().map_err(|e| Error::io(&p, e))?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<EvalReport> {
        let p = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(&p, e))?;
        serde_json::from_reader(file).map_err(|e| Error::json(&p, e))
    }

    /// One CSV row per scored record.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let p = path.display().to_string();
        let file = File::create(path).map_err(|e| Error::io(&p, e))?;
        let mut w = BufWriter::new(file);
        writeln!(
            w,
            "target,strategy,backend,bleu4,rouge_l,emb_precision,emb_recall,emb_f1"
        )
        .map_err(|e| Error::io(&p, e))?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.target,
                csv_field(&r.strategy),
                csv_field(&r.backend),
                r.bleu4,
                r.rouge_l,
                r.emb_precision,
                r.emb_recall,
                r.emb_f1
            )
            .map_err(|e| Error::io(&p, e))?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Score every non-excluded record: the observed prefix is stripped from
/// the generation and the remainder is compared to the held-out reference.
/// Aggregates are arithmetic means over scored records only.
pub fn score_records(
    records: &[GenerationRecord],
    embedder: &dyn TokenEmbedder,
    fingerprint: Option<String>,
) -> Result<EvalReport> {
    use std::collections::BTreeMap;

    let mut scores = Vec::new();
    let mut scored_by: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut excluded_by: BTreeMap<String, usize> = BTreeMap::new();
    for rec in records {
        let (Some(output), Some(reference), false) =
            (rec.output.as_deref(), rec.reference.as_deref(), rec.excluded)
        else {
            *excluded_by.entry(rec.strategy.clone()).or_insert(0) += 1;
            continue;
        };
        let candidate = strip_observed_prefix(output, &rec.prefix);
        let (emb_precision, emb_recall, emb_f1) =
            embedding_f1(&candidate, reference, embedder)?;
        scored_by
            .entry(rec.strategy.clone())
            .or_default()
            .push(scores.len());
        scores.push(RecordScore {
            target: rec.target,
            strategy: rec.strategy.clone(),
            backend: rec.backend.clone(),
            bleu4: bleu4(&candidate, reference),
            rouge_l: rouge_l(&candidate, reference),
            emb_precision,
            emb_recall,
            emb_f1,
        });
    }

    let mut keys: Vec<String> = scored_by
        .keys()
        .chain(excluded_by.keys())
        .cloned()
        .collect();
    keys.sort();
    keys.dedup();
    let summaries = keys
        .into_iter()
        .map(|strategy| {
            let idxs = scored_by.get(&strategy).map(Vec::as_slice).unwrap_or(&[]);
            let n = idxs.len() as f64;
            let mean = |f: fn(&RecordScore) -> f64| {
                if idxs.is_empty() {
                    0.0
                } else {
                    idxs.iter().map(|&i| f(&scores[i])).sum::<f64>() / n
                }
            };
            StrategySummary {
                mean_bleu4: mean(|r| r.bleu4),
                mean_rouge_l: mean(|r| r.rouge_l),
                mean_emb_f1: mean(|r| r.emb_f1),
                scored: idxs.len(),
                excluded: excluded_by.get(&strategy).copied().unwrap_or(0),
                strategy,
            }
        })
        .collect();

    Ok(EvalReport {
        tokenizer: TOKENIZER_VERSION.into(),
        fingerprint,
        records: scores,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_embed::EmbeddingProvider;

    fn rec(
        target: u32,
        strategy: &str,
        output: Option<&str>,
        reference: &str,
        excluded: bool,
    ) -> GenerationRecord {
        GenerationRecord {
            target,
            strategy: strategy.into(),
            backend: "mock".into(),
            prompt: String::new(),
            prefix: "the story begins".into(),
            reference: Some(reference.to_owned()),
            output: output.map(str::to_owned),
            excluded,
            exclusion_reason: excluded.then(|| "context_limit".into()),
        }
    }

    #[test]
    fn report_means_cover_scored_records_only() {
        let provider = EmbeddingProvider::fallback(16, 0);
        let records = vec![
            rec(0, "topo:k=2:offset=0", Some("warm bread rises slowly"), "warm bread rises slowly", false),
            rec(1, "topo:k=2:offset=0", Some("cold stone sits still"), "warm bread rises slowly", false),
            rec(2, "topo:k=2:offset=0", None, "warm bread rises slowly", true),
            rec(3, "none", Some("begins story the"), "warm bread rises slowly", false),
        ];
        let report = score_records(&records, &provider, Some("abc".into())).unwrap();
        assert_eq!(report.records.len(), 3);
        assert_eq!(report.tokenizer, TOKENIZER_VERSION);

        let topo = report.summaries.iter().find(|s| s.strategy == "topo:k=2:offset=0").unwrap();
        assert_eq!(topo.scored, 2);
        assert_eq!(topo.excluded, 1);
        let hand_mean = (report.records[0].bleu4 + report.records[1].bleu4) / 2.0;
        assert!((topo.mean_bleu4 - hand_mean).abs() < 1e-15);

        let none = report.summaries.iter().find(|s| s.strategy == "none").unwrap();
        assert_eq!(none.scored, 1);
        assert_eq!(none.excluded, 0);

        // perfect copy scores 1 across the board
        assert_eq!(report.records[0].bleu4, 1.0);
        assert_eq!(report.records[0].rouge_l, 1.0);
        assert_eq!(report.records[0].emb_f1, 1.0);
    }

    #[test]
    fn scoring_strips_the_observed_prefix_first() {
        let provider = EmbeddingProvider::fallback(16, 0);
        // generation echoes the prefix then continues with the reference
        let records = vec![rec(
            0,
            "none",
            Some("the story begins with a long winter"),
            "with a long winter",
            false,
        )];
        let report = score_records(&records, &provider, None).unwrap();
        assert_eq!(report.records[0].rouge_l, 1.0);
        assert_eq!(report.records[0].bleu4, 1.0);
    }

    #[test]
    fn boost_compares_two_strategies() {
        let provider = EmbeddingProvider::fallback(16, 0);
        let records = vec![
            rec(0, "topo:k=1:offset=0", Some("warm bread rises slowly today"), "warm bread rises slowly today", false),
            rec(0, "text:k=1:offset=0", Some("warm bread rises quickly today"), "warm bread rises slowly today", false),
        ];
        let report = score_records(&records, &provider, None).unwrap();
        let (b, r, f) = report
            .boost("topo:k=1:offset=0", "text:k=1:offset=0")
            .unwrap();
        assert!(b > 1.0);
        assert!(r > 1.0);
        assert!(f > 1.0);
        assert!(report.boost("topo:k=1:offset=0", "missing").is_none());
    }

    #[test]
    fn report_roundtrips_json_and_writes_csv() {
        let provider = EmbeddingProvider::fallback(16, 0);
        let records = vec![
            rec(4, "none", Some("some generated words here"), "some reference words here", false),
            rec(9, "random:k=2:seed=7", Some("other words"), "some reference words here", false),
        ];
        let report = score_records(&records, &provider, Some("deadbeef".into())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let jpath = dir.path().join("eval.json");
        let cpath = dir.path().join("eval.csv");
        report.write_json(&jpath).unwrap();
        report.write_csv(&cpath).unwrap();
        let back = EvalReport::read_json(&jpath).unwrap();
        assert_eq!(back, report);
        let csv = std::fs::read_to_string(&cpath).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "target,strategy,backend,bleu4,rouge_l,emb_precision,emb_recall,emb_f1"
        );
        assert_eq!(lines.count(), 2);
        assert!(csv.contains("random:k=2:seed=7"));
    }

    #[test]
    fn csv_fields_escape_commas_and_quotes() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}

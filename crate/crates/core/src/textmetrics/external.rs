//! Sentence-level scores computed outside this crate (LENS, BERTScore).

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::jsonl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceMetric {
    Sari,
    BleuSent,
    Lens,
    BertPrecision,
    BertRecall,
    BertF1,
}

impl SentenceMetric {
    pub const ALL: [SentenceMetric; 6] = [
        SentenceMetric::Sari,
        SentenceMetric::BleuSent,
        SentenceMetric::Lens,
        SentenceMetric::BertPrecision,
        SentenceMetric::BertRecall,
        SentenceMetric::BertF1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SentenceMetric::Sari => "sari",
            SentenceMetric::BleuSent => "bleu_sent",
            SentenceMetric::Lens => "lens",
            SentenceMetric::BertPrecision => "bert_precision",
            SentenceMetric::BertRecall => "bert_recall",
            SentenceMetric::BertF1 => "bert_f1",
        }
    }

    /// Declared value range, inclusive.
    pub fn range(self) -> (f64, f64) {
        match self {
            SentenceMetric::Sari | SentenceMetric::BleuSent | SentenceMetric::Lens => (0.0, 100.0),
            SentenceMetric::BertPrecision | SentenceMetric::BertRecall | SentenceMetric::BertF1 => {
                (-1.0, 1.0)
            }
        }
    }
}

impl fmt::Display for SentenceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentenceMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SentenceMetric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    #[serde(rename = "id")]
    pub item_id: String,
    #[serde(rename = "system")]
    pub system_id: String,
    pub metric: SentenceMetric,
    pub value: f64,
}

#[derive(Deserialize)]
struct RawScore {
    id: String,
    system: String,
    metric: String,
    value: f64,
}

pub fn parse_external_scores(text: &str) -> Result<Vec<SentenceScore>, MetricError> {
    let rows: Vec<(usize, RawScore)> = jsonl::parse_str(text)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, raw) in rows {
        let metric: SentenceMetric = raw
            .metric
            .parse()
            .map_err(|_| MetricError::UnknownMetric { line, name: raw.metric.clone() })?;
        let (lo, hi) = metric.range();
        if !raw.value.is_finite() || raw.value < lo || raw.value > hi {
            return Err(MetricError::OutOfRange { line, metric, value: raw.value });
        }
        if !seen.insert((raw.id.clone(), raw.system.clone(), metric)) {
            return Err(MetricError::DuplicateScore {
                line,
                item_id: raw.id,
                system_id: raw.system,
                metric,
            });
        }
        out.push(SentenceScore { item_id: raw.id, system_id: raw.system, metric, value: raw.value });
    }
    Ok(out)
}

pub fn load_external_scores(path: &Path) -> Result<Vec<SentenceScore>, MetricError> {
    parse_external_scores(&jsonl::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lens_above_100_is_out_of_range() {
        let err = parse_external_scores(r#"{"id":"a","system":"s","metric":"lens","value":101}"#).unwrap_err();
        assert!(matches!(err, MetricError::OutOfRange { line: 1, metric: SentenceMetric::Lens, .. }));
    }

    #[test]
    fn unknown_metric_is_named() {
        let err = parse_external_scores(r#"{"id":"a","system":"s","metric":"meteor","value":1}"#).unwrap_err();
        assert!(err.to_string().contains("meteor"), "{err}");
    }

    #[test]
    fn duplicate_triple_rejected() {
        let l = r#"{"id":"a","system":"s","metric":"bert_f1","value":0.5}"#;
        let err = parse_external_scores(&format!("{l}\n{l}\n")).unwrap_err();
        assert!(matches!(err, MetricError::DuplicateScore { line: 2, .. }));
    }

    #[test]
    fn bert_scores_may_be_negative() {
        let rows = parse_external_scores(r#"{"id":"a","system":"s","metric":"bert_recall","value":-0.2}"#).unwrap();
        assert_eq!(rows[0].value, -0.2);
    }

    #[test]
    fn loads_a_full_lens_file() {
        let mut text = String::new();
        for i in 0..3590 {
            let system = if i % 2 == 0 { "gpt4" } else { "control-t5" };
            text.push_str(&format!(
                "{{\"id\":\"u{}\",\"system\":\"{system}\",\"metric\":\"lens\",\"value\":{}}}\n",
                i / 2,
                (i % 100) as f64
            ));
        }
        assert_eq!(parse_external_scores(&text).unwrap().len(), 3590);
    }
}

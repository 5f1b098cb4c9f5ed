//! String-based simplification metrics.
//!
//! Every corpus metric is expressed as an additive per-item statistic
//! ([`CorpusStat`]) plus a final scoring step. Per-item work fans out over
//! rayon; the reduction is always sequential in item order so results are
//! bit-identical regardless of thread count. The same per-item statistics
//! feed the randomization test in [`crate::metaeval`].

mod bleu;
mod external;
mod fkgl;
mod sari;
mod tokenize;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bleu::BleuStat;
pub use external::{load_external_scores, parse_external_scores, SentenceMetric, SentenceScore};
pub use fkgl::{count_syllables, fkgl_corpus, FkglStat, FKGL_FLOOR};
pub use sari::{sari_components, sari_sentence, SariComponents, SariStat};
pub use tokenize::{is_word, tokenize, TokenSeq, TokenizerConfig};

use crate::corpus::EvalItem;
use crate::jsonl::JsonlError;

/// Highest n-gram order used by SARI and BLEU.
pub const MAX_NGRAM: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("reference list is empty")]
    EmptyReferences,
    #[error("item {item_id:?} has no output for system {system_id:?}")]
    MissingOutput { item_id: String, system_id: String },
    #[error("corpus contains no words")]
    NoWords,
    #[error("line {line}: unknown metric {name:?}")]
    UnknownMetric { line: usize, name: String },
    #[error("line {line}: {metric} value {value} outside its declared range")]
    OutOfRange { line: usize, metric: SentenceMetric, value: f64 },
    #[error("line {line}: duplicate score for ({item_id}, {system_id}, {metric})")]
    DuplicateScore {
        line: usize,
        item_id: String,
        system_id: String,
        metric: SentenceMetric,
    },
    #[error(transparent)]
    Io(#[from] JsonlError),
}

/// Additive sufficient statistic of a corpus-level metric.
pub trait CorpusStat: Clone + Default + Send + Sync {
    fn merge(&mut self, other: &Self);
    fn score(&self) -> f64;

    /// Sequential left fold in slice order.
    fn reduce<'a>(items: impl IntoIterator<Item = &'a Self>) -> Self
    where
        Self: 'a,
    {
        let mut acc = Self::default();
        for s in items {
            acc.merge(s);
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusMetric {
    Sari,
    Bleu,
    Fkgl,
}

impl CorpusMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            CorpusMetric::Sari => "sari",
            CorpusMetric::Bleu => "bleu",
            CorpusMetric::Fkgl => "fkgl",
        }
    }

    /// Whether a larger score is better.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, CorpusMetric::Fkgl)
    }
}

impl fmt::Display for CorpusMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorpusMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sari" => Ok(CorpusMetric::Sari),
            "bleu" => Ok(CorpusMetric::Bleu),
            "fkgl" => Ok(CorpusMetric::Fkgl),
            _ => Err(format!("unknown corpus metric {s:?}")),
        }
    }
}

fn output_of<'a>(item: &'a EvalItem, system_id: &str) -> Result<&'a str, MetricError> {
    item.output(system_id).ok_or_else(|| MetricError::MissingOutput {
        item_id: item.id().to_string(),
        system_id: system_id.to_string(),
    })
}

/// Per-item statistics in item order. Missing outputs fail on the first
/// offending item in that order.
pub fn item_stats<S, F>(items: &[EvalItem], system_id: &str, per_item: F) -> Result<Vec<S>, MetricError>
where
    S: CorpusStat,
    F: Fn(&EvalItem, &str) -> Result<S, MetricError> + Sync,
{
    items
        .par_iter()
        .map(|it| per_item(it, output_of(it, system_id)?))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

pub fn sari_item_stats(items: &[EvalItem], system_id: &str) -> Result<Vec<SariStat>, MetricError> {
    item_stats(items, system_id, |it, out| SariStat::sentence(&it.source.text, out, &it.refs.references))
}

pub fn bleu_item_stats(items: &[EvalItem], system_id: &str) -> Result<Vec<BleuStat>, MetricError> {
    item_stats(items, system_id, |it, out| BleuStat::sentence(out, &it.refs.references))
}

pub fn fkgl_item_stats(items: &[EvalItem], system_id: &str) -> Result<Vec<FkglStat>, MetricError> {
    item_stats(items, system_id, |_, out| Ok(FkglStat::text(out)))
}

/// Macro-averaged corpus SARI.
pub fn sari_corpus(items: &[EvalItem], system_id: &str) -> Result<f64, MetricError> {
    Ok(SariStat::reduce(&sari_item_stats(items, system_id)?).score())
}

pub fn bleu_corpus(items: &[EvalItem], system_id: &str) -> Result<f64, MetricError> {
    Ok(BleuStat::reduce(&bleu_item_stats(items, system_id)?).score())
}

/// FKGL over a system's outputs.
pub fn fkgl_outputs(items: &[EvalItem], system_id: &str) -> Result<f64, MetricError> {
    let total = FkglStat::reduce(&fkgl_item_stats(items, system_id)?);
    if total.words == 0 {
        return Err(MetricError::NoWords);
    }
    Ok(total.score())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub system_id: String,
    pub dataset: Option<String>,
    pub corpus_scores: BTreeMap<String, f64>,
    pub sentence_scores: Vec<SentenceScore>,
}

/// Corpus scores for the requested metrics plus sentence-level SARI.
pub fn run_metrics(
    items: &[EvalItem],
    system_id: &str,
    metrics: &[CorpusMetric],
) -> Result<MetricReport, MetricError> {
    let mut corpus_scores = BTreeMap::new();
    let mut sentence_scores = Vec::new();
    for &m in metrics {
        let value = match m {
            CorpusMetric::Sari => {
                let stats = sari_item_stats(items, system_id)?;
                sentence_scores.extend(items.iter().zip(&stats).map(|(it, s)| SentenceScore {
                    item_id: it.id().to_string(),
                    system_id: system_id.to_string(),
                    metric: SentenceMetric::Sari,
                    value: s.sum,
                }));
                SariStat::reduce(&stats).score()
            }
            CorpusMetric::Bleu => bleu_corpus(items, system_id)?,
            CorpusMetric::Fkgl => fkgl_outputs(items, system_id)?,
        };
        corpus_scores.insert(m.to_string(), value);
    }
    let mut datasets: Vec<_> = items.iter().map(|it| it.source.dataset.to_string()).collect();
    datasets.dedup();
    let dataset = match datasets.as_slice() {
        [one] => Some(one.clone()),
        _ => None,
    };
    Ok(MetricReport { system_id: system_id.to_string(), dataset, corpus_scores, sentence_scores })
}

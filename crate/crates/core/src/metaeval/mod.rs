//! Meta-evaluation: binary human labels, class balancing, point-biserial
//! correlation against sentence-level metrics, and paired randomization
//! tests for corpus-level system comparison.

mod report;
mod sigtest;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::erroranalysis::{ErrorRecord, Rating, RatingDimension};
use crate::jsonl::{self, JsonlError};

pub use report::{correlation_report, CorrelationReport, CorrelationRow, SliceSpec};
pub use sigtest::{
    exact_null_diffs, exact_p, randomization_test, randomization_test_exact, randomization_test_items, significance_marker, Side,
    SigTestResult, DEFAULT_RESAMPLES, MAX_EXACT_ITEMS,
};

#[derive(Debug, Error)]
pub enum MetaEvalError {
    #[error("length mismatch: {left} labels vs {right} scores")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 paired values, got {0}")]
    TooFew(usize),
    #[error("only one class present (all labels = {0})")]
    SingleClass(u8),
    #[error("correlation undefined: scores have zero variance")]
    ZeroVariance,
    #[error("unit {unit} has {got} raters, expected 3")]
    RaterCount { unit: String, got: usize },
    #[error("duplicate label for unit {0}")]
    DuplicateUnit(String),
    #[error("{} labeled unit(s) have no {metric} score: {}", units.len(), units.join(", "))]
    JoinMiss { metric: String, units: Vec<String> },
    #[error("systems are not aligned: {0}")]
    Misaligned(String),
    #[error("resamples must be at least 1")]
    NoResamples,
    #[error("exact test supports at most {max} items, got {got}")]
    TooManyForExact { max: usize, got: usize },
    #[error("labels mix rules {0} and {1}")]
    MixedRules(LabelRule, LabelRule),
    #[error("unknown label rule {0:?}")]
    UnknownRule(String),
    #[error("unknown slice {0:?}")]
    UnknownSlice(String),
    #[error(transparent)]
    Metric(#[from] crate::textmetrics::MetricError),
    #[error(transparent)]
    Io(#[from] JsonlError),
}

/// How a binary label was derived from human judgments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelRule {
    /// 1 = the consensus record has at least one error.
    ErrorPresence,
    /// 1 = every dimension is rated 3 by at least two of three raters.
    QualityOverall,
    /// 1 = this dimension is rated 3 by at least two of three raters.
    QualityDimension(RatingDimension),
}

impl fmt::Display for LabelRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelRule::ErrorPresence => f.write_str("error_presence"),
            LabelRule::QualityOverall => f.write_str("quality_overall"),
            LabelRule::QualityDimension(d) => write!(f, "quality_dimension:{d}"),
        }
    }
}

impl FromStr for LabelRule {
    type Err = MetaEvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "error_presence" => Ok(LabelRule::ErrorPresence),
            "quality_overall" => Ok(LabelRule::QualityOverall),
            _ => s
                .strip_prefix("quality_dimension:")
                .and_then(|d| d.parse().ok())
                .map(LabelRule::QualityDimension)
                .ok_or_else(|| MetaEvalError::UnknownRule(s.to_string())),
        }
    }
}

impl Serialize for LabelRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LabelRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualityScope {
    Overall,
    Dimension(RatingDimension),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledUnit {
    #[serde(rename = "id")]
    pub item_id: String,
    #[serde(rename = "system")]
    pub system_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub label: u8,
    pub rule: LabelRule,
}

impl LabeledUnit {
    pub fn key(&self) -> String {
        format!("{}/{}", self.item_id, self.system_id)
    }
}

/// One label per (item, system), all derived by the same rule. Units are
/// kept sorted by (item, system).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BinaryLabelSet {
    pub rule: LabelRule,
    pub units: Vec<LabeledUnit>,
}

impl BinaryLabelSet {
    pub fn new(rule: LabelRule, mut units: Vec<LabeledUnit>) -> Result<Self, MetaEvalError> {
        if let Some(u) = units.iter().find(|u| u.rule != rule) {
            return Err(MetaEvalError::MixedRules(rule, u.rule));
        }
        units.sort_by(|a, b| (&a.item_id, &a.system_id).cmp(&(&b.item_id, &b.system_id)));
        if let Some(w) = units.windows(2).find(|w| w[0].item_id == w[1].item_id && w[0].system_id == w[1].system_id)
        {
            return Err(MetaEvalError::DuplicateUnit(w[0].key()));
        }
        Ok(Self { rule, units })
    }

    pub fn positives(&self) -> usize {
        self.units.iter().filter(|u| u.label == 1).count()
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        jsonl::to_string(&self.units)
    }

    pub fn from_jsonl(text: &str) -> Result<Self, MetaEvalError> {
        let units: Vec<LabeledUnit> = jsonl::parse_str(text)?.into_iter().map(|(_, u)| u).collect();
        let rule = units.first().map_or(LabelRule::ErrorPresence, |u| u.rule);
        Self::new(rule, units)
    }

    pub fn load(path: &Path) -> Result<Self, MetaEvalError> {
        Self::from_jsonl(&jsonl::read_to_string(path)?)
    }
}

/// Label 1 iff the consensus record carries any annotation.
pub fn binarize_error_presence(records: &[ErrorRecord]) -> Result<BinaryLabelSet, MetaEvalError> {
    let units = records
        .iter()
        .map(|r| LabeledUnit {
            item_id: r.item_id.clone(),
            system_id: r.system_id.clone(),
            dataset: r.dataset.clone(),
            label: u8::from(r.is_erroneous()),
            rule: LabelRule::ErrorPresence,
        })
        .collect();
    BinaryLabelSet::new(LabelRule::ErrorPresence, units)
}

/// Label 1 = high quality: at least two of exactly three raters gave 3 on
/// the dimension, or on every dimension for the overall scope.
pub fn binarize_quality(ratings: &[Rating], scope: QualityScope) -> Result<BinaryLabelSet, MetaEvalError> {
    let mut units: BTreeMap<(&str, &str), Vec<&Rating>> = BTreeMap::new();
    for r in ratings {
        units.entry((&r.item_id, &r.system_id)).or_default().push(r);
    }
    let rule = match scope {
        QualityScope::Overall => LabelRule::QualityOverall,
        QualityScope::Dimension(d) => LabelRule::QualityDimension(d),
    };
    let passes = |rs: &[&Rating], d: RatingDimension| rs.iter().filter(|r| r.get(d) == 3).count() >= 2;
    let mut out = Vec::with_capacity(units.len());
    for ((item, system), rs) in units {
        let mut raters: Vec<&str> = rs.iter().map(|r| r.annotator.as_str()).collect();
        raters.sort_unstable();
        raters.dedup();
        if rs.len() != 3 || raters.len() != 3 {
            return Err(MetaEvalError::RaterCount { unit: format!("{item}/{system}"), got: raters.len() });
        }
        let high = match scope {
            QualityScope::Overall => RatingDimension::ALL.into_iter().all(|d| passes(&rs, d)),
            QualityScope::Dimension(d) => passes(&rs, d),
        };
        out.push(LabeledUnit {
            item_id: item.to_string(),
            system_id: system.to_string(),
            dataset: rs[0].dataset.clone(),
            label: u8::from(high),
            rule,
        });
    }
    BinaryLabelSet::new(rule, out)
}

/// Aligned binary labels and real scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedScores {
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
}

impl PairedScores {
    pub fn new(labels: Vec<u8>, scores: Vec<f64>) -> Result<Self, MetaEvalError> {
        if labels.len() != scores.len() {
            return Err(MetaEvalError::LengthMismatch { left: labels.len(), right: scores.len() });
        }
        if labels.len() < 2 {
            return Err(MetaEvalError::TooFew(labels.len()));
        }
        Ok(Self { labels: labels.into_iter().map(|l| u8::from(l != 0)).collect(), scores })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// (negatives, positives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - pos, pos)
    }

    fn check_both_classes(&self) -> Result<(), MetaEvalError> {
        match self.class_counts() {
            (0, _) => Err(MetaEvalError::SingleClass(1)),
            (_, 0) => Err(MetaEvalError::SingleClass(0)),
            _ => Ok(()),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            scores: indices.iter().map(|&i| self.scores[i]).collect(),
        }
    }
}

/// Indices kept when the majority class is subsampled (uniformly, without
/// replacement) to the minority size. Depends only on the labels and the
/// seed; returned in ascending order.
pub fn downsample_indices(labels: &[u8], seed: u64) -> Result<Vec<usize>, MetaEvalError> {
    let (neg, pos): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i] == 0);
    if pos.is_empty() {
        return Err(MetaEvalError::SingleClass(0));
    }
    if neg.is_empty() {
        return Err(MetaEvalError::SingleClass(1));
    }
    let (mut major, minor) = if neg.len() >= pos.len() { (neg, pos) } else { (pos, neg) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = major.partial_shuffle(&mut rng, minor.len());
    let mut keep: Vec<usize> = chosen.iter().copied().chain(minor).collect();
    keep.sort_unstable();
    Ok(keep)
}

pub fn downsample(p: &PairedScores, seed: u64) -> Result<PairedScores, MetaEvalError> {
    Ok(p.subset(&downsample_indices(&p.labels, seed)?))
}

/// `(M1 - M0) / s * sqrt(n1 n0 / n^2)` with `s` the population standard
/// deviation of all scores.
pub fn point_biserial(p: &PairedScores) -> Result<f64, MetaEvalError> {
    p.check_both_classes()?;
    let n = p.len() as f64;
    let mean = p.scores.iter().sum::<f64>() / n;
    let var = p.scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let scale = p.scores.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    if var.sqrt() <= 1e-12 * scale {
        return Err(MetaEvalError::ZeroVariance);
    }
    let (mut s1, mut s0, mut n1, mut n0) = (0.0, 0.0, 0.0, 0.0);
    for (&l, &x) in p.labels.iter().zip(&p.scores) {
        if l == 1 {
            s1 += x;
            n1 += 1.0;
        } else {
            s0 += x;
            n0 += 1.0;
        }
    }
    let r = (s1 / n1 - s0 / n0) / var.sqrt() * (n1 * n0 / (n * n)).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}

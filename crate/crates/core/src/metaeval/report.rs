//! Correlation tables: point-biserial r per metric and slice, on all units
//! and on a class-balanced subsample.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;
use std::str::FromStr;

use serde::Serialize;

use super::{downsample_indices, point_biserial, BinaryLabelSet, LabelRule, LabeledUnit, MetaEvalError, PairedScores};
use crate::textmetrics::{SentenceMetric, SentenceScore};

/// Which subsets of the labeled units to correlate on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SliceSpec {
    All,
    /// One slice per system.
    PerSystem,
    /// All units except those of one dataset.
    Exclude(String),
    /// One slice per system, each without one dataset.
    PerSystemExclude(String),
}

impl FromStr for SliceSpec {
    type Err = MetaEvalError;

    /// `all`, `system`, `exclude:<dataset>`, `system+exclude:<dataset>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut per_system = false;
        let mut exclude = None;
        let mut all = false;
        for part in s.split('+').map(str::trim) {
            match part {
                "all" => all = true,
                "system" => per_system = true,
                _ => match part.strip_prefix("exclude:") {
                    Some(d) if !d.is_empty() && exclude.is_none() => exclude = Some(d.to_string()),
                    _ => return Err(MetaEvalError::UnknownSlice(s.to_string())),
                },
            }
        }
        match (all, per_system, exclude) {
            (true, false, None) => Ok(SliceSpec::All),
            (false, true, None) => Ok(SliceSpec::PerSystem),
            (false, false, Some(d)) => Ok(SliceSpec::Exclude(d)),
            (false, true, Some(d)) => Ok(SliceSpec::PerSystemExclude(d)),
            _ => Err(MetaEvalError::UnknownSlice(s.to_string())),
        }
    }
}

struct Slice<'a> {
    name: String,
    units: Vec<&'a LabeledUnit>,
}

fn expand<'a>(spec: &SliceSpec, units: &'a [LabeledUnit]) -> Vec<Slice<'a>> {
    let systems: BTreeSet<&str> = units.iter().map(|u| u.system_id.as_str()).collect();
    let keep = |u: &LabeledUnit, ex: Option<&str>| ex.is_none_or(|d| u.dataset.as_deref() != Some(d));
    let per_system = |ex: Option<&str>| {
        systems
            .iter()
            .map(|s| Slice {
                name: match ex {
                    Some(d) => format!("system={s},exclude={d}"),
                    None => format!("system={s}"),
                },
                units: units.iter().filter(|u| u.system_id == *s && keep(u, ex)).collect(),
            })
            .collect::<Vec<_>>()
    };
    match spec {
        SliceSpec::All => vec![Slice { name: "all".into(), units: units.iter().collect() }],
        SliceSpec::PerSystem => per_system(None),
        SliceSpec::Exclude(d) => vec![Slice {
            name: format!("exclude={d}"),
            units: units.iter().filter(|u| keep(u, Some(d))).collect(),
        }],
        SliceSpec::PerSystemExclude(d) => per_system(Some(d)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub metric: SentenceMetric,
    pub slice: String,
    pub n: usize,
    pub positives: usize,
    /// `None` when the slice is absent (empty, one class, constant scores).
    pub r: Option<f64>,
    pub ds_n: Option<usize>,
    pub ds_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub rule: LabelRule,
    /// Seed of the downsampling draw, if one was made.
    pub seed: Option<u64>,
    pub rows: Vec<CorrelationRow>,
}

impl CorrelationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let fmt_r = |r: Option<f64>| r.map_or_else(|| "absent".to_string(), |v| format!("{v:.3}"));
        let mut rows = vec![vec![
            "metric".to_string(),
            "slice".into(),
            "n".into(),
            "pos".into(),
            "r".into(),
            "DS n".into(),
            "DS r".into(),
        ]];
        for row in &self.rows {
            rows.push(vec![
                row.metric.to_string(),
                row.slice.clone(),
                row.n.to_string(),
                row.positives.to_string(),
                fmt_r(row.r),
                row.ds_n.map_or_else(|| "-".into(), |n| n.to_string()),
                if self.seed.is_some() { fmt_r(row.ds_r) } else { "-".into() },
            ]);
        }
        let widths: Vec<usize> =
            (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = format!("rule: {}", self.rule);
        if let Some(seed) = self.seed {
            write!(out, "  downsample seed: {seed}").unwrap();
        }
        out.push('\n');
        for row in rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, v)| if c < 2 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
                .collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        }
        out
    }
}

fn absent_reason(err: &MetaEvalError) -> String {
    match err {
        MetaEvalError::SingleClass(l) => format!("single class (all labels {l})"),
        MetaEvalError::ZeroVariance => "constant scores".into(),
        MetaEvalError::TooFew(n) => format!("{n} unit(s)"),
        other => other.to_string(),
    }
}

/// Point-biserial r of `labels` against every metric present in `scores`,
/// for each requested slice. With `downsample_seed`, each slice is also
/// balanced by one seeded draw (shared by all metrics) and correlated again.
/// Every labeled unit needs a score for every metric; scores for unlabeled
/// units are ignored.
pub fn correlation_report(
    labels: &BinaryLabelSet,
    scores: &[SentenceScore],
    slices: &[SliceSpec],
    downsample_seed: Option<u64>,
) -> Result<CorrelationReport, MetaEvalError> {
    let mut table: BTreeMap<SentenceMetric, HashMap<(&str, &str), f64>> = BTreeMap::new();
    for s in scores {
        table.entry(s.metric).or_default().insert((&s.item_id, &s.system_id), s.value);
    }
    for (metric, by_unit) in &table {
        let missing: Vec<String> = labels
            .units
            .iter()
            .filter(|u| !by_unit.contains_key(&(u.item_id.as_str(), u.system_id.as_str())))
            .map(LabeledUnit::key)
            .collect();
        if !missing.is_empty() {
            return Err(MetaEvalError::JoinMiss { metric: metric.to_string(), units: missing });
        }
    }

    let mut rows = Vec::new();
    for spec in slices {
        for slice in expand(spec, &labels.units) {
            let unit_labels: Vec<u8> = slice.units.iter().map(|u| u.label).collect();
            let positives = unit_labels.iter().filter(|&&l| l == 1).count();
            let ds = downsample_seed.map(|seed| downsample_indices(&unit_labels, seed));
            for (&metric, by_unit) in &table {
                let mut row = CorrelationRow {
                    metric,
                    slice: slice.name.clone(),
                    n: slice.units.len(),
                    positives,
                    r: None,
                    ds_n: None,
                    ds_r: None,
                    absent: None,
                };
                let values: Vec<f64> =
                    slice.units.iter().map(|u| by_unit[&(u.item_id.as_str(), u.system_id.as_str())]).collect();
                if slice.units.is_empty() {
                    row.absent = Some("empty slice".into());
                    rows.push(row);
                    continue;
                }
                match PairedScores::new(unit_labels.clone(), values).and_then(|p| Ok((point_biserial(&p)?, p))) {
                    Ok((r, paired)) => {
                        row.r = Some(r);
                        if let Some(Ok(idx)) = &ds {
                            row.ds_n = Some(idx.len());
                            row.ds_r = point_biserial(&paired.subset(idx)).ok();
                        }
                    }
                    Err(e) => row.absent = Some(absent_reason(&e)),
                }
                rows.push(row);
            }
        }
    }
    Ok(CorrelationReport { rule: labels.rule, seed: downsample_seed, rows })
}

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use super::{AnalysisError, ErrorRecord, ErrorType, Rating, RatingDimension, CONSENSUS_ANNOTATOR};

/// `(dataset, system)`; records without a dataset group under `"unknown"`.
pub type GroupKey = (String, String);

fn group_of(dataset: &Option<String>, system: &str) -> GroupKey {
    (dataset.clone().unwrap_or_else(|| "unknown".to_string()), system.to_string())
}

fn check_unique_units(records: &[ErrorRecord]) -> Result<(), AnalysisError> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert((r.item_id.as_str(), r.system_id.as_str())) {
            return Err(AnalysisError::DuplicateConsensus {
                item_id: r.item_id.clone(),
                system_id: r.system_id.clone(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GroupCount {
    pub erroneous: u64,
    pub total: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ErroneousTable {
    pub cells: BTreeMap<GroupKey, GroupCount>,
}

impl ErroneousTable {
    pub fn get(&self, dataset: &str, system: &str) -> GroupCount {
        self.cells
            .get(&(dataset.to_string(), system.to_string()))
            .copied()
            .unwrap_or_default()
    }

    pub fn system_total(&self, system: &str) -> GroupCount {
        self.cells
            .iter()
            .filter(|((_, s), _)| s == system)
            .fold(GroupCount::default(), |acc, (_, c)| GroupCount {
                erroneous: acc.erroneous + c.erroneous,
                total: acc.total + c.total,
            })
    }
}

/// Erroneous-output counts per (dataset, system). An output is erroneous iff
/// its consensus record has at least one annotation.
pub fn count_erroneous(records: &[ErrorRecord]) -> Result<ErroneousTable, AnalysisError> {
    check_unique_units(records)?;
    let mut table = ErroneousTable::default();
    for r in records {
        let cell = table.cells.entry(group_of(&r.dataset, &r.system_id)).or_default();
        cell.total += 1;
        cell.erroneous += u64::from(r.is_erroneous());
    }
    Ok(table)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TypeCountTable {
    /// Instance counts indexed by [`ErrorType::index`].
    pub cells: BTreeMap<GroupKey, [u64; 7]>,
}

impl TypeCountTable {
    pub fn get(&self, dataset: &str, system: &str, t: ErrorType) -> u64 {
        self.cells
            .get(&(dataset.to_string(), system.to_string()))
            .map_or(0, |c| c[t.index()])
    }

    pub fn system_type_total(&self, system: &str, t: ErrorType) -> u64 {
        self.cells
            .iter()
            .filter(|((_, s), _)| s == system)
            .map(|(_, c)| c[t.index()])
            .sum()
    }

    pub fn system_total(&self, system: &str) -> u64 {
        ErrorType::ALL.iter().map(|&t| self.system_type_total(system, t)).sum()
    }
}

/// Error-instance counts per type and (dataset, system). Two annotations of
/// the same type in one output count twice.
pub fn error_type_counts(records: &[ErrorRecord]) -> Result<TypeCountTable, AnalysisError> {
    check_unique_units(records)?;
    let mut table = TypeCountTable::default();
    for r in records {
        let cell = table.cells.entry(group_of(&r.dataset, &r.system_id)).or_insert([0; 7]);
        for a in &r.annotations {
            cell[a.error_type.index()] += 1;
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Deviation {
    /// Divide by `n`.
    #[default]
    Population,
    /// Divide by `n - 1`.
    Sample,
}

/// Mean and standard deviation of the number of distinct error types per
/// erroneous output of `system`.
pub fn unique_errors_per_erroneous(
    records: &[ErrorRecord],
    system: &str,
    deviation: Deviation,
) -> Result<(f64, f64), AnalysisError> {
    check_unique_units(records)?;
    let counts: Vec<f64> = records
        .iter()
        .filter(|r| r.system_id == system && r.is_erroneous())
        .map(|r| r.distinct_types().len() as f64)
        .collect();
    if counts.is_empty() {
        return Err(AnalysisError::NoErroneous(system.to_string()));
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let ss: f64 = counts.iter().map(|c| (c - mean).powi(2)).sum();
    let denom = match deviation {
        Deviation::Population => n,
        Deviation::Sample => (n - 1.0).max(1.0),
    };
    Ok((mean, (ss / denom).sqrt()))
}

/// For each error type: how many outputs contain it exactly `k` times.
pub type LabelwiseHistogram = BTreeMap<ErrorType, BTreeMap<usize, u64>>;

pub fn labelwise_distribution(records: &[ErrorRecord], system: &str) -> LabelwiseHistogram {
    let mut hist = LabelwiseHistogram::new();
    for r in records.iter().filter(|r| r.system_id == system) {
        for (t, k) in r.type_multiplicity() {
            *hist.entry(t).or_default().entry(k).or_default() += 1;
        }
    }
    hist
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DimensionMeans {
    pub fluency: f64,
    pub meaning: f64,
    pub simplicity: f64,
    /// Mean over all three dimensions.
    pub total: f64,
    pub ratings: u64,
}

impl DimensionMeans {
    pub fn get(&self, dim: RatingDimension) -> f64 {
        match dim {
            RatingDimension::Fluency => self.fluency,
            RatingDimension::Meaning => self.meaning,
            RatingDimension::Simplicity => self.simplicity,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RatingTable {
    pub cells: BTreeMap<GroupKey, DimensionMeans>,
}

impl RatingTable {
    pub fn get(&self, dataset: &str, system: &str) -> Option<&DimensionMeans> {
        self.cells.get(&(dataset.to_string(), system.to_string()))
    }
}

/// Mean rating per (dataset, system) and dimension over every
/// (item, annotator) rating in the group. Every output of a group must be
/// rated by the same set of annotators.
pub fn average_ratings(ratings: &[Rating]) -> Result<RatingTable, AnalysisError> {
    let mut seen = HashSet::new();
    let mut raters: BTreeMap<GroupKey, BTreeMap<&str, BTreeSet<&str>>> = BTreeMap::new();
    let mut sums: BTreeMap<GroupKey, [u64; 4]> = BTreeMap::new();
    for r in ratings {
        if !seen.insert((&r.item_id, &r.system_id, &r.annotator)) {
            return Err(AnalysisError::DuplicateRating {
                item_id: r.item_id.clone(),
                system_id: r.system_id.clone(),
                annotator: r.annotator.clone(),
            });
        }
        let key = group_of(&r.dataset, &r.system_id);
        raters
            .entry(key.clone())
            .or_default()
            .entry(&r.item_id)
            .or_default()
            .insert(&r.annotator);
        let s = sums.entry(key).or_default();
        s[0] += u64::from(r.fluency);
        s[1] += u64::from(r.meaning);
        s[2] += u64::from(r.simplicity);
        s[3] += 1;
    }
    for (key, per_item) in &raters {
        let mut iter = per_item.iter();
        let (_, expected) = iter.next().expect("group has ratings");
        for (item, found) in iter {
            if found != expected {
                return Err(AnalysisError::RaterSetMismatch {
                    group: format!("{}/{}", key.0, key.1),
                    item_id: item.to_string(),
                    expected: expected.iter().map(|s| s.to_string()).collect(),
                    found: found.iter().map(|s| s.to_string()).collect(),
                });
            }
        }
    }
    let cells = sums
        .into_iter()
        .map(|(key, [f, m, s, n])| {
            let n_f = n as f64;
            let means = DimensionMeans {
                fluency: f as f64 / n_f,
                meaning: m as f64 / n_f,
                simplicity: s as f64 / n_f,
                total: (f + m + s) as f64 / (3.0 * n_f),
                ratings: n,
            };
            (key, means)
        })
        .collect();
    Ok(RatingTable { cells })
}

/// A unit whose individual annotators disagree on the error types present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Disagreement {
    pub item_id: String,
    pub system_id: String,
    pub by_annotator: BTreeMap<String, Vec<ErrorType>>,
}

/// Compares individual (non-consensus) records per unit by their sorted
/// multisets of error types and lists every unit where annotators differ.
/// Resolution is left to the annotators; nothing is merged automatically.
pub fn find_disagreements(records: &[ErrorRecord]) -> Vec<Disagreement> {
    let mut units: BTreeMap<(&str, &str), BTreeMap<String, Vec<ErrorType>>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.annotator != CONSENSUS_ANNOTATOR) {
        let mut types: Vec<ErrorType> = r.annotations.iter().map(|a| a.error_type).collect();
        types.sort();
        units
            .entry((&r.item_id, &r.system_id))
            .or_default()
            .insert(r.annotator.clone(), types);
    }
    units
        .into_iter()
        .filter(|(_, by)| {
            let mut v = by.values();
            let first = v.next();
            v.any(|t| Some(t) != first)
        })
        .map(|((item, system), by_annotator)| Disagreement {
            item_id: item.to_string(),
            system_id: system.to_string(),
            by_annotator,
        })
        .collect()
}

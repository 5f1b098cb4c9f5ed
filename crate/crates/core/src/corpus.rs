//! Multi-reference simplification corpora and system outputs.
//!
//! The interchange format is JSONL with one eval item per line:
//!
//! ```text
//! {"id": "t-001", "dataset": "turk", "split": "test", "source": "...", "references": ["...", ...]}
//! ```
//!
//! An optional `"outputs": {"system": "text"}` object carries attached system
//! outputs so that joined eval sets round-trip. TSV is accepted for flat data
//! (`id, dataset, split, source, reference...`). All text is NFC-normalised on
//! load so character offsets computed downstream are stable.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::jsonl::{self, JsonlError};

/// Comment line written in place of records when an empty eval set is exported.
pub const EMPTY_EXPORT_MARKER: &str = "# simpeval eval-set: 0 records";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("no records")]
    NoRecords,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: item {id:?} has {found} references, {dataset} declares {expected}")]
    ReferenceCount {
        line: usize,
        id: String,
        dataset: Dataset,
        expected: usize,
        found: usize,
    },
    #[error("outputs reference unknown item ids: {}", .0.join(", "))]
    UnknownItems(Vec<String>),
    #[error("duplicate output for item {item_id:?}, system {system_id:?}")]
    DuplicateOutput { item_id: String, system_id: String },
    #[error("cannot sample {requested} items from {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("{0}")]
    Unrepresentable(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<JsonlError> for CorpusError {
    fn from(e: JsonlError) -> Self {
        match e {
            JsonlError::Io { path, source } => CorpusError::Io { path, source },
            JsonlError::Parse { line, message } => CorpusError::Malformed { line, message },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Turk,
    Asset,
    Newsela,
    Custom,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [Dataset::Turk, Dataset::Asset, Dataset::Newsela, Dataset::Custom];

    /// Number of references every item of this dataset carries, when fixed.
    pub fn expected_references(self) -> Option<usize> {
        match self {
            Dataset::Turk => Some(8),
            Dataset::Asset => Some(10),
            Dataset::Newsela | Dataset::Custom => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Turk => "turk",
            Dataset::Asset => "asset",
            Dataset::Newsela => "newsela",
            Dataset::Custom => "custom",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown dataset {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "validation" | "valid" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceItem {
    pub id: String,
    pub dataset: Dataset,
    pub split: Split,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSet {
    pub item_id: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemOutput {
    #[serde(rename = "id")]
    pub item_id: String,
    #[serde(rename = "system")]
    pub system_id: String,
    #[serde(rename = "output")]
    pub text: String,
}

/// A source sentence joined with its references and any system outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalItem {
    pub source: SourceItem,
    pub refs: ReferenceSet,
    pub outputs: BTreeMap<String, String>,
}

impl EvalItem {
    pub fn id(&self) -> &str {
        &self.source.id
    }

    pub fn output(&self, system_id: &str) -> Option<&str> {
        self.outputs.get(system_id).map(String::as_str)
    }
}

/// Wire form of one JSONL line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct EvalRecord {
    id: String,
    dataset: String,
    split: String,
    source: String,
    references: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    outputs: BTreeMap<String, String>,
}

impl From<&EvalItem> for EvalRecord {
    fn from(item: &EvalItem) -> Self {
        EvalRecord {
            id: item.source.id.clone(),
            dataset: item.source.dataset.to_string(),
            split: item.source.split.to_string(),
            source: item.source.text.clone(),
            references: item.refs.references.clone(),
            outputs: item.outputs.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            _ => Err(format!("unknown corpus format {s:?}")),
        }
    }
}

impl CorpusFormat {
    /// Guess from the file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    /// Item counts keyed by `"dataset/split"`.
    pub counts: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub items: Vec<EvalItem>,
    pub report: LoadReport,
}

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus, CorpusError> {
    let text = jsonl::read_to_string(path)?;
    parse_corpus(&text, format)
}

pub fn parse_corpus(text: &str, format: CorpusFormat) -> Result<LoadedCorpus, CorpusError> {
    if text.trim().is_empty() {
        return Err(CorpusError::NoRecords);
    }
    let records = match format {
        CorpusFormat::Jsonl => jsonl::parse_str::<EvalRecord>(text)?,
        CorpusFormat::Tsv => parse_tsv(text)?,
    };

    let mut report = LoadReport::default();
    if records.is_empty() {
        report.warnings.push("no records: eval set is empty".to_string());
    }
    let mut seen = HashSet::new();
    let mut items = Vec::with_capacity(records.len());
    for (line, rec) in records {
        let item = validate_record(line, rec)?;
        if !seen.insert(item.source.id.clone()) {
            return Err(CorpusError::DuplicateId { line, id: item.source.id });
        }
        *report
            .counts
            .entry(format!("{}/{}", item.source.dataset, item.source.split))
            .or_default() += 1;
        items.push(item);
    }
    Ok(LoadedCorpus { items, report })
}

fn validate_record(line: usize, rec: EvalRecord) -> Result<EvalItem, CorpusError> {
    let malformed = |message: String| CorpusError::Malformed { line, message };
    let id = rec.id.trim().to_string();
    if id.is_empty() {
        return Err(malformed("empty id".into()));
    }
    let dataset: Dataset = rec.dataset.parse().map_err(malformed)?;
    let split: Split = rec.split.parse().map_err(malformed)?;
    let source = nfc(&rec.source);
    if source.trim().is_empty() {
        return Err(malformed(format!("item {id:?} has empty source text")));
    }
    if rec.references.is_empty() {
        return Err(malformed(format!("item {id:?} has no references")));
    }
    let mut references = Vec::with_capacity(rec.references.len());
    for (i, r) in rec.references.iter().enumerate() {
        let r = nfc(r);
        if r.trim().is_empty() {
            return Err(malformed(format!("item {id:?} reference {i} is empty")));
        }
        references.push(r);
    }
    if let Some(expected) = dataset.expected_references() {
        if references.len() != expected {
            return Err(CorpusError::ReferenceCount {
                line,
                id,
                dataset,
                expected,
                found: references.len(),
            });
        }
    }
    let mut outputs = BTreeMap::new();
    for (system, text) in rec.outputs {
        let text = nfc(&text);
        if text.trim().is_empty() {
            return Err(malformed(format!("item {id:?} output of {system:?} is empty")));
        }
        outputs.insert(system, text);
    }
    Ok(EvalItem {
        source: SourceItem { id: id.clone(), dataset, split, text: source },
        refs: ReferenceSet { item_id: id, references },
        outputs,
    })
}

const TSV_HEADER: &str = "id\tdataset\tsplit\tsource\treference";

fn parse_tsv(text: &str) -> Result<Vec<(usize, EvalRecord)>, CorpusError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        if idx == 0 && raw.starts_with("id\t") {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() < 5 {
            return Err(CorpusError::Malformed {
                line,
                message: format!("expected at least 5 tab-separated columns, found {}", cols.len()),
            });
        }
        out.push((
            line,
            EvalRecord {
                id: cols[0].to_string(),
                dataset: cols[1].to_string(),
                split: cols[2].to_string(),
                source: cols[3].to_string(),
                references: cols[4..]
                    .iter()
                    .filter(|c| !c.is_empty())
                    .map(|c| c.to_string())
                    .collect(),
                outputs: BTreeMap::new(),
            },
        ));
    }
    Ok(out)
}

pub fn load_outputs(path: &Path) -> Result<Vec<SystemOutput>, CorpusError> {
    let rows: Vec<(usize, SystemOutput)> = jsonl::read(path)?;
    rows.into_iter()
        .map(|(line, mut o)| {
            o.text = nfc(&o.text);
            if o.text.trim().is_empty() {
                return Err(CorpusError::Malformed {
                    line,
                    message: format!("empty output for {:?}/{:?}", o.item_id, o.system_id),
                });
            }
            Ok(o)
        })
        .collect()
}

/// Joins system outputs onto eval items by item id.
pub fn attach_outputs(
    mut items: Vec<EvalItem>,
    outputs: &[SystemOutput],
) -> Result<Vec<EvalItem>, CorpusError> {
    let index: BTreeMap<String, usize> = items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.source.id.clone(), i))
        .collect();
    let unknown: BTreeSet<&str> = outputs
        .iter()
        .filter(|o| !index.contains_key(&o.item_id))
        .map(|o| o.item_id.as_str())
        .collect();
    if !unknown.is_empty() {
        return Err(CorpusError::UnknownItems(unknown.into_iter().map(String::from).collect()));
    }
    for o in outputs {
        let item = &mut items[index[&o.item_id]];
        if item.outputs.contains_key(&o.system_id) {
            return Err(CorpusError::DuplicateOutput {
                item_id: o.item_id.clone(),
                system_id: o.system_id.clone(),
            });
        }
        item.outputs.insert(o.system_id.clone(), nfc(&o.text));
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingScheme {
    /// `n` items drawn uniformly from the whole set.
    #[default]
    Uniform,
    /// `n` items drawn uniformly from each dataset present.
    PerDataset,
}

impl FromStr for SamplingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(SamplingScheme::Uniform),
            "per-dataset" | "per_dataset" => Ok(SamplingScheme::PerDataset),
            _ => Err(format!("unknown sampling scheme {s:?}")),
        }
    }
}

/// Seeded sampling without replacement.
///
/// Candidates are ordered by id before drawing, so the result depends only on
/// the set of ids, `n` and `seed`. Items come back in draw order.
pub fn sample_items(
    items: &[EvalItem],
    n: usize,
    seed: u64,
    scheme: SamplingScheme,
) -> Result<Vec<EvalItem>, CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |mut pool: Vec<&EvalItem>| -> Result<Vec<EvalItem>, CorpusError> {
        if n > pool.len() {
            return Err(CorpusError::SampleTooLarge { requested: n, available: pool.len() });
        }
        pool.sort_by(|a, b| a.source.id.cmp(&b.source.id));
        let (picked, _) = pool.partial_shuffle(&mut rng, n);
        Ok(picked.iter().map(|it| (*it).clone()).collect())
    };
    match scheme {
        SamplingScheme::Uniform => draw(items.iter().collect()),
        SamplingScheme::PerDataset => {
            let mut groups: BTreeMap<Dataset, Vec<&EvalItem>> = BTreeMap::new();
            for it in items {
                groups.entry(it.source.dataset).or_default().push(it);
            }
            let mut out = Vec::new();
            for (_, pool) in groups {
                out.extend(draw(pool)?);
            }
            Ok(out)
        }
    }
}

/// Every (item, system) pair for which an output exists, in item order.
pub fn annotation_units(items: &[EvalItem], systems: &[&str]) -> Vec<(String, String)> {
    items
        .iter()
        .flat_map(|it| {
            systems
                .iter()
                .filter(|s| it.outputs.contains_key(**s))
                .map(move |s| (it.source.id.clone(), s.to_string()))
        })
        .collect()
}

pub fn render_corpus(items: &[EvalItem], format: CorpusFormat) -> Result<String, CorpusError> {
    match format {
        CorpusFormat::Jsonl => {
            if items.is_empty() {
                return Ok(format!("{EMPTY_EXPORT_MARKER}\n"));
            }
            let records: Vec<EvalRecord> = items.iter().map(EvalRecord::from).collect();
            Ok(jsonl::to_string(&records))
        }
        CorpusFormat::Tsv => {
            let mut out = format!("{TSV_HEADER}\n");
            for it in items {
                if !it.outputs.is_empty() {
                    return Err(CorpusError::Unrepresentable(format!(
                        "item {:?} carries system outputs, which TSV cannot hold",
                        it.source.id
                    )));
                }
                let fields = [&it.source.text]
                    .into_iter()
                    .chain(it.refs.references.iter());
                for f in fields {
                    if f.contains('\t') || f.contains('\n') {
                        return Err(CorpusError::Unrepresentable(format!(
                            "item {:?} contains a tab or newline",
                            it.source.id
                        )));
                    }
                }
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    it.source.id,
                    it.source.dataset,
                    it.source.split,
                    it.source.text,
                    it.refs.references.join("\t")
                ));
            }
            Ok(out)
        }
    }
}

pub fn export_eval_set(items: &[EvalItem], path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    let body = render_corpus(items, format)?;
    fs::write(path, body).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn item(id: &str, source: &str, refs: &[&str]) -> EvalItem {
        EvalItem {
            source: SourceItem {
                id: id.into(),
                dataset: Dataset::Custom,
                split: Split::Test,
                text: source.into(),
            },
            refs: ReferenceSet {
                item_id: id.into(),
                references: refs.iter().map(|r| r.to_string()).collect(),
            },
            outputs: BTreeMap::new(),
        }
    }

    fn out(id: &str, system: &str, text: &str) -> SystemOutput {
        SystemOutput { item_id: id.into(), system_id: system.into(), text: text.into() }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse_corpus("", CorpusFormat::Jsonl), Err(CorpusError::NoRecords)));
        assert!(matches!(parse_corpus("  \n\n", CorpusFormat::Tsv), Err(CorpusError::NoRecords)));
    }

    #[test]
    fn zero_references_is_reported_with_line() {
        let text = concat!(
            r#"{"id":"a","dataset":"custom","split":"test","source":"x y","references":["x"]}"#,
            "\n",
            r#"{"id":"b","dataset":"custom","split":"test","source":"x y","references":[]}"#,
            "\n"
        );
        let err = parse_corpus(text, CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let line = r#"{"id":"a","dataset":"custom","split":"test","source":"x","references":["x"]}"#;
        let err = parse_corpus(&format!("{line}\n{line}\n"), CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn turk_items_must_carry_eight_references() {
        let line = r#"{"id":"a","dataset":"turk","split":"test","source":"x","references":["x","y"]}"#;
        let err = parse_corpus(line, CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, CorpusError::ReferenceCount { expected: 8, found: 2, .. }));
    }

    #[test]
    fn text_is_nfc_normalised() {
        // "e" + combining acute accent
        let line = "{\"id\":\"a\",\"dataset\":\"custom\",\"split\":\"test\",\"source\":\"Caf\\u0065\\u0301\",\"references\":[\"x\"]}";
        let c = parse_corpus(line, CorpusFormat::Jsonl).unwrap();
        assert_eq!(c.items[0].source.text, "Caf\u{e9}");
        assert_eq!(c.items[0].source.text.chars().count(), 4);
    }

    #[test]
    fn tsv_with_header_loads() {
        let text = "id\tdataset\tsplit\tsource\treference\nx1\tcustom\tvalidation\tA long one.\tA short one.\n";
        let c = parse_corpus(text, CorpusFormat::Tsv).unwrap();
        assert_eq!(c.items.len(), 1);
        assert_eq!(c.items[0].refs.references, vec!["A short one."]);
        assert_eq!(c.report.counts["custom/validation"], 1);
    }

    #[test]
    fn attach_outputs_extends_each_item() {
        let items = vec![item("1", "a", &["a"]), item("2", "b", &["b"])];
        let joined = attach_outputs(items, &[out("1", "s", "a1"), out("2", "s", "b1")]).unwrap();
        assert_eq!(joined[0].output("s"), Some("a1"));
        assert_eq!(joined[1].output("s"), Some("b1"));
    }

    #[test]
    fn attach_outputs_names_unknown_ids() {
        let items = vec![item("1", "a", &["a"])];
        let err = attach_outputs(items, &[out("x9", "s", "z"), out("1", "s", "a")]).unwrap_err();
        match err {
            CorpusError::UnknownItems(ids) => assert_eq!(ids, vec!["x9"]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn attach_outputs_rejects_duplicate_pairs() {
        let items = vec![item("1", "a", &["a"])];
        let err = attach_outputs(items, &[out("1", "s", "z"), out("1", "s", "y")]).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateOutput { .. }));
    }

    #[test]
    fn full_sample_is_a_permutation() {
        let items: Vec<_> = (0..20).map(|i| item(&format!("i{i:02}"), "s", &["r"])).collect();
        let s = sample_items(&items, 20, 7, SamplingScheme::Uniform).unwrap();
        let mut ids: Vec<_> = s.iter().map(|i| i.id().to_string()).collect();
        ids.sort();
        let mut want: Vec<_> = items.iter().map(|i| i.id().to_string()).collect();
        want.sort();
        assert_eq!(ids, want);
    }

    #[test]
    fn sample_is_seed_deterministic_and_order_independent() {
        let items: Vec<_> = (0..1077).map(|i| item(&format!("n{i:04}"), "s", &["r"])).collect();
        let a = sample_items(&items, 300, 42, SamplingScheme::Uniform).unwrap();
        let b = sample_items(&items, 300, 42, SamplingScheme::Uniform).unwrap();
        assert_eq!(a, b);
        let mut reversed = items.clone();
        reversed.reverse();
        let c = sample_items(&reversed, 300, 42, SamplingScheme::Uniform).unwrap();
        assert_eq!(a, c);
        let d = sample_items(&items, 300, 43, SamplingScheme::Uniform).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn oversampling_is_an_error() {
        let items = vec![item("1", "a", &["a"])];
        assert!(matches!(
            sample_items(&items, 2, 0, SamplingScheme::Uniform),
            Err(CorpusError::SampleTooLarge { requested: 2, available: 1 })
        ));
    }

    #[test]
    fn tsv_export_refuses_outputs() {
        let mut it = item("1", "a", &["a"]);
        it.outputs.insert("s".into(), "b".into());
        assert!(matches!(
            render_corpus(&[it], CorpusFormat::Tsv),
            Err(CorpusError::Unrepresentable(_))
        ));
    }
}

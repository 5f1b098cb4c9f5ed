//! Error-based annotation data model and its aggregate analyses.
//!
//! Task 1 produces [`ErrorRecord`]s: per (item, system, annotator), a list of
//! typed error annotations with character spans into the NFC-normalised
//! output (and optionally source). An empty list means the output is
//! error-free. Aggregate tables are computed over *consensus* records, one per
//! (item, system). Task 2 produces [`Rating`]s on a 1-3 scale.

mod aggregate;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use aggregate::{
    average_ratings, count_erroneous, error_type_counts, find_disagreements, labelwise_distribution,
    unique_errors_per_erroneous, Deviation, Disagreement, DimensionMeans, ErroneousTable, GroupCount,
    GroupKey, LabelwiseHistogram, RatingTable, TypeCountTable,
};
pub use render::{render_fig3, render_table6, render_table7, render_table8};

use crate::jsonl::{self, JsonlError};

/// Annotator id used for post-discussion consensus records.
pub const CONSENSUS_ANNOTATOR: &str = "consensus";

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("duplicate consensus record for item {item_id:?}, system {system_id:?}")]
    DuplicateConsensus { item_id: String, system_id: String },
    #[error("duplicate rating for item {item_id:?}, system {system_id:?}, annotator {annotator:?}")]
    DuplicateRating {
        item_id: String,
        system_id: String,
        annotator: String,
    },
    #[error("system {0:?} has no erroneous outputs")]
    NoErroneous(String),
    #[error("group {group}: item {item_id:?} was rated by {found:?}, expected {expected:?}")]
    RaterSetMismatch {
        group: String,
        item_id: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error(transparent)]
    Span(#[from] SpanError),
    #[error(transparent)]
    Parse(#[from] JsonlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    LackSimplicityLexical,
    LackSimplicityStructural,
    AlteredMeaningLexical,
    AlteredMeaningStructural,
    Coreference,
    Repetition,
    Hallucination,
}

impl ErrorType {
    pub const ALL: [ErrorType; 7] = [
        ErrorType::LackSimplicityLexical,
        ErrorType::LackSimplicityStructural,
        ErrorType::AlteredMeaningLexical,
        ErrorType::AlteredMeaningStructural,
        ErrorType::Coreference,
        ErrorType::Repetition,
        ErrorType::Hallucination,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorType::LackSimplicityLexical => "lack_simplicity_lexical",
            ErrorType::LackSimplicityStructural => "lack_simplicity_structural",
            ErrorType::AlteredMeaningLexical => "altered_meaning_lexical",
            ErrorType::AlteredMeaningStructural => "altered_meaning_structural",
            ErrorType::Coreference => "coreference",
            ErrorType::Repetition => "repetition",
            ErrorType::Hallucination => "hallucination",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorType::LackSimplicityLexical => "Lack of Simplicity - Lexical",
            ErrorType::LackSimplicityStructural => "Lack of Simplicity - Structural",
            ErrorType::AlteredMeaningLexical => "Altered Meaning - Lexical",
            ErrorType::AlteredMeaningStructural => "Altered Meaning - Structural",
            ErrorType::Coreference => "Coreference",
            ErrorType::Repetition => "Repetition",
            ErrorType::Hallucination => "Hallucination",
        }
    }

    /// Short annotator-facing definition.
    pub fn definition(self) -> &'static str {
        match self {
            ErrorType::LackSimplicityLexical => {
                "A word or phrase of the source is replaced by a harder or more elaborate expression."
            }
            ErrorType::LackSimplicityStructural => {
                "The sentence structure is rearranged in a way that makes it harder to read."
            }
            ErrorType::AlteredMeaningLexical => {
                "A word substitution changes the meaning of the source substantially."
            }
            ErrorType::AlteredMeaningStructural => {
                "A change of sentence structure changes the meaning of the source substantially."
            }
            ErrorType::Coreference => {
                "An entity needed to follow the main idea is replaced by a pronoun or a vague mention."
            }
            ErrorType::Repetition => "A fragment of the sentence is needlessly duplicated.",
            ErrorType::Hallucination => {
                "The output adds information that is wrong or absent from the source."
            }
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown error type {s:?}"))
    }
}

/// Half-open character range `[start, end)` in Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Result<Self, String> {
        if start < end {
            Ok(Span { start, end })
        } else {
            Err(format!("span [{start}, {end}) is empty or reversed"))
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Substring covered by the span, if it fits inside `text`.
    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        let mut idx = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
        let start = idx.nth(self.start)?;
        let end = if self.end == self.start {
            start
        } else {
            idx.nth(self.end - self.start - 1)?
        };
        Some(&text[start..end])
    }
}

impl TryFrom<[usize; 2]> for Span {
    type Error = String;

    fn try_from(v: [usize; 2]) -> Result<Self, Self::Error> {
        Span::new(v[0], v[1])
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{field} {span} exceeds text length {text_len}")]
pub struct SpanError {
    /// Path of the offending span, e.g. `annotations[1].output_spans[0]`.
    pub field: String,
    pub span: Span,
    pub text_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAnnotation")]
pub struct ErrorAnnotation {
    #[serde(rename = "type")]
    pub error_type: ErrorType,
    pub output_spans: Vec<Span>,
    pub source_spans: Vec<Span>,
}

#[derive(Deserialize)]
struct RawAnnotation {
    #[serde(rename = "type")]
    error_type: ErrorType,
    output_spans: Vec<Span>,
    #[serde(default)]
    source_spans: Vec<Span>,
}

impl TryFrom<RawAnnotation> for ErrorAnnotation {
    type Error = String;

    fn try_from(raw: RawAnnotation) -> Result<Self, Self::Error> {
        if raw.output_spans.is_empty() {
            return Err(format!("{} annotation has no output span", raw.error_type));
        }
        Ok(ErrorAnnotation {
            error_type: raw.error_type,
            output_spans: raw.output_spans,
            source_spans: raw.source_spans,
        })
    }
}

impl ErrorAnnotation {
    pub fn new(error_type: ErrorType, output_spans: Vec<Span>) -> Self {
        ErrorAnnotation { error_type, output_spans, source_spans: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    #[serde(rename = "id")]
    pub item_id: String,
    #[serde(rename = "system")]
    pub system_id: String,
    pub annotator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub annotations: Vec<ErrorAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl ErrorRecord {
    pub fn is_erroneous(&self) -> bool {
        !self.annotations.is_empty()
    }

    pub fn distinct_types(&self) -> BTreeSet<ErrorType> {
        self.annotations.iter().map(|a| a.error_type).collect()
    }

    pub fn type_multiplicity(&self) -> BTreeMap<ErrorType, usize> {
        let mut m = BTreeMap::new();
        for a in &self.annotations {
            *m.entry(a.error_type).or_default() += 1;
        }
        m
    }

    /// Checks every span against the annotated texts (character offsets).
    pub fn validate_spans(&self, output: &str, source: &str) -> Result<(), SpanError> {
        let out_len = output.chars().count();
        let src_len = source.chars().count();
        for (i, a) in self.annotations.iter().enumerate() {
            for (field, spans, len) in [
                ("output_spans", &a.output_spans, out_len),
                ("source_spans", &a.source_spans, src_len),
            ] {
                for (j, span) in spans.iter().enumerate() {
                    if span.end > len {
                        return Err(SpanError {
                            field: format!("annotations[{i}].{field}[{j}]"),
                            span: *span,
                            text_len: len,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatingDimension {
    Fluency,
    Meaning,
    Simplicity,
}

impl RatingDimension {
    pub const ALL: [RatingDimension; 3] =
        [RatingDimension::Fluency, RatingDimension::Meaning, RatingDimension::Simplicity];

    pub fn as_str(self) -> &'static str {
        match self {
            RatingDimension::Fluency => "fluency",
            RatingDimension::Meaning => "meaning",
            RatingDimension::Simplicity => "simplicity",
        }
    }
}

impl fmt::Display for RatingDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RatingDimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RatingDimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown dimension {s:?}"))
    }
}

/// One annotator's Likert scores (1-3) for one output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRating")]
pub struct Rating {
    #[serde(rename = "id")]
    pub item_id: String,
    #[serde(rename = "system")]
    pub system_id: String,
    pub annotator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub fluency: u8,
    pub meaning: u8,
    pub simplicity: u8,
}

#[derive(Deserialize)]
struct RawRating {
    id: String,
    system: String,
    annotator: String,
    #[serde(default)]
    dataset: Option<String>,
    fluency: Option<u8>,
    meaning: Option<u8>,
    simplicity: Option<u8>,
}

impl TryFrom<RawRating> for Rating {
    type Error = String;

    fn try_from(raw: RawRating) -> Result<Self, Self::Error> {
        let check = |name: &str, v: Option<u8>| match v {
            None => Err(format!("missing dimension {name}")),
            Some(x) if (1..=3).contains(&x) => Ok(x),
            Some(x) => Err(format!("{name} rating {x} outside 1..=3")),
        };
        Ok(Rating {
            fluency: check("fluency", raw.fluency)?,
            meaning: check("meaning", raw.meaning)?,
            simplicity: check("simplicity", raw.simplicity)?,
            item_id: raw.id,
            system_id: raw.system,
            annotator: raw.annotator,
            dataset: raw.dataset,
        })
    }
}

impl Rating {
    pub fn get(&self, dim: RatingDimension) -> u8 {
        match dim {
            RatingDimension::Fluency => self.fluency,
            RatingDimension::Meaning => self.meaning,
            RatingDimension::Simplicity => self.simplicity,
        }
    }
}

pub fn parse_error_records(text: &str) -> Result<Vec<ErrorRecord>, AnalysisError> {
    Ok(jsonl::parse_str(text)?.into_iter().map(|(_, r)| r).collect())
}

pub fn load_error_records(path: &Path) -> Result<Vec<ErrorRecord>, AnalysisError> {
    parse_error_records(&jsonl::read_to_string(path)?)
}

pub fn parse_ratings(text: &str) -> Result<Vec<Rating>, AnalysisError> {
    Ok(jsonl::parse_str(text)?.into_iter().map(|(_, r)| r).collect())
}

pub fn load_ratings(path: &Path) -> Result<Vec<Rating>, AnalysisError> {
    parse_ratings(&jsonl::read_to_string(path)?)
}

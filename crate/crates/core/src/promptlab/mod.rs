//! Prompt grid search for LLM simplification: the 15-spec grid, prompt
//! rendering from editable templates, generation clients with a
//! content-addressed cache, and best-prompt selection by validation SARI.

mod cache;
mod client;
mod render;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::JsonlError;

pub use cache::{cache_key, CacheEntry, GenerationCache};
pub use client::{
    garble, ClientError, EchoClient, GenerationClient, GenerationRequest, MockClient, MockOutput, MockRule,
    MockScript, ReplayClient, RequestContext,
};
pub use render::{render_prompt, ExampleManifest, FewShotExample, ManifestEntry, Templates};
pub use run::{generate_with_retry, run_grid, select_best, GridRow, GridTable, PromptSetup, RunConfig, Selection};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("{spec} needs {expected} example(s), got {got}")]
    ShotMismatch { spec: PromptSpec, expected: usize, got: usize },
    #[error("example {item_id} has {got} reference(s), {spec} needs {expected}")]
    TooFewReferences { spec: PromptSpec, item_id: String, expected: usize, got: usize },
    #[error("item {0} is one of the few-shot examples")]
    SourceInExamples(String),
    #[error("unknown prompt style {0:?}")]
    UnknownStyle(String),
    #[error("invalid prompt spec {0:?}")]
    InvalidSpec(String),
    #[error("template {path}: {source}")]
    Template { path: String, source: std::io::Error },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("no successful rows to select from")]
    NothingToSelect,
    #[error("invalid mock script: {0}")]
    MockScript(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Metric(#[from] crate::textmetrics::MetricError),
    #[error(transparent)]
    Io(#[from] JsonlError),
}

/// Which dataset's simplification guidelines the instructions follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStyle {
    Turk,
    Asset,
    Newsela,
}

impl PromptStyle {
    pub const ALL: [PromptStyle; 3] = [PromptStyle::Turk, PromptStyle::Asset, PromptStyle::Newsela];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptStyle::Turk => "turk",
            PromptStyle::Asset => "asset",
            PromptStyle::Newsela => "newsela",
        }
    }
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptStyle {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptStyle::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| PromptError::UnknownStyle(s.to_string()))
    }
}

pub const SHOT_COUNTS: [usize; 3] = [0, 1, 3];
pub const REFS_PER_EXAMPLE: [usize; 2] = [1, 3];

/// One cell of the grid. `refs_per_example` is `None` exactly when
/// `shots == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PromptSpec {
    pub style: PromptStyle,
    pub shots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refs_per_example: Option<usize>,
}

impl PromptSpec {
    pub fn zero_shot(style: PromptStyle) -> Self {
        Self { style, shots: 0, refs_per_example: None }
    }

    pub fn few_shot(style: PromptStyle, shots: usize, refs: usize) -> Self {
        Self { style, shots, refs_per_example: Some(refs) }
    }

    /// Compact id: `turk/0`, `asset/3/1`.
    pub fn label(&self) -> String {
        match self.refs_per_example {
            None => format!("{}/{}", self.style, self.shots),
            Some(r) => format!("{}/{}/{}", self.style, self.shots, r),
        }
    }

    /// e.g. "asset style + 3-shot + single ref"
    pub fn describe(&self) -> String {
        match self.refs_per_example {
            None => format!("{} style + zero-shot", self.style),
            Some(r) => format!(
                "{} style + {}-shot + {}",
                self.style,
                self.shots,
                if r == 1 { "single ref".to_string() } else { format!("{r} refs") }
            ),
        }
    }
}

impl fmt::Display for PromptSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for PromptSpec {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PromptError::InvalidSpec(s.to_string());
        let parts: Vec<&str> = s.trim().split('/').collect();
        let style: PromptStyle = parts.first().ok_or_else(bad)?.parse()?;
        let shots: usize = parts.get(1).and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let spec = match (shots, parts.len()) {
            (0, 2) => PromptSpec::zero_shot(style),
            (_, 3) if shots > 0 => PromptSpec::few_shot(style, shots, parts[2].parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

/// The 15 specs: per style, zero-shot then every (shots, refs) pair with
/// shots in {1, 3} and refs in {1, 3}.
pub fn build_grid() -> Vec<PromptSpec> {
    let mut grid = Vec::with_capacity(15);
    for style in PromptStyle::ALL {
        for shots in SHOT_COUNTS {
            if shots == 0 {
                grid.push(PromptSpec::zero_shot(style));
                continue;
            }
            for refs in REFS_PER_EXAMPLE {
                grid.push(PromptSpec::few_shot(style, shots, refs));
            }
        }
    }
    grid
}

/// One generated output, as stored in replay files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    #[serde(rename = "id")]
    pub item_id: String,
    pub spec: PromptSpec,
    pub rendered_prompt: String,
    pub output: String,
    #[serde(default)]
    pub client_meta: std::collections::BTreeMap<String, String>,
}

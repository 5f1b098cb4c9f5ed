use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GenerationRecord, PromptError, PromptSpec};
use crate::jsonl;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ClientError {
    /// Worth retrying (timeouts, rate limits).
    #[error("transient client failure: {0}")]
    Transient(String),
    #[error("client failure: {0}")]
    Fatal(String),
}

/// Bookkeeping passed alongside a request. Real clients ignore it; test
/// clients use it to look up scripted or recorded outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestContext {
    pub item_id: String,
    pub spec: PromptSpec,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationRequest {
    pub prompt: String,
    /// Decoding parameters, passed through untouched.
    pub params: BTreeMap<String, String>,
    pub context: RequestContext,
}

pub trait GenerationClient: Send + Sync {
    /// Stable name used in cache keys.
    fn identity(&self) -> String;

    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError>;
}

/// Returns the source unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoClient;

impl GenerationClient for EchoClient {
    fn identity(&self) -> String {
        "echo".into()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError> {
        Ok(request.context.source.clone())
    }
}

/// Serves outputs recorded in a previous run, keyed by (spec, item).
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    name: String,
    outputs: HashMap<(PromptSpec, String), String>,
}

impl ReplayClient {
    pub fn new(name: impl Into<String>, records: impl IntoIterator<Item = GenerationRecord>) -> Self {
        let outputs = records.into_iter().map(|r| ((r.spec, r.item_id), r.output)).collect();
        Self { name: name.into(), outputs }
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let records: Vec<GenerationRecord> = jsonl::read(path)?.into_iter().map(|(_, r)| r).collect();
        Ok(Self::new(format!("replay:{}", path.display()), records))
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

impl GenerationClient for ReplayClient {
    fn identity(&self) -> String {
        self.name.clone()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError> {
        let ctx = &request.context;
        self.outputs
            .get(&(ctx.spec, ctx.item_id.clone()))
            .cloned()
            .ok_or_else(|| ClientError::Fatal(format!("no recorded output for {} / {}", ctx.spec, ctx.item_id)))
    }
}

/// What a mock rule produces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockOutput {
    /// The source sentence.
    Echo,
    /// The source with every word replaced by one that cannot occur in it.
    Garble,
    Text(String),
    /// Always fails with a transient error.
    Fail,
}

/// Matches on spec label and item id; `None` matches anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<PromptSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<String>,
    pub output: MockOutput,
}

/// First matching rule wins; `default` applies otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default = "default_output")]
    pub default: MockOutput,
    #[serde(default)]
    pub rules: Vec<MockRule>,
}

fn default_output() -> MockOutput {
    MockOutput::Echo
}

/// `word -> "zq" + word`, so no output token can match a source token.
pub fn garble(text: &str) -> String {
    text.split_whitespace().map(|w| format!("zq{}", w.to_lowercase())).collect::<Vec<_>>().join(" ")
}

/// Scripted client for tests and dry runs.
#[derive(Debug, Clone)]
pub struct MockClient {
    name: String,
    script: MockScript,
    exact: HashMap<(PromptSpec, String), usize>,
    /// Indices of rules with a wildcard field, in script order.
    loose: Vec<usize>,
}

impl MockClient {
    pub fn new(name: impl Into<String>, script: MockScript) -> Self {
        let mut exact = HashMap::new();
        let mut loose = Vec::new();
        for (i, r) in script.rules.iter().enumerate() {
            match (r.spec, &r.item) {
                (Some(spec), Some(item)) => {
                    exact.entry((spec, item.clone())).or_insert(i);
                }
                _ => loose.push(i),
            }
        }
        Self { name: name.into(), script, exact, loose }
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = jsonl::read_to_string(path)?;
        let script = serde_json::from_str(&text).map_err(|e| PromptError::MockScript(e.to_string()))?;
        Ok(Self::new(format!("mock:{}", path.display()), script))
    }

    fn rule_for(&self, spec: PromptSpec, item: &str) -> &MockOutput {
        let exact = self.exact.get(&(spec, item.to_string())).copied();
        let first_loose = self.loose.iter().copied().find(|&i| {
            let r = &self.script.rules[i];
            r.spec.is_none_or(|s| s == spec) && r.item.as_deref().is_none_or(|i| i == item)
        });
        match (exact, first_loose) {
            (Some(a), Some(b)) => &self.script.rules[a.min(b)].output,
            (Some(i), None) | (None, Some(i)) => &self.script.rules[i].output,
            (None, None) => &self.script.default,
        }
    }
}

impl GenerationClient for MockClient {
    fn identity(&self) -> String {
        self.name.clone()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError> {
        let ctx = &request.context;
        match self.rule_for(ctx.spec, &ctx.item_id) {
            MockOutput::Echo => Ok(ctx.source.clone()),
            MockOutput::Garble => Ok(garble(&ctx.source)),
            MockOutput::Text(t) => Ok(t.clone()),
            MockOutput::Fail => Err(ClientError::Transient(format!("scripted failure for {}", ctx.item_id))),
        }
    }
}

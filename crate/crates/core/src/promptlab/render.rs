use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PromptError, PromptSpec, PromptStyle};
use crate::corpus::EvalItem;
use crate::jsonl;

/// Instruction blocks per style.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    by_style: BTreeMap<PromptStyle, String>,
}

impl Templates {
    /// The templates shipped in `templates/`.
    pub fn builtin() -> Self {
        let by_style = [
            (PromptStyle::Turk, include_str!("../../templates/turk.txt")),
            (PromptStyle::Asset, include_str!("../../templates/asset.txt")),
            (PromptStyle::Newsela, include_str!("../../templates/newsela.txt")),
        ]
        .into_iter()
        .map(|(s, t)| (s, t.to_string()))
        .collect();
        Self { by_style }
    }

    /// Reads `<dir>/{turk,asset,newsela}.txt`.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut by_style = BTreeMap::new();
        for style in PromptStyle::ALL {
            let path = dir.join(format!("{style}.txt"));
            let text = std::fs::read_to_string(&path)
                .map_err(|source| PromptError::Template { path: path.display().to_string(), source })?;
            by_style.insert(style, text);
        }
        Ok(Self { by_style })
    }

    pub fn instructions(&self, style: PromptStyle) -> &str {
        self.by_style[&style].trim_end()
    }
}

impl Default for Templates {
    fn default() -> Self {
        Self::builtin()
    }
}

/// A demonstration pair: a source and its chosen references, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    #[serde(rename = "id")]
    pub item_id: String,
    pub source: String,
    pub refs: Vec<String>,
}

/// Instructions, `spec.shots` examples (each showing its first
/// `refs_per_example` references) and the sentence to simplify.
pub fn render_prompt(
    templates: &Templates,
    spec: &PromptSpec,
    examples: &[FewShotExample],
    item_id: &str,
    source: &str,
) -> Result<String, PromptError> {
    if examples.len() != spec.shots {
        return Err(PromptError::ShotMismatch { spec: *spec, expected: spec.shots, got: examples.len() });
    }
    if examples.iter().any(|e| e.item_id == item_id) {
        return Err(PromptError::SourceInExamples(item_id.to_string()));
    }
    let mut out = String::from(templates.instructions(spec.style));
    out.push_str("\n\n");
    let per = spec.refs_per_example.unwrap_or(0);
    for (i, ex) in examples.iter().enumerate() {
        if ex.refs.len() < per {
            return Err(PromptError::TooFewReferences {
                spec: *spec,
                item_id: ex.item_id.clone(),
                expected: per,
                got: ex.refs.len(),
            });
        }
        writeln!(out, "Example {}:", i + 1).unwrap();
        writeln!(out, "Complex sentence: {}", ex.source).unwrap();
        if per == 1 {
            writeln!(out, "Simplified sentence: {}", ex.refs[0]).unwrap();
        } else {
            writeln!(out, "Simplified sentences:").unwrap();
            for (j, r) in ex.refs[..per].iter().enumerate() {
                writeln!(out, "{}. {}", j + 1, r).unwrap();
            }
        }
        out.push('\n');
    }
    write!(out, "Complex sentence: {source}\nSimplified sentence:").unwrap();
    Ok(out)
}

/// One manifest line: a hand-picked example item for a style and, optionally,
/// which of its references to show (indices, best first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub style: PromptStyle,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refs: Option<Vec<usize>>,
}

/// Hand-selected few-shot examples per style, in presentation order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExampleManifest {
    pub entries: Vec<ManifestEntry>,
}

impl ExampleManifest {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        Ok(Self { entries: jsonl::parse_str(text)?.into_iter().map(|(_, e)| e).collect() })
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        Self::parse(&jsonl::read_to_string(path)?)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    /// Examples for a style, looked up in `pool`.
    pub fn resolve(&self, style: PromptStyle, pool: &[EvalItem]) -> Result<Vec<FewShotExample>, PromptError> {
        let by_id: HashMap<&str, &EvalItem> = pool.iter().map(|it| (it.id(), it)).collect();
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.style == style)
            .map(|(line, e)| {
                let item = by_id.get(e.id.as_str()).ok_or_else(|| PromptError::Manifest {
                    line: line + 1,
                    message: format!("item {} not in example pool", e.id),
                })?;
                let all = &item.refs.references;
                let refs = match &e.refs {
                    None => all.clone(),
                    Some(idx) => idx
                        .iter()
                        .map(|&i| {
                            all.get(i).cloned().ok_or_else(|| PromptError::Manifest {
                                line: line + 1,
                                message: format!("item {} has no reference #{i}", e.id),
                            })
                        })
                        .collect::<Result<_, _>>()?,
                };
                Ok(FewShotExample { item_id: e.id.clone(), source: item.source.text.clone(), refs })
            })
            .collect()
    }

    /// The first `spec.shots` examples of the spec's style.
    pub fn examples_for(&self, spec: &PromptSpec, pool: &[EvalItem]) -> Result<Vec<FewShotExample>, PromptError> {
        let mut all = self.resolve(spec.style, pool)?;
        if all.len() < spec.shots {
            return Err(PromptError::ShotMismatch { spec: *spec, expected: spec.shots, got: all.len() });
        }
        all.truncate(spec.shots);
        Ok(all)
    }
}

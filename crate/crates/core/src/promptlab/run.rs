use std::collections::{BTreeMap, HashSet};
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::{cache_key, GenerationCache};
use super::client::{ClientError, GenerationClient, GenerationRequest, RequestContext};
use super::render::{render_prompt, ExampleManifest, FewShotExample, Templates};
use super::{GenerationRecord, PromptError, PromptSpec};
use crate::corpus::EvalItem;
use crate::textmetrics::{CorpusStat, SariStat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    /// Maximum concurrent generate calls.
    pub in_flight: usize,
    /// Attempts per item before the item counts as failed.
    pub max_attempts: usize,
    /// Decoding parameters forwarded to the client.
    pub params: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { in_flight: 4, max_attempts: 3, params: BTreeMap::new() }
    }
}

/// Retries transient failures up to `max_attempts` calls in total.
pub fn generate_with_retry(
    client: &dyn GenerationClient,
    request: &GenerationRequest,
    max_attempts: usize,
) -> Result<String, ClientError> {
    let mut last = ClientError::Fatal("no attempts made".into());
    for _ in 0..max_attempts.max(1) {
        match client.generate(request) {
            Ok(text) => return Ok(text),
            Err(e @ ClientError::Fatal(_)) => return Err(e),
            Err(e) => last = e,
        }
    }
    Err(last)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub spec: PromptSpec,
    /// Corpus SARI over the scored items; `None` if any generation failed.
    pub sari: Option<f64>,
    pub scored_items: usize,
    pub cache_hits: usize,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub rows: Vec<GridRow>,
    #[serde(default)]
    pub records: Vec<GenerationRecord>,
}

impl GridTable {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let w = self.rows.iter().map(|r| r.spec.describe().len()).max().unwrap_or(0);
        writeln!(out, "{:<w$}  {:>7}  {:>6}  {:>6}", "prompt", "SARI", "items", "cached").unwrap();
        for r in &self.rows {
            let sari = r.sari.map_or_else(|| format!("failed({})", r.failures.len()), |s| format!("{s:.2}"));
            writeln!(out, "{:<w$}  {:>7}  {:>6}  {:>6}", r.spec.describe(), sari, r.scored_items, r.cache_hits)
                .unwrap();
        }
        out
    }
}

/// Fixed inputs of a grid run: templates and the resolved examples.
#[derive(Debug, Clone)]
pub struct PromptSetup {
    pub templates: Templates,
    pub manifest: ExampleManifest,
    pub pool: Vec<EvalItem>,
}

impl PromptSetup {
    pub fn new(templates: Templates, manifest: ExampleManifest, pool: Vec<EvalItem>) -> Self {
        Self { templates, manifest, pool }
    }

    pub fn examples_for(&self, spec: &PromptSpec) -> Result<Vec<FewShotExample>, PromptError> {
        self.manifest.examples_for(spec, &self.pool)
    }
}

enum Outcome {
    Done { record: GenerationRecord, hit: bool, sari: SariStat },
    Failed(String),
}

fn run_item(
    client: &dyn GenerationClient,
    cache: &GenerationCache,
    setup: &PromptSetup,
    spec: &PromptSpec,
    examples: &[FewShotExample],
    item: &EvalItem,
    config: &RunConfig,
) -> Result<Outcome, PromptError> {
    let prompt = render_prompt(&setup.templates, spec, examples, item.id(), &item.source.text)?;
    let identity = client.identity();
    let key = cache_key(&identity, &prompt, &config.params);
    let (output, hit) = match cache.get(&key) {
        Some(out) => (out, true),
        None => {
            let request = GenerationRequest {
                prompt: prompt.clone(),
                params: config.params.clone(),
                context: RequestContext { item_id: item.id().to_string(), spec: *spec, source: item.source.text.clone() },
            };
            match generate_with_retry(client, &request, config.max_attempts) {
                Ok(out) => {
                    cache.insert(key.clone(), &identity, out.clone())?;
                    (out, false)
                }
                Err(e) => return Ok(Outcome::Failed(format!("{}: {e}", item.id()))),
            }
        }
    };
    let sari = SariStat::sentence(&item.source.text, &output, &item.refs.references)?;
    let mut client_meta = BTreeMap::new();
    client_meta.insert("client".to_string(), identity);
    client_meta.insert("cache_key".to_string(), key);
    let record =
        GenerationRecord { item_id: item.id().to_string(), spec: *spec, rendered_prompt: prompt, output, client_meta };
    Ok(Outcome::Done { record, hit, sari })
}

/// Generates and scores every validation item under every spec. Items used
/// as a spec's few-shot examples are left out of that spec's score.
pub fn run_grid(
    client: &dyn GenerationClient,
    cache: &GenerationCache,
    setup: &PromptSetup,
    items: &[EvalItem],
    grid: &[PromptSpec],
    config: &RunConfig,
) -> Result<GridTable, PromptError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.in_flight.max(1))
        .build()
        .map_err(|e| PromptError::Client(ClientError::Fatal(e.to_string())))?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut records = Vec::new();
    for spec in grid {
        let examples = setup.examples_for(spec)?;
        let skip: HashSet<&str> = examples.iter().map(|e| e.item_id.as_str()).collect();
        let scored: Vec<&EvalItem> = items.iter().filter(|it| !skip.contains(it.id())).collect();
        let outcomes: Vec<Outcome> = pool.install(|| {
            scored
                .par_iter()
                .map(|it| run_item(client, cache, setup, spec, &examples, it, config))
                .collect::<Result<_, _>>()
        })?;
        let mut stats = Vec::with_capacity(outcomes.len());
        let mut failures = Vec::new();
        let mut hits = 0;
        for o in outcomes {
            match o {
                Outcome::Done { record, hit, sari } => {
                    hits += usize::from(hit);
                    stats.push(sari);
                    records.push(record);
                }
                Outcome::Failed(msg) => failures.push(msg),
            }
        }
        let sari = (failures.is_empty() && !stats.is_empty()).then(|| SariStat::reduce(&stats).score());
        rows.push(GridRow { spec: *spec, sari, scored_items: scored.len(), cache_hits: hits, failures });
    }
    Ok(GridTable { rows, records })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub best: PromptSpec,
    pub best_sari: f64,
    pub worst: PromptSpec,
    pub worst_sari: f64,
    /// `best_sari - worst_sari`
    pub diff: f64,
    /// Other specs tied with the best; the earliest in grid order wins.
    pub ties: Vec<PromptSpec>,
    /// Specs left out because some generation failed.
    pub excluded: Vec<PromptSpec>,
}

impl Selection {
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "best:  {} (SARI {:.2})\nworst: {} (SARI {:.2})\ndiff:  {:.1}\n",
            self.best.describe(),
            self.best_sari,
            self.worst.describe(),
            self.worst_sari,
            self.diff
        );
        if !self.ties.is_empty() {
            let ties: Vec<String> = self.ties.iter().map(PromptSpec::label).collect();
            writeln!(out, "tied:  {}", ties.join(", ")).unwrap();
        }
        if !self.excluded.is_empty() {
            let ex: Vec<String> = self.excluded.iter().map(PromptSpec::label).collect();
            writeln!(out, "excluded (failures): {}", ex.join(", ")).unwrap();
        }
        out
    }
}

const TIE_EPS: f64 = 1e-9;

/// Highest-SARI spec among rows without failures.
pub fn select_best(rows: &[GridRow]) -> Result<Selection, PromptError> {
    let ok: Vec<(&PromptSpec, f64)> = rows.iter().filter_map(|r| r.sari.map(|s| (&r.spec, s))).collect();
    let excluded = rows.iter().filter(|r| r.sari.is_none()).map(|r| r.spec).collect();
    let (&best, best_sari) = ok
        .iter()
        .copied()
        .fold(None, |acc: Option<(&PromptSpec, f64)>, (s, v)| match acc {
            Some((_, bv)) if bv >= v - TIE_EPS => acc,
            _ => Some((s, v)),
        })
        .ok_or(PromptError::NothingToSelect)?;
    let (&worst, worst_sari) = ok
        .iter()
        .copied()
        .fold(None, |acc: Option<(&PromptSpec, f64)>, (s, v)| match acc {
            Some((_, wv)) if wv <= v + TIE_EPS => acc,
            _ => Some((s, v)),
        })
        .expect("non-empty");
    let ties = ok
        .iter()
        .filter(|(s, v)| **s != best && (v - best_sari).abs() <= TIE_EPS)
        .map(|(s, _)| **s)
        .collect();
    Ok(Selection { best, best_sari, worst, worst_sari, diff: best_sari - worst_sari, ties, excluded })
}

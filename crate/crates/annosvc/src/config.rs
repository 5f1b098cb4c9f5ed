use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use simpeval_core::corpus::nfc;
use simpeval_core::erroranalysis::ErrorType;

use crate::model::AnnotationTask;

/// Items in each qualification set.
pub const QUALIFICATION_ITEMS_TASK1: usize = 4;
pub const QUALIFICATION_ITEMS_TASK2: usize = 5;

pub const DEFAULT_REDUNDANCY: usize = 3;
pub const DEFAULT_SESSION_TTL_SECS: u64 = 12 * 3600;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatorConfig {
    pub id: String,
    /// Pre-shared credential presented when opening a session.
    pub credential: String,
    /// Tasks this annotator may work on without a reviewed qualification.
    #[serde(default)]
    pub qualified: Vec<AnnotationTask>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitConfig {
    pub id: String,
    pub system: String,
    #[serde(default)]
    pub dataset: Option<String>,
    pub source: String,
    pub output: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// Guideline text shown alongside every item. Built-in text if absent.
    #[serde(default)]
    pub guidelines: Option<String>,
    #[serde(default)]
    pub units: Vec<UnitConfig>,
    #[serde(default)]
    pub qualification: Vec<UnitConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_port")]
    pub port: u16,
    /// Append-only log file.
    pub store: PathBuf,
    #[serde(default = "default_redundancy")]
    pub redundancy: usize,
    #[serde(default = "default_ttl")]
    pub session_ttl_secs: u64,
    pub admin_token: String,
    pub annotators: Vec<AnnotatorConfig>,
    #[serde(default)]
    pub task1: TaskConfig,
    #[serde(default)]
    pub task2: TaskConfig,
}

fn default_bind() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

fn default_redundancy() -> usize {
    DEFAULT_REDUNDANCY
}

fn default_ttl() -> u64 {
    DEFAULT_SESSION_TTL_SECS
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: Config = toml::from_str(text)?;
        cfg.normalize();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative store paths resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::parse(&text)?;
        if cfg.store.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.store = dir.join(&cfg.store);
            }
        }
        Ok(cfg)
    }

    pub fn task(&self, task: AnnotationTask) -> &TaskConfig {
        match task {
            AnnotationTask::Task1 => &self.task1,
            AnnotationTask::Task2 => &self.task2,
        }
    }

    pub fn annotator(&self, id: &str) -> Option<&AnnotatorConfig> {
        self.annotators.iter().find(|a| a.id == id)
    }

    pub fn guidelines(&self, task: AnnotationTask) -> String {
        self.task(task).guidelines.clone().unwrap_or_else(|| default_guidelines(task))
    }

    fn normalize(&mut self) {
        for t in [&mut self.task1, &mut self.task2] {
            for u in t.units.iter_mut().chain(t.qualification.iter_mut()) {
                u.source = nfc(&u.source);
                u.output = nfc(&u.output);
            }
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.annotators.is_empty() {
            return bad("no annotators configured".into());
        }
        let mut ids = HashSet::new();
        let mut creds = HashSet::new();
        for a in &self.annotators {
            if !ids.insert(a.id.as_str()) {
                return bad(format!("duplicate annotator {:?}", a.id));
            }
            if a.credential.is_empty() || !creds.insert(a.credential.as_str()) {
                return bad(format!("annotator {:?} needs a unique, non-empty credential", a.id));
            }
        }
        if self.admin_token.is_empty() || creds.contains(self.admin_token.as_str()) {
            return bad("admin_token must be non-empty and differ from every annotator credential".into());
        }
        if self.redundancy == 0 || self.redundancy > self.annotators.len() {
            return bad(format!(
                "redundancy {} must be between 1 and the number of annotators ({})",
                self.redundancy,
                self.annotators.len()
            ));
        }
        for task in AnnotationTask::ALL {
            let t = self.task(task);
            for (name, units) in [("units", &t.units), ("qualification", &t.qualification)] {
                let mut seen = HashSet::new();
                for u in units {
                    if u.id.is_empty() || u.system.is_empty() || u.output.trim().is_empty() {
                        return bad(format!("{task}.{name}: unit {:?}/{:?} has an empty field", u.id, u.system));
                    }
                    if !seen.insert((u.id.as_str(), u.system.as_str())) {
                        return bad(format!("{task}.{name}: duplicate unit {}/{}", u.id, u.system));
                    }
                }
            }
            let need = qualification_size(task);
            if !t.qualification.is_empty() && t.qualification.len() != need {
                return bad(format!(
                    "{task}.qualification has {} items, expected {need}",
                    t.qualification.len()
                ));
            }
        }
        Ok(())
    }
}

pub fn qualification_size(task: AnnotationTask) -> usize {
    match task {
        AnnotationTask::Task1 => QUALIFICATION_ITEMS_TASK1,
        AnnotationTask::Task2 => QUALIFICATION_ITEMS_TASK2,
    }
}

pub fn default_guidelines(task: AnnotationTask) -> String {
    match task {
        AnnotationTask::Task1 => {
            let mut s = String::from(
                "Mark every error in the simplified sentence by selecting its span and choosing an error type. \
                 Spans may overlap. Leave the list empty if the output has no errors.\n",
            );
            for t in ErrorType::ALL {
                s.push_str(&format!("\n{}: {}", t.label(), t.definition()));
            }
            s
        }
        AnnotationTask::Task2 => "Rate fluency, meaning preservation and simplicity from 1 to 3. \
             Avoid the neutral rating 2 unless the decision is genuinely hard: \
             use 1 for outputs that are disfluent, lose much of the original meaning or are not simpler, \
             and 3 for outputs that are fluent, preserve the meaning and are much simpler."
            .into(),
    }
}

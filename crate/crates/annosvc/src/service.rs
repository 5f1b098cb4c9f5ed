use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use simpeval_core::erroranalysis::{ErrorRecord, ErrorType, Rating, RatingDimension};
use simpeval_core::jsonl;

use crate::config::{qualification_size, Config, UnitConfig};
use crate::model::{
    AnnotationTask, Assignment, AssignmentState, LogEntry, Queue, ReviewDecision, Session, SessionTask,
    StoredSubmission, UnitRef,
};
use crate::store::{Log, StoreError};

pub trait Clock: Send + Sync {
    /// Seconds since the Unix epoch.
    fn now(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
    }
}

/// Settable clock for tests.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(now: u64) -> Self {
        ManualClock(AtomicU64::new(now))
    }

    pub fn advance(&self, secs: u64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

impl<C: Clock + ?Sized> Clock for std::sync::Arc<C> {
    fn now(&self) -> u64 {
        (**self).now()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    Auth(String),
    #[error("{0}")]
    Forbidden(String),
    #[error("annotator {annotator} must pass the {task} qualification first")]
    QualificationRequired { annotator: String, task: AnnotationTask },
    #[error("unit {}/{} is not assigned to annotator {annotator} in {queue}", unit.id, unit.system)]
    NotAssigned { unit: UnitRef, annotator: String, queue: Queue },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("annotator {annotator} has completed {done} of {need} {task} qualification items")]
    IncompleteQualification { annotator: String, task: AnnotationTask, done: usize, need: usize },
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Auth(_) => "unauthorized",
            ServiceError::Forbidden(_) => "forbidden",
            ServiceError::QualificationRequired { .. } => "qualification_required",
            ServiceError::NotAssigned { .. } => "not_assigned",
            ServiceError::Validation { .. } => "validation",
            ServiceError::IncompleteQualification { .. } => "incomplete_qualification",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Store(_) => "store",
        }
    }

    fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        ServiceError::Validation { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    pub annotator_id: String,
    pub task: SessionTask,
    pub credential: String,
    /// Required for qualification sessions.
    #[serde(default)]
    pub target: Option<AnnotationTask>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRequest {
    pub unit: UnitRef,
    pub payload: Value,
    pub client_version: String,
    /// Client-generated; a retried submission with the same key is a no-op.
    pub idempotency_key: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubmitAck {
    pub record_id: String,
    pub version: u32,
    pub unit: UnitRef,
    /// True when the request replayed an earlier submission.
    pub duplicate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub submitted: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorTypeInfo {
    #[serde(rename = "type")]
    pub error_type: ErrorType,
    pub label: &'static str,
    pub definition: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Widgets {
    ErrorSpans {
        error_types: Vec<ErrorTypeInfo>,
        /// Spans are half-open character offsets into the served texts.
        offsets: &'static str,
        guidelines: String,
    },
    Likert {
        dimensions: Vec<RatingDimension>,
        scale: [u8; 3],
        neutral: u8,
        guidelines: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemPayload {
    pub queue: String,
    pub unit: UnitRef,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub source: String,
    pub output: String,
    pub widgets: Widgets,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NextResponse {
    pub done: bool,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub item: Option<ItemPayload>,
    pub progress: Progress,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewRequest {
    pub annotator_id: String,
    pub task: AnnotationTask,
    pub passed: bool,
    #[serde(default)]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewReport {
    pub annotator_id: String,
    pub task: AnnotationTask,
    pub passed: bool,
    pub reviewed_at: u64,
    /// The reviewed qualification answers, latest version per item.
    pub submissions: Vec<Value>,
}

#[derive(Debug, Serialize)]
struct HistoryLine<'a> {
    record_id: &'a str,
    version: u32,
    annotator: &'a str,
    client_version: &'a str,
    submitted_at: u64,
    record: &'a Value,
}

/// Round-robin assignment: unit `i` takes the next `redundancy` annotator
/// slots, starting at `i * redundancy` (mod the annotator count), so loads
/// differ by at most one. Qualification items go to everyone.
fn assigned(config: &Config, queue: Queue, annotator_idx: usize, unit_idx: usize) -> bool {
    match queue {
        Queue::Qualification(_) => true,
        Queue::Main(_) => {
            let n = config.annotators.len();
            let start = (unit_idx * config.redundancy) % n;
            (annotator_idx + n - start) % n < config.redundancy
        }
    }
}

fn units(config: &Config, queue: Queue) -> &[UnitConfig] {
    match queue {
        Queue::Main(t) => &config.task(t).units,
        Queue::Qualification(t) => &config.task(t).qualification,
    }
}

type SubmissionKey = (Queue, UnitRef, String);

#[derive(Debug, Default)]
struct State {
    sessions: HashMap<String, Session>,
    active: HashMap<(String, SessionTask), String>,
    submissions: Vec<StoredSubmission>,
    latest: HashMap<SubmissionKey, usize>,
    idempotency: HashMap<(String, String), usize>,
    reviews: HashMap<(String, AnnotationTask), ReviewDecision>,
}

impl State {
    fn apply(&mut self, entry: LogEntry) {
        match entry {
            LogEntry::Session(s) => {
                self.active.insert((s.annotator_id.clone(), s.task), s.token.clone());
                self.sessions.insert(s.token.clone(), s);
            }
            LogEntry::Submission(s) => {
                let idx = self.submissions.len();
                self.latest.insert((s.queue, s.unit.clone(), s.annotator_id.clone()), idx);
                self.idempotency.insert((s.annotator_id.clone(), s.idempotency_key.clone()), idx);
                self.submissions.push(s);
            }
            LogEntry::Review(r) => {
                self.reviews.insert((r.annotator_id.clone(), r.task), r);
            }
        }
    }

    fn latest_for(&self, queue: Queue, unit: &UnitRef, annotator: &str) -> Option<&StoredSubmission> {
        self.latest.get(&(queue, unit.clone(), annotator.to_string())).map(|&i| &self.submissions[i])
    }
}

/// The annotation service: all operations, independent of HTTP.
pub struct Service {
    config: Config,
    clock: Box<dyn Clock>,
    log: Mutex<Log>,
    state: RwLock<State>,
}

impl Service {
    /// Opens the configured store file and replays it.
    pub fn open(config: Config, clock: Box<dyn Clock>) -> Result<Self, StoreError> {
        let (log, entries) = Log::open(&config.store)?;
        Ok(Self::from_log(config, clock, log, entries))
    }

    pub fn in_memory(config: Config, clock: Box<dyn Clock>) -> Self {
        Self::from_log(config, clock, Log::in_memory(), Vec::new())
    }

    fn from_log(config: Config, clock: Box<dyn Clock>, log: Log, entries: Vec<LogEntry>) -> Self {
        let mut state = State::default();
        for e in entries {
            state.apply(e);
        }
        Service { config, clock, log: Mutex::new(log), state: RwLock::new(state) }
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    fn write(&self, entry: LogEntry) -> Result<(), ServiceError> {
        self.log.lock().append(&entry)?;
        self.state.write().apply(entry);
        Ok(())
    }

    fn annotator_index(&self, id: &str) -> Option<usize> {
        self.config.annotators.iter().position(|a| a.id == id)
    }

    pub fn is_qualified(&self, annotator: &str, task: AnnotationTask) -> bool {
        let preset = self.config.annotator(annotator).is_some_and(|a| a.qualified.contains(&task));
        preset || self.state.read().reviews.get(&(annotator.to_string(), task)).is_some_and(|r| r.passed)
    }

    pub fn create_session(&self, req: &SessionRequest) -> Result<Session, ServiceError> {
        let annotator = self
            .config
            .annotator(&req.annotator_id)
            .filter(|a| a.credential == req.credential)
            .ok_or_else(|| ServiceError::Auth("invalid annotator id or credential".into()))?;
        let target = match req.task {
            SessionTask::Qualification => {
                let t = req
                    .target
                    .ok_or_else(|| ServiceError::validation("target", "qualification sessions need a target task"))?;
                if self.config.task(t).qualification.is_empty() {
                    return Err(ServiceError::NotFound(format!("no qualification set configured for {t}")));
                }
                Some(t)
            }
            SessionTask::Task1 | SessionTask::Task2 => {
                let t = if req.task == SessionTask::Task1 { AnnotationTask::Task1 } else { AnnotationTask::Task2 };
                if req.target.is_some_and(|x| x != t) {
                    return Err(ServiceError::validation("target", "only qualification sessions take a target"));
                }
                if !self.is_qualified(&annotator.id, t) {
                    return Err(ServiceError::QualificationRequired { annotator: annotator.id.clone(), task: t });
                }
                None
            }
        };
        let now = self.clock.now();
        let session = Session {
            token: uuid::Uuid::new_v4().simple().to_string(),
            annotator_id: annotator.id.clone(),
            task: req.task,
            target,
            created_at: now,
            expires_at: now + self.config.session_ttl_secs,
        };
        self.write(LogEntry::Session(session.clone()))?;
        Ok(session)
    }

    /// Resolves a token to its session if it is current and unexpired.
    pub fn authenticate(&self, token: &str) -> Result<Session, ServiceError> {
        let state = self.state.read();
        let s = state.sessions.get(token).ok_or_else(|| ServiceError::Auth("unknown session token".into()))?;
        if state.active.get(&(s.annotator_id.clone(), s.task)).map(String::as_str) != Some(token) {
            return Err(ServiceError::Auth("session was replaced by a newer one".into()));
        }
        if self.clock.now() >= s.expires_at {
            return Err(ServiceError::Auth("session expired".into()));
        }
        Ok(s.clone())
    }

    fn require_admin(&self, token: &str) -> Result<(), ServiceError> {
        if token == self.config.admin_token {
            Ok(())
        } else {
            Err(ServiceError::Forbidden("admin token required".into()))
        }
    }

    /// Units of `queue` assigned to `annotator`, in configuration order.
    fn assigned_units(&self, queue: Queue, annotator: &str) -> Vec<&UnitConfig> {
        let Some(a) = self.annotator_index(annotator) else { return Vec::new() };
        units(&self.config, queue).iter().enumerate().filter(|(i, _)| assigned(&self.config, queue, a, *i)).map(|(_, u)| u).collect()
    }

    /// Every (unit, annotator) assignment of a queue with its state.
    pub fn assignments(&self, queue: Queue) -> Vec<Assignment> {
        let state = self.state.read();
        let mut out = Vec::new();
        for (i, u) in units(&self.config, queue).iter().enumerate() {
            let unit = UnitRef { id: u.id.clone(), system: u.system.clone() };
            for (a, ann) in self.config.annotators.iter().enumerate() {
                if assigned(&self.config, queue, a, i) {
                    let done = state.latest_for(queue, &unit, &ann.id).is_some();
                    out.push(Assignment {
                        unit: unit.clone(),
                        annotator_id: ann.id.clone(),
                        state: if done { AssignmentState::Submitted } else { AssignmentState::Pending },
                    });
                }
            }
        }
        out
    }

    fn widgets(&self, task: AnnotationTask) -> Widgets {
        let guidelines = self.config.guidelines(task);
        match task {
            AnnotationTask::Task1 => Widgets::ErrorSpans {
                error_types: ErrorType::ALL
                    .into_iter()
                    .map(|t| ErrorTypeInfo { error_type: t, label: t.label(), definition: t.definition() })
                    .collect(),
                offsets: "unicode scalar values of the NFC text, half-open",
                guidelines,
            },
            AnnotationTask::Task2 => Widgets::Likert {
                dimensions: RatingDimension::ALL.to_vec(),
                scale: [1, 2, 3],
                neutral: 2,
                guidelines,
            },
        }
    }

    /// First pending unit for the session's annotator; stable until it is
    /// submitted.
    pub fn next_item(&self, token: &str) -> Result<NextResponse, ServiceError> {
        let session = self.authenticate(token)?;
        let queue = session.queue();
        let mine = self.assigned_units(queue, &session.annotator_id);
        let state = self.state.read();
        let mut pending = None;
        let mut submitted = 0;
        for u in &mine {
            let unit = UnitRef { id: u.id.clone(), system: u.system.clone() };
            if state.latest_for(queue, &unit, &session.annotator_id).is_some() {
                submitted += 1;
            } else if pending.is_none() {
                pending = Some((unit, *u));
            }
        }
        let progress = Progress { submitted, total: mine.len() };
        let item = pending.map(|(unit, u)| ItemPayload {
            queue: queue.to_string(),
            unit,
            dataset: u.dataset.clone(),
            source: u.source.clone(),
            output: u.output.clone(),
            widgets: self.widgets(queue.task()),
        });
        Ok(NextResponse { done: item.is_none(), item, progress })
    }

    pub fn submit(&self, token: &str, req: &SubmitRequest) -> Result<SubmitAck, ServiceError> {
        let session = self.authenticate(token)?;
        let queue = session.queue();
        let annotator = session.annotator_id.clone();
        if req.idempotency_key.is_empty() {
            return Err(ServiceError::validation("idempotency_key", "must not be empty"));
        }
        let unit_cfg = self
            .assigned_units(queue, &annotator)
            .into_iter()
            .find(|u| u.id == req.unit.id && u.system == req.unit.system)
            .cloned()
            .ok_or_else(|| ServiceError::NotAssigned { unit: req.unit.clone(), annotator: annotator.clone(), queue })?;
        let record = validate_payload(queue.task(), &unit_cfg, &annotator, &req.payload)?;

        let mut log = self.log.lock();
        let (version, replay) = {
            let state = self.state.read();
            if let Some(&i) = state.idempotency.get(&(annotator.clone(), req.idempotency_key.clone())) {
                let prev = &state.submissions[i];
                if prev.queue == queue && prev.unit == req.unit && prev.record == record {
                    (prev.version, Some(prev.record_id.clone()))
                } else {
                    return Err(ServiceError::Conflict(format!(
                        "idempotency key {:?} was already used for a different submission",
                        req.idempotency_key
                    )));
                }
            } else {
                (state.latest_for(queue, &req.unit, &annotator).map_or(1, |s| s.version + 1), None)
            }
        };
        if let Some(record_id) = replay {
            return Ok(SubmitAck { record_id, version, unit: req.unit.clone(), duplicate: true });
        }
        let stored = StoredSubmission {
            record_id: format!("{queue}/{}/{}/{annotator}/v{version}", req.unit.id, req.unit.system),
            queue,
            unit: req.unit.clone(),
            annotator_id: annotator,
            version,
            idempotency_key: req.idempotency_key.clone(),
            client_version: req.client_version.clone(),
            submitted_at: self.clock.now(),
            record,
        };
        let ack = SubmitAck { record_id: stored.record_id.clone(), version, unit: req.unit.clone(), duplicate: false };
        let entry = LogEntry::Submission(stored);
        log.append(&entry)?;
        self.state.write().apply(entry);
        Ok(ack)
    }

    /// Latest version of every main-queue record of `task`, sorted by
    /// (item, system, annotator), as analysis-schema JSONL. With `history`,
    /// every version in that order, wrapped with its version metadata.
    pub fn export(&self, admin_token: &str, task: AnnotationTask, history: bool) -> Result<String, ServiceError> {
        self.require_admin(admin_token)?;
        let state = self.state.read();
        let queue = Queue::Main(task);
        let key = |s: &StoredSubmission| (s.unit.clone(), s.annotator_id.clone(), s.version);
        if history {
            let mut subs: Vec<&StoredSubmission> = state.submissions.iter().filter(|s| s.queue == queue).collect();
            subs.sort_by_key(|s| key(s));
            let lines: Vec<HistoryLine> = subs
                .iter()
                .map(|s| HistoryLine {
                    record_id: &s.record_id,
                    version: s.version,
                    annotator: &s.annotator_id,
                    client_version: &s.client_version,
                    submitted_at: s.submitted_at,
                    record: &s.record,
                })
                .collect();
            return Ok(jsonl::to_string(&lines));
        }
        let mut latest: Vec<&StoredSubmission> =
            state.latest.iter().filter(|(k, _)| k.0 == queue).map(|(_, &i)| &state.submissions[i]).collect();
        latest.sort_by_key(|s| key(s));
        let records: Vec<Value> = latest.iter().map(|s| s.record.clone()).collect();
        match task {
            AnnotationTask::Task1 => Ok(jsonl::to_string(&typed::<ErrorRecord>(records)?)),
            AnnotationTask::Task2 => Ok(jsonl::to_string(&typed::<Rating>(records)?)),
        }
    }

    /// Records an admin's pass/fail decision on a completed qualification set.
    pub fn qualification_review(&self, admin_token: &str, req: &ReviewRequest) -> Result<ReviewReport, ServiceError> {
        self.require_admin(admin_token)?;
        if self.config.annotator(&req.annotator_id).is_none() {
            return Err(ServiceError::NotFound(format!("unknown annotator {:?}", req.annotator_id)));
        }
        let queue = Queue::Qualification(req.task);
        let need = qualification_size(req.task);
        let items = &self.config.task(req.task).qualification;
        let submissions: Vec<Value> = {
            let state = self.state.read();
            items
                .iter()
                .filter_map(|u| {
                    let unit = UnitRef { id: u.id.clone(), system: u.system.clone() };
                    state.latest_for(queue, &unit, &req.annotator_id).map(|s| s.record.clone())
                })
                .collect()
        };
        if items.len() != need || submissions.len() < need {
            return Err(ServiceError::IncompleteQualification {
                annotator: req.annotator_id.clone(),
                task: req.task,
                done: submissions.len(),
                need,
            });
        }
        let decision = ReviewDecision {
            annotator_id: req.annotator_id.clone(),
            task: req.task,
            passed: req.passed,
            notes: req.notes.clone(),
            reviewed_at: self.clock.now(),
        };
        self.write(LogEntry::Review(decision.clone()))?;
        Ok(ReviewReport {
            annotator_id: decision.annotator_id,
            task: decision.task,
            passed: decision.passed,
            reviewed_at: decision.reviewed_at,
            submissions,
        })
    }
}

fn typed<T: DeserializeOwned>(values: Vec<Value>) -> Result<Vec<T>, ServiceError> {
    values
        .into_iter()
        .map(|v| serde_json::from_value(v).map_err(|e| ServiceError::Conflict(format!("stored record invalid: {e}"))))
        .collect()
}

fn deserialize_at<T: DeserializeOwned>(value: Value) -> Result<T, ServiceError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "payload".to_string() } else { format!("payload.{path}") };
        ServiceError::validation(field, e.into_inner().to_string())
    })
}

/// Turns a submitted payload into an analysis-schema record for `unit`,
/// checking field names, error types, ranges and span bounds.
pub fn validate_payload(
    task: AnnotationTask,
    unit: &UnitConfig,
    annotator: &str,
    payload: &Value,
) -> Result<Value, ServiceError> {
    let obj = payload.as_object().ok_or_else(|| ServiceError::validation("payload", "must be a JSON object"))?;
    let allowed: &[&str] = match task {
        AnnotationTask::Task1 => &["annotations", "notes"],
        AnnotationTask::Task2 => &["fluency", "meaning", "simplicity"],
    };
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ServiceError::validation(format!("payload.{k}"), "unknown field"));
    }
    let mut full: Map<String, Value> = obj.clone();
    full.insert("id".into(), Value::String(unit.id.clone()));
    full.insert("system".into(), Value::String(unit.system.clone()));
    full.insert("annotator".into(), Value::String(annotator.to_string()));
    if let Some(d) = &unit.dataset {
        full.insert("dataset".into(), Value::String(d.clone()));
    }
    match task {
        AnnotationTask::Task1 => {
            if !obj.contains_key("annotations") {
                return Err(ServiceError::validation("payload.annotations", "missing field"));
            }
            let record: ErrorRecord = deserialize_at(Value::Object(full))?;
            record
                .validate_spans(&unit.output, &unit.source)
                .map_err(|e| ServiceError::validation(format!("payload.{}", e.field), e.to_string()))?;
            Ok(serde_json::to_value(&record).expect("record serializes"))
        }
        AnnotationTask::Task2 => {
            for d in RatingDimension::ALL {
                if !obj.contains_key(d.as_str()) {
                    return Err(ServiceError::validation(format!("payload.{d}"), "missing rating"));
                }
            }
            let rating: Rating = deserialize_at(Value::Object(full))?;
            Ok(serde_json::to_value(&rating).expect("rating serializes"))
        }
    }
}

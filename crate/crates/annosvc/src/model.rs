use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationTask {
    /// Error identification.
    Task1,
    /// Likert rating.
    Task2,
}

impl AnnotationTask {
    pub const ALL: [AnnotationTask; 2] = [AnnotationTask::Task1, AnnotationTask::Task2];

    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationTask::Task1 => "task1",
            AnnotationTask::Task2 => "task2",
        }
    }
}

impl fmt::Display for AnnotationTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnnotationTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AnnotationTask::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionTask {
    Task1,
    Task2,
    Qualification,
}

/// A work queue: the main item list of a task, or its qualification set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "queue", content = "task", rename_all = "lowercase")]
pub enum Queue {
    Main(AnnotationTask),
    Qualification(AnnotationTask),
}

impl Queue {
    pub fn task(self) -> AnnotationTask {
        match self {
            Queue::Main(t) | Queue::Qualification(t) => t,
        }
    }

    pub fn session_task(self) -> SessionTask {
        match self {
            Queue::Main(AnnotationTask::Task1) => SessionTask::Task1,
            Queue::Main(AnnotationTask::Task2) => SessionTask::Task2,
            Queue::Qualification(_) => SessionTask::Qualification,
        }
    }
}

impl fmt::Display for Queue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Queue::Main(t) => write!(f, "{t}"),
            Queue::Qualification(t) => write!(f, "qualification:{t}"),
        }
    }
}

/// An (item, system) pair to annotate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitRef {
    pub id: String,
    pub system: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub annotator_id: String,
    pub task: SessionTask,
    /// Which task a qualification session qualifies for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<AnnotationTask>,
    pub created_at: u64,
    pub expires_at: u64,
}

impl Session {
    pub fn queue(&self) -> Queue {
        match (self.task, self.target) {
            (SessionTask::Task1, _) => Queue::Main(AnnotationTask::Task1),
            (SessionTask::Task2, _) => Queue::Main(AnnotationTask::Task2),
            (SessionTask::Qualification, t) => Queue::Qualification(t.unwrap_or(AnnotationTask::Task1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssignmentState {
    Pending,
    Submitted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub unit: UnitRef,
    pub annotator_id: String,
    pub state: AssignmentState,
}

/// One accepted submission as stored in the log. `record` is the
/// analysis-schema record (an error record or a rating).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSubmission {
    pub record_id: String,
    pub queue: Queue,
    pub unit: UnitRef,
    pub annotator_id: String,
    pub version: u32,
    pub idempotency_key: String,
    pub client_version: String,
    pub submitted_at: u64,
    pub record: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub annotator_id: String,
    pub task: AnnotationTask,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub reviewed_at: u64,
}

/// One line of the append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Session(Session),
    Submission(StoredSubmission),
    Review(ReviewDecision),
}

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use serde::{Deserialize, Serialize};
use shapeattn::dataset::{
    validate_submission, ImageManifest, RejectReason, SetLabel, SketchRecord, ValidationConfig,
    Verdict,
};
use thiserror::Error;
use uuid::Uuid;

use crate::store::RecordSink;

/// Server time in milliseconds since the Unix epoch.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }
}

/// Clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        Self(AtomicU64::new(start_ms))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// Collection condition of a cell, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Ten,
    Twenty,
    TwentyBaseline,
    Forty,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Ten,
        Condition::Twenty,
        Condition::TwentyBaseline,
        Condition::Forty,
    ];

    pub fn time_limit_s(self) -> u32 {
        match self {
            Condition::Ten => 10,
            Condition::Twenty | Condition::TwentyBaseline => 20,
            Condition::Forty => 40,
        }
    }

    pub fn set_label(self) -> SetLabel {
        match self {
            Condition::TwentyBaseline => SetLabel::Baseline20s,
            _ => SetLabel::Primary,
        }
    }

    pub fn from_parts(time_limit_s: u32, set_label: SetLabel) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.time_limit_s() == time_limit_s && c.set_label() == set_label)
    }

    pub fn label(self) -> &'static str {
        match self {
            Condition::Ten => "10",
            Condition::Twenty => "20",
            Condition::TwentyBaseline => "20-baseline",
            Condition::Forty => "40",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceConfig {
    /// Accepted sketches wanted per cell.
    pub target: usize,
    /// Lifetime of an unanswered assignment.
    pub expiry_ms: u64,
    /// Time for reading instructions before the timer starts.
    pub instruction_allowance_ms: u64,
    pub validation: ValidationConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            target: 10,
            expiry_ms: 10 * 60 * 1000,
            instruction_allowance_ms: 60 * 1000,
            validation: ValidationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAssignment {
    pub task_id: String,
    pub image_id: String,
    pub time_limit_s: u32,
    pub set_label: SetLabel,
    /// Milliseconds since the Unix epoch.
    pub issued_at: u64,
    pub expires_at: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssignError {
    #[error("collection complete")]
    CollectionComplete,
    #[error("no eligible task")]
    NoEligibleTask,
}

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("task {0} has expired")]
    Expired(String),
    #[error("task {0} was already submitted")]
    Duplicate(String),
    #[error("cell for task {0} is already full")]
    CellFull(String),
    #[error("storing submission: {0}")]
    Storage(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Submission {
    Accepted { sketch_id: String },
    Rejected(RejectReason),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CellCoverage {
    pub accepted: usize,
    pub in_flight: usize,
}

impl CellCoverage {
    pub fn total(&self) -> usize {
        self.accepted + self.in_flight
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellStats {
    pub image_id: String,
    pub condition: String,
    pub time_limit_s: u32,
    pub set_label: SetLabel,
    pub accepted: usize,
    pub in_flight: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub target: usize,
    pub complete: bool,
    pub accepted: usize,
    pub in_flight: usize,
    pub cells: Vec<CellStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TaskState {
    Open,
    Accepted,
    Rejected,
    Expired,
}

#[derive(Debug)]
struct Task {
    assignment: TaskAssignment,
    drawer_id: String,
    condition: Condition,
    state: TaskState,
}

type CellKey = (String, Condition);

/// Assignment and submission bookkeeping. Not internally synchronized; the
/// HTTP layer holds it behind one lock.
pub struct CaptureService {
    manifest: Arc<ImageManifest>,
    config: ServiceConfig,
    clock: Arc<dyn Clock>,
    sink: Box<dyn RecordSink>,
    cells: BTreeMap<CellKey, CellCoverage>,
    tasks: HashMap<String, Task>,
    /// Open tasks by expiry.
    open: BTreeSet<(u64, String)>,
    /// Sketch ids already in the store from earlier runs.
    stored: HashSet<String>,
    /// (image, time limit) pairs each drawer has been given.
    seen: HashMap<String, HashSet<(String, u32)>>,
}

impl fmt::Debug for CaptureService {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CaptureService")
            .field("config", &self.config)
            .field("cells", &self.cells.len())
            .field("tasks", &self.tasks.len())
            .finish_non_exhaustive()
    }
}

impl CaptureService {
    /// Builds the service over every manifest image, with coverage rebuilt
    /// from `existing` store records.
    pub fn new(
        manifest: Arc<ImageManifest>,
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
        sink: Box<dyn RecordSink>,
        existing: &[SketchRecord],
    ) -> Self {
        let cells = manifest
            .entries()
            .flat_map(|e| {
                Condition::ALL
                    .into_iter()
                    .map(|c| ((e.image_id.clone(), c), CellCoverage::default()))
            })
            .collect();
        let mut svc = Self {
            manifest,
            config,
            clock,
            sink,
            cells,
            tasks: HashMap::new(),
            open: BTreeSet::new(),
            stored: HashSet::new(),
            seen: HashMap::new(),
        };
        for r in existing {
            let cell = Condition::from_parts(r.time_limit_s, r.set_label)
                .and_then(|c| svc.cells.get_mut(&(r.image_id.clone(), c)));
            match cell {
                Some(cell) => cell.accepted += 1,
                None => warn!(
                    "stored record {} has no cell ({}, {} s)",
                    r.sketch_id, r.image_id, r.time_limit_s
                ),
            }
            svc.seen
                .entry(r.drawer_id.clone())
                .or_default()
                .insert((r.image_id.clone(), r.time_limit_s));
            svc.stored.insert(r.sketch_id.clone());
        }
        svc
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn coverage(&self) -> &BTreeMap<(String, Condition), CellCoverage> {
        &self.cells
    }

    pub fn is_complete(&self) -> bool {
        self.cells
            .values()
            .all(|c| c.accepted >= self.config.target)
    }

    /// Releases in-flight slots of assignments past their expiry.
    pub fn expire_stale(&mut self) {
        let now = self.clock.now_ms();
        while let Some((expires_at, _)) = self.open.first() {
            if *expires_at > now {
                break;
            }
            let (_, id) = self.open.pop_first().expect("non-empty");
            if let Some(task) = self.tasks.get_mut(&id) {
                task.state = TaskState::Expired;
                if let Some(cell) = self
                    .cells
                    .get_mut(&(task.assignment.image_id.clone(), task.condition))
                {
                    cell.in_flight -= 1;
                }
            }
        }
    }

    /// Gives `drawer_id` the least-covered cell it has not seen yet.
    pub fn assign(&mut self, drawer_id: &str) -> Result<TaskAssignment, AssignError> {
        self.expire_stale();
        if self.is_complete() {
            return Err(AssignError::CollectionComplete);
        }
        let target = self.config.target;
        let seen = self.seen.get(drawer_id);
        let (image_id, condition) = self
            .cells
            .iter()
            .filter(|(_, cov)| cov.total() < target)
            .filter(|((img, c), _)| {
                seen.map_or(true, |s| !s.contains(&(img.clone(), c.time_limit_s())))
            })
            .min_by_key(|(_, cov)| cov.total())
            .map(|(k, _)| k.clone())
            .ok_or(AssignError::NoEligibleTask)?;

        let now = self.clock.now_ms();
        let limit_ms = u64::from(condition.time_limit_s()) * 1000;
        let lifetime = self
            .config
            .expiry_ms
            .max(limit_ms + self.config.instruction_allowance_ms);
        let assignment = TaskAssignment {
            task_id: Uuid::new_v4().simple().to_string(),
            image_id: image_id.clone(),
            time_limit_s: condition.time_limit_s(),
            set_label: condition.set_label(),
            issued_at: now,
            expires_at: now + lifetime,
        };
        self.cells
            .get_mut(&(image_id.clone(), condition))
            .expect("picked from cells")
            .in_flight += 1;
        self.seen
            .entry(drawer_id.to_owned())
            .or_default()
            .insert((image_id, condition.time_limit_s()));
        self.open
            .insert((assignment.expires_at, assignment.task_id.clone()));
        self.tasks.insert(
            assignment.task_id.clone(),
            Task {
                assignment: assignment.clone(),
                drawer_id: drawer_id.to_owned(),
                condition,
                state: TaskState::Open,
            },
        );
        Ok(assignment)
    }

    /// Validates and stores a submission for an open task. The record's
    /// id, drawer, limit and set are taken from the assignment.
    pub fn submit(
        &mut self,
        task_id: &str,
        mut record: SketchRecord,
    ) -> Result<Submission, SubmitError> {
        self.expire_stale();
        let Some(task) = self.tasks.get(task_id) else {
            return Err(if self.stored.contains(task_id) {
                SubmitError::Duplicate(task_id.to_owned())
            } else {
                SubmitError::UnknownTask(task_id.to_owned())
            });
        };
        match task.state {
            TaskState::Open => {}
            TaskState::Accepted | TaskState::Rejected => {
                return Err(SubmitError::Duplicate(task_id.to_owned()))
            }
            TaskState::Expired => return Err(SubmitError::Expired(task_id.to_owned())),
        }
        let a = &task.assignment;
        record.sketch_id = a.task_id.clone();
        record.drawer_id = task.drawer_id.clone();
        record.time_limit_s = a.time_limit_s;
        record.set_label = a.set_label;
        let key = (a.image_id.clone(), task.condition);
        let open_key = (a.expires_at, a.task_id.clone());
        let entry = self
            .manifest
            .get(&a.image_id)
            .expect("cells come from the manifest");

        let verdict = validate_submission(&record, entry, &self.config.validation);
        if let Verdict::Reject(reason) = verdict {
            self.close(task_id, &open_key, &key, TaskState::Rejected);
            return Ok(Submission::Rejected(reason));
        }
        let cell = &self.cells[&key];
        if cell.accepted >= self.config.target {
            // Only reachable if coverage was already full when restarted.
            self.close(task_id, &open_key, &key, TaskState::Rejected);
            return Err(SubmitError::CellFull(task_id.to_owned()));
        }
        // On a storage error the task stays open and may be retried.
        self.sink.append(&record)?;
        self.close(task_id, &open_key, &key, TaskState::Accepted);
        self.cells.get_mut(&key).expect("cell exists").accepted += 1;
        Ok(Submission::Accepted {
            sketch_id: record.sketch_id,
        })
    }

    fn close(&mut self, task_id: &str, open_key: &(u64, String), key: &CellKey, state: TaskState) {
        self.open.remove(open_key);
        self.cells.get_mut(key).expect("cell exists").in_flight -= 1;
        self.tasks.get_mut(task_id).expect("task exists").state = state;
    }

    pub fn summary(&self) -> CoverageSummary {
        let cells: Vec<CellStats> = self
            .cells
            .iter()
            .map(|((img, c), cov)| CellStats {
                image_id: img.clone(),
                condition: c.label().to_owned(),
                time_limit_s: c.time_limit_s(),
                set_label: c.set_label(),
                accepted: cov.accepted,
                in_flight: cov.in_flight,
            })
            .collect();
        CoverageSummary {
            target: self.config.target,
            complete: self.is_complete(),
            accepted: cells.iter().map(|c| c.accepted).sum(),
            in_flight: cells.iter().map(|c| c.in_flight).sum(),
            cells,
        }
    }
}

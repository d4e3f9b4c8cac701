//! Capture service for timed tracing tasks.
//!
//! Drawers ask for a task, trace the revealed image under its time limit and
//! post the strokes back. The service balances work across
//! `(image, condition)` cells, validates each submission against the
//! server-side deadline, and appends accepted sketches to a JSONL store that
//! the analysis tools read directly.
//!
//! | Method | Path | |
//! |---|---|---|
//! | GET | `/api/task?drawer_id=` | new [`TaskAssignment`] |
//! | POST | `/api/submission/{task_id}` | [`SketchRecord`](shapeattn::dataset::SketchRecord) body |
//! | GET, HEAD | `/images/{image_id}` | source image bytes |
//! | GET | `/api/stats` | [`CoverageSummary`] |

pub mod http;
pub mod service;
pub mod store;

pub use http::{router, serve, AppState, StatusBody};
pub use service::{
    AssignError, CaptureService, CellCoverage, Clock, Condition, CoverageSummary, ManualClock,
    ServiceConfig, Submission, SubmitError, SystemClock, TaskAssignment,
};
pub use store::{valid_prefix, JsonlStore, RecordSink, Recovered, StoreError};

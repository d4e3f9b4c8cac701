use std::fmt;

use super::manifest::ManifestEntry;
use super::record::{RecordError, SketchRecord};
use crate::stroke::{Sketch, SketchError};

/// Quality thresholds for a submission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    /// Minimum total drawn length, in pixels.
    pub min_length_px: f64,
    /// Allowed lateness past the time limit.
    pub grace_ms: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            min_length_px: 100.0,
            grace_ms: 500,
        }
    }
}

impl ValidationConfig {
    /// Defaults overridden by `SKETCH_MIN_LEN_PX` and `SKETCH_GRACE_MS`.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Some(v) = std::env::var("SKETCH_MIN_LEN_PX")
            .ok()
            .and_then(|v| v.parse().ok())
        {
            cfg.min_length_px = v;
        }
        if let Some(v) = std::env::var("SKETCH_GRACE_MS")
            .ok()
            .and_then(|v| v.parse().ok())
        {
            cfg.grace_ms = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    ImageMismatch {
        expected: String,
        got: String,
    },
    CanvasMismatch {
        expected: (u32, u32),
        got: (u32, u32),
    },
    Empty,
    Malformed(String),
    OutOfBounds {
        stroke: usize,
        sample: usize,
    },
    Overtime {
        last_t_ms: u64,
        limit_ms: u64,
    },
    TooShort {
        length_px: f64,
        min_px: f64,
    },
}

impl RejectReason {
    /// Short machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::ImageMismatch { .. } => "image mismatch",
            RejectReason::CanvasMismatch { .. } => "canvas mismatch",
            RejectReason::Empty => "empty",
            RejectReason::Malformed(_) => "malformed",
            RejectReason::OutOfBounds { .. } => "out of bounds",
            RejectReason::Overtime { .. } => "overtime",
            RejectReason::TooShort { .. } => "too short",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::ImageMismatch { expected, got } => {
                write!(f, "image mismatch: expected {expected}, got {got}")
            }
            RejectReason::CanvasMismatch { expected, got } => write!(
                f,
                "canvas mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            RejectReason::Empty => f.write_str("empty: no strokes"),
            RejectReason::Malformed(m) => write!(f, "malformed: {m}"),
            RejectReason::OutOfBounds { stroke, sample } => {
                write!(f, "out of bounds: stroke {stroke} sample {sample}")
            }
            RejectReason::Overtime {
                last_t_ms,
                limit_ms,
            } => write!(
                f,
                "overtime: last sample at {last_t_ms} ms, limit {limit_ms} ms"
            ),
            RejectReason::TooShort { length_px, min_px } => {
                write!(f, "too short: {length_px:.1} px drawn, need {min_px} px")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Accept(Sketch),
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept(_))
    }

    pub fn reason(&self) -> Option<&RejectReason> {
        match self {
            Verdict::Accept(_) => None,
            Verdict::Reject(r) => Some(r),
        }
    }
}

/// Checks a parsed record against its manifest entry and the quality
/// thresholds. The record's own `time_limit_s` is the deadline.
pub fn validate_submission(
    record: &SketchRecord,
    entry: &ManifestEntry,
    config: &ValidationConfig,
) -> Verdict {
    use RejectReason as R;
    if record.image_id != entry.image_id {
        return Verdict::Reject(R::ImageMismatch {
            expected: entry.image_id.clone(),
            got: record.image_id.clone(),
        });
    }
    if (record.canvas_w, record.canvas_h) != (entry.width, entry.height) {
        return Verdict::Reject(R::CanvasMismatch {
            expected: (entry.width, entry.height),
            got: (record.canvas_w, record.canvas_h),
        });
    }
    if record.strokes.is_empty() {
        return Verdict::Reject(R::Empty);
    }
    let sketch = match record.to_sketch() {
        Ok(s) => s,
        Err(RecordError::Sketch(SketchError::OutOfBounds { stroke, sample, .. })) => {
            return Verdict::Reject(R::OutOfBounds { stroke, sample })
        }
        Err(e) => return Verdict::Reject(R::Malformed(e.to_string())),
    };
    let limit_ms = u64::from(record.time_limit_s) * 1000;
    if let Some(last) = record.last_t_ms() {
        if last > limit_ms + config.grace_ms {
            return Verdict::Reject(R::Overtime {
                last_t_ms: last,
                limit_ms,
            });
        }
    }
    let length_px = sketch.drawn_length();
    if length_px < config.min_length_px {
        return Verdict::Reject(R::TooShort {
            length_px,
            min_px: config.min_length_px,
        });
    }
    Verdict::Accept(sketch)
}

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stroke::{Sketch, SketchError, Stroke, StrokeSample};

/// Which collection set a sketch belongs to. Only 20 s sketches come in two
/// sets; everything else is `primary`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub enum SetLabel {
    #[default]
    #[serde(rename = "primary")]
    Primary,
    #[serde(rename = "baseline-20s")]
    Baseline20s,
}

impl SetLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SetLabel::Primary => "primary",
            SetLabel::Baseline20s => "baseline-20s",
        }
    }
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("stroke {0} is empty")]
    EmptyStroke(usize),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Wire form of a sketch. Strokes are arrays of `[x, y, t_ms]` triples with
/// real coordinates and integer milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchRecord {
    pub sketch_id: String,
    pub image_id: String,
    pub drawer_id: String,
    pub time_limit_s: u32,
    #[serde(default)]
    pub set_label: SetLabel,
    pub canvas_w: u32,
    pub canvas_h: u32,
    pub strokes: Vec<Vec<(f64, f64, u64)>>,
    #[serde(default)]
    pub client_version: String,
}

impl SketchRecord {
    pub fn from_sketch(sketch: &Sketch, set_label: SetLabel, client_version: &str) -> Self {
        Self {
            sketch_id: sketch.sketch_id().to_owned(),
            image_id: sketch.image_id().to_owned(),
            drawer_id: sketch.drawer_id().to_owned(),
            time_limit_s: sketch.time_limit_s(),
            set_label,
            canvas_w: sketch.canvas_w(),
            canvas_h: sketch.canvas_h(),
            strokes: sketch
                .strokes()
                .iter()
                .map(|s| s.samples().iter().map(|p| (p.x, p.y, p.t_ms)).collect())
                .collect(),
            client_version: client_version.to_owned(),
        }
    }

    pub fn parse_line(line: &str) -> Result<Self, RecordError> {
        Ok(serde_json::from_str(line)?)
    }

    /// Canonical single-line encoding, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }

    pub fn to_sketch(&self) -> Result<Sketch, RecordError> {
        let strokes = self
            .strokes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Stroke::new(
                    s.iter()
                        .map(|&(x, y, t)| StrokeSample::new(x, y, t))
                        .collect(),
                )
                .ok_or(RecordError::EmptyStroke(i))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Sketch::new(
            self.sketch_id.clone(),
            self.image_id.clone(),
            self.drawer_id.clone(),
            self.time_limit_s,
            self.canvas_w,
            self.canvas_h,
            strokes,
        )?)
    }

    /// Largest timestamp in the record.
    pub fn last_t_ms(&self) -> Option<u64> {
        self.strokes.iter().flatten().map(|s| s.2).max()
    }
}

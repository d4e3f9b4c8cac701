//! Scenario files for whole synthetic datasets.
//!
//! ```toml
//! seed = 7
//! images = 20
//! width = 300
//! height = 300
//! parts = 4
//! drawers_per_set = 10
//!
//! [drawer]
//! priority_noise = 0.1
//! jitter_px = 3.0
//! speed_px_per_s = 100.0
//!
//! [[conditions]]
//! time_limit_s = 10
//! priority = "reversed"
//! ```
//!
//! Omitting `conditions` gives the standard four cells per image: 10 s,
//! 20 s, a second 20 s baseline set, and 40 s, all in canonical order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{derive_path, simulate_population, DrawerModel, ShapeProgram, SynthError};
use crate::dataset::{CellKey, Dataset, ImageManifest, ManifestEntry, SetLabel, SketchRecord};

pub const SYNTH_CLIENT_VERSION: &str = "synth-1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawerParams {
    pub priority_noise: f64,
    pub jitter_px: f64,
    pub speed_px_per_s: f64,
}

impl Default for DrawerParams {
    fn default() -> Self {
        Self {
            priority_noise: 0.1,
            jitter_px: 3.0,
            speed_px_per_s: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorityRule {
    #[default]
    Canonical,
    Reversed,
}

/// One population per image. Unset drawer fields fall back to the
/// scenario's `[drawer]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub time_limit_s: u32,
    #[serde(default)]
    pub set_label: SetLabel,
    #[serde(default)]
    pub priority: PriorityRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority_noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_px_per_s: Option<f64>,
}

impl ConditionSpec {
    pub fn new(time_limit_s: u32, set_label: SetLabel, priority: PriorityRule) -> Self {
        Self {
            time_limit_s,
            set_label,
            priority,
            priority_noise: None,
            jitter_px: None,
            speed_px_per_s: None,
        }
    }

    fn drawer(&self, base: &DrawerParams) -> DrawerModel {
        DrawerModel {
            priority_noise: self.priority_noise.unwrap_or(base.priority_noise),
            jitter_px: self.jitter_px.unwrap_or(base.jitter_px),
            speed_px_per_s: self.speed_px_per_s.unwrap_or(base.speed_px_per_s),
            seed: 0,
        }
    }
}

fn standard_conditions() -> Vec<ConditionSpec> {
    vec![
        ConditionSpec::new(10, SetLabel::Primary, PriorityRule::Canonical),
        ConditionSpec::new(20, SetLabel::Primary, PriorityRule::Canonical),
        ConditionSpec::new(20, SetLabel::Baseline20s, PriorityRule::Canonical),
        ConditionSpec::new(40, SetLabel::Primary, PriorityRule::Canonical),
    ]
}

fn default_category() -> String {
    "Synthetic".to_owned()
}

fn default_drawers() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub images: usize,
    pub width: u32,
    pub height: u32,
    pub parts: usize,
    #[serde(default = "default_category")]
    pub category: String,
    #[serde(default = "default_drawers")]
    pub drawers_per_set: usize,
    #[serde(default)]
    pub drawer: DrawerParams,
    #[serde(default = "standard_conditions")]
    pub conditions: Vec<ConditionSpec>,
}

/// Generated records plus the manifest describing their images.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub manifest: ImageManifest,
    pub records: Vec<SketchRecord>,
}

impl SyntheticDataset {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }
}

impl Scenario {
    /// Standard four-condition scenario with default drawers.
    pub fn standard(seed: u64, images: usize) -> Self {
        Self {
            seed,
            images,
            width: 300,
            height: 300,
            parts: 4,
            category: default_category(),
            drawers_per_set: default_drawers(),
            drawer: DrawerParams::default(),
            conditions: standard_conditions(),
        }
    }

    pub fn image_id(&self, index: usize) -> String {
        format!("synth-{index:03}")
    }

    pub fn program(&self, index: usize) -> ShapeProgram {
        ShapeProgram::random(
            self.image_id(index),
            self.width,
            self.height,
            self.parts,
            derive_path(self.seed, &[1, index as u64]),
        )
    }

    pub fn manifest(&self) -> ImageManifest {
        ImageManifest::new((0..self.images).map(|i| ManifestEntry {
            image_id: self.image_id(i),
            category: self.category.clone(),
            width: self.width,
            height: self.height,
            path: String::new(),
        }))
        .expect("synthetic image ids are unique")
    }

    /// Sketches of every cell, keyed like a loaded dataset.
    pub fn generate_cells(&self) -> Result<Dataset, SynthError> {
        let mut cells = BTreeMap::new();
        for i in 0..self.images {
            let canonical = self.program(i);
            let reversed = canonical.reversed();
            for (c, cond) in self.conditions.iter().enumerate() {
                let program = match cond.priority {
                    PriorityRule::Canonical => &canonical,
                    PriorityRule::Reversed => &reversed,
                };
                let seed = derive_path(self.seed, &[2, i as u64, c as u64]);
                let mut sketches = simulate_population(
                    program,
                    &cond.drawer(&self.drawer),
                    self.drawers_per_set,
                    cond.time_limit_s,
                    seed,
                )?;
                let key = CellKey::new(self.image_id(i), cond.time_limit_s, cond.set_label);
                let cell: &mut Vec<_> = cells.entry(key).or_default();
                cell.append(&mut sketches);
                cell.sort_by(|a, b| a.sketch_id().cmp(b.sketch_id()));
            }
        }
        Ok(Dataset {
            cells,
            exclusions: Vec::new(),
        })
    }

    pub fn generate(&self) -> Result<SyntheticDataset, SynthError> {
        let cells = self.generate_cells()?;
        let records = cells
            .cells
            .iter()
            .flat_map(|(key, sketches)| {
                sketches
                    .iter()
                    .map(|s| SketchRecord::from_sketch(s, key.set_label, SYNTH_CLIENT_VERSION))
            })
            .collect();
        Ok(SyntheticDataset {
            manifest: self.manifest(),
            records,
        })
    }
}

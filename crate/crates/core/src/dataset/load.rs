use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use log::warn;
use thiserror::Error;

use super::manifest::ImageManifest;
use super::record::{SetLabel, SketchRecord};
use super::validate::{validate_submission, ValidationConfig, Verdict};
use crate::stats::Comparison;
use crate::stroke::Sketch;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: image {image_id} is not in the manifest")]
    UnknownImage { line: usize, image_id: String },
    #[error("line {line}: duplicate sketch id {sketch_id} (first seen on line {first_line})")]
    DuplicateSketch {
        line: usize,
        first_line: usize,
        sketch_id: String,
    },
}

/// One collection cell: an image under one time limit and set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub image_id: String,
    pub time_limit_s: u32,
    pub set_label: SetLabel,
}

impl CellKey {
    pub fn new(image_id: impl Into<String>, time_limit_s: u32, set_label: SetLabel) -> Self {
        Self {
            image_id: image_id.into(),
            time_limit_s,
            set_label,
        }
    }
}

/// A record left out of the dataset, with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub line: usize,
    pub sketch_id: Option<String>,
    pub reason: String,
}

/// Validated sketches grouped by cell; each cell is sorted by sketch id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub cells: BTreeMap<CellKey, Vec<Sketch>>,
    pub exclusions: Vec<Exclusion>,
}

impl Dataset {
    pub fn cell(&self, image_id: &str, time_limit_s: u32, set_label: SetLabel) -> &[Sketch] {
        self.cells
            .get(&CellKey::new(image_id, time_limit_s, set_label))
            .map_or(&[], Vec::as_slice)
    }

    pub fn sketch_count(&self) -> usize {
        self.cells.values().map(Vec::len).sum()
    }

    /// Distinct image ids, sorted.
    pub fn image_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.cells.keys().map(|k| k.image_id.as_str()).collect();
        ids.dedup();
        ids
    }

    /// `(primary 20 s, baseline 20 s, other)` sets for a standard comparison.
    pub fn comparison_sets(
        &self,
        image_id: &str,
        comparison: &Comparison,
    ) -> Option<(&[Sketch], &[Sketch], &[Sketch])> {
        let other_limit = comparison.other_time_limit()?;
        Some((
            self.cell(image_id, 20, SetLabel::Primary),
            self.cell(image_id, 20, SetLabel::Baseline20s),
            self.cell(image_id, other_limit, SetLabel::Primary),
        ))
    }
}

pub fn load_dataset(
    jsonl_path: &Path,
    manifest: &ImageManifest,
    config: &ValidationConfig,
) -> Result<Dataset, DatasetError> {
    let file = File::open(jsonl_path).map_err(|source| DatasetError::Io {
        path: jsonl_path.to_owned(),
        source,
    })?;
    read_dataset(BufReader::new(file), manifest, config).map_err(|e| match e {
        DatasetError::Io { source, .. } => DatasetError::Io {
            path: jsonl_path.to_owned(),
            source,
        },
        other => other,
    })
}

/// Parses JSONL, validates every record and groups the accepted ones.
/// Malformed or rejected records are excluded and logged; unknown images and
/// duplicate sketch ids are hard errors.
pub fn read_dataset(
    reader: impl BufRead,
    manifest: &ImageManifest,
    config: &ValidationConfig,
) -> Result<Dataset, DatasetError> {
    let mut dataset = Dataset::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| DatasetError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = match SketchRecord::parse_line(&line) {
            Ok(r) => r,
            Err(e) => {
                warn!("line {lineno}: excluded: {e}");
                dataset.exclusions.push(Exclusion {
                    line: lineno,
                    sketch_id: None,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if let Some(&first_line) = seen.get(&record.sketch_id) {
            return Err(DatasetError::DuplicateSketch {
                line: lineno,
                first_line,
                sketch_id: record.sketch_id,
            });
        }
        seen.insert(record.sketch_id.clone(), lineno);
        let entry = manifest
            .get(&record.image_id)
            .ok_or_else(|| DatasetError::UnknownImage {
                line: lineno,
                image_id: record.image_id.clone(),
            })?;
        match validate_submission(&record, entry, config) {
            Verdict::Accept(sketch) => dataset
                .cells
                .entry(CellKey::new(
                    record.image_id,
                    record.time_limit_s,
                    record.set_label,
                ))
                .or_default()
                .push(sketch),
            Verdict::Reject(reason) => {
                warn!("line {lineno}: excluded {}: {reason}", record.sketch_id);
                dataset.exclusions.push(Exclusion {
                    line: lineno,
                    sketch_id: Some(record.sketch_id),
                    reason: reason.to_string(),
                });
            }
        }
    }
    for sketches in dataset.cells.values_mut() {
        sketches.sort_by(|a, b| a.sketch_id().cmp(b.sketch_id()));
    }
    Ok(dataset)
}

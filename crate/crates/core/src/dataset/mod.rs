//! File formats, submission validation and dataset loading.
//!
//! Sketches travel as JSONL: one [`SketchRecord`] per line, UTF-8, compact
//! JSON with the field order of the struct. Manifests are CSV or JSON.

mod load;
mod manifest;
mod record;
mod validate;

pub use load::{load_dataset, read_dataset, CellKey, Dataset, DatasetError, Exclusion};
pub use manifest::{ImageManifest, ManifestEntry, ManifestError, STANDARD_CATEGORIES};
pub use record::{RecordError, SetLabel, SketchRecord};
pub use validate::{validate_submission, RejectReason, ValidationConfig, Verdict};

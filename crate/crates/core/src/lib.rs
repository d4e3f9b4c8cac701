//! Measuring shape-attention prioritization in traced sketches.
//!
//! A sketch is a sequence of timed pen strokes over a source image. The
//! pipeline turns each sketch into a *length-based* point cloud, where the
//! third coordinate is the distance drawn so far, bins that cloud into a
//! coarse voxel grid of ink counts, and compares sets of sketches with a
//! per-voxel squared-difference dissimilarity. Per image, the dissimilarities
//! within one 20 s set pair ("AA") are tested against those between a 20 s
//! set and a 10 s or 40 s set ("AB") with a two-sample t-test.
//!
//! Modules, bottom-up:
//!
//! - [`stroke`]: sketch domain types and the length mapping.
//! - [`voxel`]: voxel binning and truncation.
//! - [`dissimilarity`]: pairwise and set-level dissimilarity.
//! - [`stats`]: t-tests, the per-image AA/AB procedure, category reports.
//! - [`synth`]: seedable synthetic drawers standing in for human tracers.
//! - [`dataset`]: JSONL records, manifests, submission validation, loading.

pub mod dataset;
pub mod dissimilarity;
pub mod stats;
pub mod stroke;
pub mod synth;
pub mod voxel;

pub use dissimilarity::{
    pair_dissimilarity, set_dissimilarity, DissimilarityError, MappedSketch, PairDissimilarity,
    SetDissimilarity,
};
pub use stroke::{
    build_length_mapping, resample_stroke, LengthMapping, Sketch, Stroke, StrokeSample,
};
pub use voxel::{truncate_mapping, voxelize, VoxelGrid};

/// Arc-length spacing of the resampled ink, in pixels.
pub const DEFAULT_SPACING_PX: f64 = 1.0;

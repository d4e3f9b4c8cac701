//! Pairwise and set-level sketch dissimilarity.
//!
//! Two sketches are cut to their common drawn length, voxelized into
//! identically shaped grids, and compared by the sum of squared per-voxel ink
//! differences divided by the number of voxels.

use rayon::prelude::*;
use thiserror::Error;

use crate::stroke::{build_length_mapping, LengthMapping, Sketch};
use crate::voxel::{truncate_mapping, voxelize, VoxelError, VoxelGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DissimilarityError {
    #[error("incomparable sketches: {a_w}x{a_h} vs {b_w}x{b_h}")]
    Incomparable {
        a_w: u32,
        a_h: u32,
        b_w: u32,
        b_h: u32,
    },
    #[error("zero common length")]
    ZeroCommonLength,
    #[error("voxel grids differ in shape: {a:?} vs {b:?}")]
    ShapeMismatch { a: [usize; 3], b: [usize; 3] },
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error("pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<DissimilarityError>,
    },
}

/// A length mapping together with the image frame it was drawn on.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedSketch {
    pub mapping: LengthMapping,
    pub image_w: u32,
    pub image_h: u32,
}

impl MappedSketch {
    pub fn new(mapping: LengthMapping, image_w: u32, image_h: u32) -> Self {
        Self {
            mapping,
            image_w,
            image_h,
        }
    }

    pub fn from_sketch(sketch: &Sketch, spacing: f64) -> Self {
        Self::new(
            build_length_mapping(sketch, spacing),
            sketch.canvas_w(),
            sketch.canvas_h(),
        )
    }

    pub fn total_length(&self) -> f64 {
        self.mapping.total_length()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDissimilarity {
    pub value: f64,
    /// min of the two drawn lengths, in pixels.
    pub common_length: f64,
    /// Number of voxels the squared differences were averaged over.
    pub voxel_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetDissimilarity {
    /// i-major, j-minor.
    pub values: Vec<PairDissimilarity>,
    pub mean: f64,
    /// Unbiased sample variance; 0 when fewer than two values.
    pub variance: f64,
}

impl SetDissimilarity {
    pub fn from_values(values: Vec<PairDissimilarity>) -> Self {
        let n = values.len() as f64;
        let mean = if values.is_empty() {
            0.0
        } else {
            values.iter().map(|p| p.value).sum::<f64>() / n
        };
        let variance = if values.len() < 2 {
            0.0
        } else {
            values.iter().map(|p| (p.value - mean).powi(2)).sum::<f64>() / (n - 1.0)
        };
        Self {
            values,
            mean,
            variance,
        }
    }

    pub fn raw_values(&self) -> Vec<f64> {
        self.values.iter().map(|p| p.value).collect()
    }
}

/// Sum of squared count differences over the number of voxels.
pub fn grid_dissimilarity(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64, DissimilarityError> {
    if a.dims() != b.dims() {
        return Err(DissimilarityError::ShapeMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    if a.voxel_count() == 0 {
        return Err(DissimilarityError::ZeroCommonLength);
    }
    let sum: f64 = a
        .counts()
        .iter()
        .zip(b.counts())
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    Ok(sum / a.voxel_count() as f64)
}

pub fn pair_dissimilarity(
    a: &MappedSketch,
    b: &MappedSketch,
) -> Result<PairDissimilarity, DissimilarityError> {
    if (a.image_w, a.image_h) != (b.image_w, b.image_h) {
        return Err(DissimilarityError::Incomparable {
            a_w: a.image_w,
            a_h: a.image_h,
            b_w: b.image_w,
            b_h: b.image_h,
        });
    }
    let common = a.total_length().min(b.total_length());
    if common <= 0.0 {
        return Err(DissimilarityError::ZeroCommonLength);
    }
    let ga = voxelize(&truncate_mapping(&a.mapping, common), a.image_w, a.image_h)?;
    let gb = voxelize(&truncate_mapping(&b.mapping, common), b.image_w, b.image_h)?;
    let value = grid_dissimilarity(&ga, &gb)?;
    Ok(PairDissimilarity {
        value,
        common_length: common,
        voxel_count: ga.voxel_count(),
    })
}

/// All `|xs|·|ys|` pair values, i-major. Pairs are evaluated in parallel; the
/// output order does not depend on scheduling.
pub fn set_dissimilarity(
    xs: &[MappedSketch],
    ys: &[MappedSketch],
) -> Result<SetDissimilarity, DissimilarityError> {
    let values = (0..xs.len() * ys.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / ys.len(), k % ys.len());
            pair_dissimilarity(&xs[i], &ys[j]).map_err(|e| DissimilarityError::Pair {
                i,
                j,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SetDissimilarity::from_values(values))
}

/// Maps each sketch once, then computes the set dissimilarity.
pub fn set_dissimilarity_of_sketches(
    xs: &[Sketch],
    ys: &[Sketch],
    spacing: f64,
) -> Result<SetDissimilarity, DissimilarityError> {
    let map = |s: &[Sketch]| -> Vec<MappedSketch> {
        s.par_iter()
            .map(|k| MappedSketch::from_sketch(k, spacing))
            .collect()
    };
    set_dissimilarity(&map(xs), &map(ys))
}

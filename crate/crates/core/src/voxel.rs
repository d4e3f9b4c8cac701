//! Binning of a length mapping into 60 x 60 x 300 px voxels of ink counts.

use std::fmt::Write as _;

use thiserror::Error;

use crate::stroke::LengthMapping;

/// Voxel edge along the image axes, in pixels.
pub const CELL_XY_PX: f64 = 60.0;
/// Voxel depth along the drawn-length axis, in pixels.
pub const CELL_Z_PX: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VoxelError {
    #[error("image dimensions must be positive, got {w}x{h}")]
    EmptyImage { w: u32, h: u32 },
    #[error(
        "mapped point {index} at ({x}, {y}, {z}) lies outside the {w}x{h} image or drawn length"
    )]
    OutOfBounds {
        index: usize,
        x: f64,
        y: f64,
        z: f64,
        w: u32,
        h: u32,
    },
}

/// Dense grid of ink counts, x fastest, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    image_w: u32,
    image_h: u32,
    length_px: f64,
    counts: Vec<u32>,
}

impl VoxelGrid {
    /// All-zero grid covering the image and `length_px` of drawing.
    pub fn empty(image_w: u32, image_h: u32, length_px: f64) -> Self {
        let nx = (f64::from(image_w) / CELL_XY_PX).ceil() as usize;
        let ny = (f64::from(image_h) / CELL_XY_PX).ceil() as usize;
        let nz = if length_px > 0.0 {
            (length_px / CELL_Z_PX).ceil() as usize
        } else {
            0
        };
        Self {
            dims: [nx, ny, nz],
            image_w,
            image_h,
            length_px,
            counts: vec![0; nx * ny * nz],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_size(&self) -> [f64; 3] {
        [CELL_XY_PX, CELL_XY_PX, CELL_Z_PX]
    }

    pub fn image_w(&self) -> u32 {
        self.image_w
    }

    pub fn image_h(&self) -> u32 {
        self.image_h
    }

    pub fn length_px(&self) -> f64 {
        self.length_px
    }

    /// Flat counts in storage order.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn voxel_count(&self) -> usize {
        self.counts.len()
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let [nx, ny, _] = self.dims;
        ix + nx * (iy + ny * iz)
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> u32 {
        self.counts[self.index(ix, iy, iz)]
    }

    pub fn total_ink(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Text dump: a `nx ny nz` header, then one line of `nx` counts per
    /// `(z, y)` row.
    pub fn dump(&self) -> String {
        let [nx, ny, nz] = self.dims;
        let mut out = format!("{nx} {ny} {nz}\n");
        for iz in 0..nz {
            for iy in 0..ny {
                let start = self.index(0, iy, iz);
                let row = &self.counts[start..start + nx];
                for (i, c) in row.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    let _ = write!(out, "{c}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Half-open bin index, with the top edge folded into the last bin.
fn bin(v: f64, cell: f64, n: usize) -> usize {
    ((v / cell).floor() as usize).min(n.saturating_sub(1))
}

/// Counts mapping points into voxels over a `image_w` x `image_h` image.
///
/// The z extent is the mapping's total length, so a zero-length mapping
/// yields a grid with no voxels.
pub fn voxelize(
    mapping: &LengthMapping,
    image_w: u32,
    image_h: u32,
) -> Result<VoxelGrid, VoxelError> {
    if image_w == 0 || image_h == 0 {
        return Err(VoxelError::EmptyImage {
            w: image_w,
            h: image_h,
        });
    }
    let mut grid = VoxelGrid::empty(image_w, image_h, mapping.total_length());
    let [nx, ny, nz] = grid.dims;
    let (w, h) = (f64::from(image_w), f64::from(image_h));
    for (index, p) in mapping.points().iter().enumerate() {
        let inside = (0.0..=w).contains(&p.x)
            && (0.0..=h).contains(&p.y)
            && (0.0..=mapping.total_length()).contains(&p.z);
        if !inside {
            return Err(VoxelError::OutOfBounds {
                index,
                x: p.x,
                y: p.y,
                z: p.z,
                w: image_w,
                h: image_h,
            });
        }
        if nz == 0 {
            continue;
        }
        let i = grid.index(
            bin(p.x, CELL_XY_PX, nx),
            bin(p.y, CELL_XY_PX, ny),
            bin(p.z, CELL_Z_PX, nz),
        );
        grid.counts[i] += 1;
    }
    Ok(grid)
}

/// Keeps the points drawn within the first `max_len` pixels.
pub fn truncate_mapping(mapping: &LengthMapping, max_len: f64) -> LengthMapping {
    let max_len = max_len.max(0.0);
    if max_len >= mapping.total_length() {
        return mapping.clone();
    }
    let (points, _) = mapping.clone().into_parts();
    let keep = points.partition_point(|p| p.z <= max_len);
    let mut points = points;
    points.truncate(keep);
    LengthMapping::from_parts_unchecked(points, max_len)
}

//! Sketch domain types and the length-based 3D mapping.
//!
//! A [`LengthMapping`] is the point cloud `(x, y, z)` where `(x, y)` is a pen
//! position on the source image and `z` is the distance drawn before reaching
//! it. Time never enters the mapping, and pen-up travel between strokes adds
//! no length.

use thiserror::Error;

/// Tolerance, as a fraction of the spacing, used when an arc position
/// coincides with a vertex or a stroke join lands on the spacing grid. Kept
/// above the coordinate quantum so a split point taken from the resampled
/// output still snaps.
const SNAP_EPS: f64 = 1e-5;

/// Interpolated coordinates are rounded to multiples of 2^-20 px so that the
/// same arc position reached along different vertex chains gives bit-identical
/// points.
const COORD_QUANTUM: f64 = 1.0 / (1u64 << 20) as f64;

fn quantize(v: f64) -> f64 {
    (v / COORD_QUANTUM).round() * COORD_QUANTUM
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SketchError {
    #[error("canvas dimensions must be positive, got {w}x{h}")]
    EmptyCanvas { w: u32, h: u32 },
    #[error("stroke {stroke} has no samples")]
    EmptyStroke { stroke: usize },
    #[error("stroke {stroke} sample {sample} is not finite")]
    NonFinite { stroke: usize, sample: usize },
    #[error("stroke {stroke} sample {sample} at ({x}, {y}) lies outside the {w}x{h} canvas")]
    OutOfBounds {
        stroke: usize,
        sample: usize,
        x: f64,
        y: f64,
        w: u32,
        h: u32,
    },
    #[error("stroke {stroke} sample {sample} goes back in time")]
    NonMonotonicTime { stroke: usize, sample: usize },
    #[error("time limit must be positive")]
    ZeroTimeLimit,
}

/// One captured pen position, in source-image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeSample {
    pub x: f64,
    pub y: f64,
    /// Milliseconds since the trial started.
    pub t_ms: u64,
}

impl StrokeSample {
    pub fn new(x: f64, y: f64, t_ms: u64) -> Self {
        Self { x, y, t_ms }
    }
}

/// A pen-down to pen-up sequence of samples. Never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    samples: Vec<StrokeSample>,
}

impl Stroke {
    /// Builds a stroke; `None` when `samples` is empty.
    pub fn new(samples: Vec<StrokeSample>) -> Option<Self> {
        if samples.is_empty() {
            None
        } else {
            Some(Self { samples })
        }
    }

    /// Convenience constructor for untimed points; timestamps count up from 0.
    pub fn from_points(points: &[(f64, f64)]) -> Option<Self> {
        Self::new(
            points
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| StrokeSample::new(x, y, i as u64))
                .collect(),
        )
    }

    pub fn samples(&self) -> &[StrokeSample] {
        &self.samples
    }

    pub fn first(&self) -> &StrokeSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &StrokeSample {
        &self.samples[self.samples.len() - 1]
    }

    /// Polyline length through the samples.
    pub fn length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }

    fn positions(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().map(|s| (s.x, s.y))
    }
}

/// A traced sketch of one source image under one time limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    sketch_id: String,
    image_id: String,
    drawer_id: String,
    time_limit_s: u32,
    canvas_w: u32,
    canvas_h: u32,
    strokes: Vec<Stroke>,
}

impl Sketch {
    /// Validates canvas size, sample bounds, finiteness and per-stroke time
    /// order.
    pub fn new(
        sketch_id: impl Into<String>,
        image_id: impl Into<String>,
        drawer_id: impl Into<String>,
        time_limit_s: u32,
        canvas_w: u32,
        canvas_h: u32,
        strokes: Vec<Stroke>,
    ) -> Result<Self, SketchError> {
        if canvas_w == 0 || canvas_h == 0 {
            return Err(SketchError::EmptyCanvas {
                w: canvas_w,
                h: canvas_h,
            });
        }
        if time_limit_s == 0 {
            return Err(SketchError::ZeroTimeLimit);
        }
        let (w, h) = (f64::from(canvas_w), f64::from(canvas_h));
        for (si, stroke) in strokes.iter().enumerate() {
            let mut prev_t = 0;
            for (pi, s) in stroke.samples.iter().enumerate() {
                if !s.x.is_finite() || !s.y.is_finite() {
                    return Err(SketchError::NonFinite {
                        stroke: si,
                        sample: pi,
                    });
                }
                if !(0.0..=w).contains(&s.x) || !(0.0..=h).contains(&s.y) {
                    return Err(SketchError::OutOfBounds {
                        stroke: si,
                        sample: pi,
                        x: s.x,
                        y: s.y,
                        w: canvas_w,
                        h: canvas_h,
                    });
                }
                if pi > 0 && s.t_ms < prev_t {
                    return Err(SketchError::NonMonotonicTime {
                        stroke: si,
                        sample: pi,
                    });
                }
                prev_t = s.t_ms;
            }
        }
        Ok(Self {
            sketch_id: sketch_id.into(),
            image_id: image_id.into(),
            drawer_id: drawer_id.into(),
            time_limit_s,
            canvas_w,
            canvas_h,
            strokes,
        })
    }

    pub fn sketch_id(&self) -> &str {
        &self.sketch_id
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn drawer_id(&self) -> &str {
        &self.drawer_id
    }

    pub fn time_limit_s(&self) -> u32 {
        self.time_limit_s
    }

    pub fn canvas_w(&self) -> u32 {
        self.canvas_w
    }

    pub fn canvas_h(&self) -> u32 {
        self.canvas_h
    }

    pub fn strokes(&self) -> &[Stroke] {
        &self.strokes
    }

    /// Total drawn length, ignoring pen-up travel.
    pub fn drawn_length(&self) -> f64 {
        self.strokes.iter().map(Stroke::length).sum()
    }

    /// Same sketch with different strokes. The new strokes are re-validated.
    pub fn with_strokes(&self, strokes: Vec<Stroke>) -> Result<Self, SketchError> {
        Self::new(
            self.sketch_id.clone(),
            self.image_id.clone(),
            self.drawer_id.clone(),
            self.time_limit_s,
            self.canvas_w,
            self.canvas_h,
            strokes,
        )
    }
}

/// A point of the length mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedPoint {
    pub x: f64,
    pub y: f64,
    /// Drawn distance before this point, in pixels.
    pub z: f64,
}

/// Point cloud `(x, y, z)` with `z` the cumulative drawn distance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LengthMapping {
    points: Vec<MappedPoint>,
    total_length: f64,
}

impl LengthMapping {
    /// Wraps raw points. `z` must be non-decreasing and bounded by
    /// `total_length`; returns `None` otherwise.
    pub fn from_points(points: Vec<MappedPoint>, total_length: f64) -> Option<Self> {
        let monotone = points.windows(2).all(|w| w[0].z <= w[1].z);
        let bounded = points
            .iter()
            .all(|p| p.z >= 0.0 && p.z <= total_length && p.x.is_finite() && p.y.is_finite());
        (monotone && bounded && total_length >= 0.0).then_some(Self {
            points,
            total_length,
        })
    }

    pub fn points(&self) -> &[MappedPoint] {
        &self.points
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub(crate) fn into_parts(self) -> (Vec<MappedPoint>, f64) {
        (self.points, self.total_length)
    }

    pub(crate) fn from_parts_unchecked(points: Vec<MappedPoint>, total_length: f64) -> Self {
        Self {
            points,
            total_length,
        }
    }
}

/// Points of a stroke at uniform arc-length spacing, plus the stroke length.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub points: Vec<(f64, f64)>,
    pub length: f64,
}

/// Number of grid positions `0, s, 2s, ...` that fit in `length`.
fn grid_steps(length: f64, spacing: f64) -> usize {
    (length / spacing + SNAP_EPS).floor() as usize
}

/// Resamples a polyline at arc positions `0, s, 2s, ... <= length` by linear
/// interpolation. Positions that coincide with a vertex return the vertex
/// itself; interpolated positions are rounded to 2^-20 px. A single vertex
/// returns itself.
///
/// Panics if `spacing` is not positive or `points` is empty.
pub fn resample_polyline(points: &[(f64, f64)], spacing: f64) -> Resampled {
    assert!(spacing > 0.0, "spacing must be positive");
    assert!(!points.is_empty(), "cannot resample an empty polyline");

    let mut cum = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in points.windows(2) {
        acc += (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
        cum.push(acc);
    }
    let length = acc;
    let steps = grid_steps(length, spacing);
    let tol = SNAP_EPS * spacing;

    let mut out = Vec::with_capacity(steps + 1);
    let mut seg = 0;
    let last = points.len() - 1;
    for k in 0..=steps {
        let pos = k as f64 * spacing;
        while seg < last && cum[seg + 1] < pos - tol {
            seg += 1;
        }
        if seg == last || (pos - cum[seg]).abs() <= tol {
            out.push(points[seg]);
        } else if (cum[seg + 1] - pos).abs() <= tol {
            out.push(points[seg + 1]);
        } else {
            let (a, b) = (points[seg], points[seg + 1]);
            let t = (pos - cum[seg]) / (cum[seg + 1] - cum[seg]);
            out.push((
                quantize(a.0 + t * (b.0 - a.0)),
                quantize(a.1 + t * (b.1 - a.1)),
            ));
        }
    }
    Resampled {
        points: out,
        length,
    }
}

/// Resamples one stroke at uniform arc-length `spacing`.
pub fn resample_stroke(stroke: &Stroke, spacing: f64) -> Resampled {
    let pts: Vec<_> = stroke.positions().collect();
    resample_polyline(&pts, spacing)
}

/// Concatenates resampled strokes in order into the length mapping.
///
/// Each stroke contributes its own grid points, offset by the length drawn
/// before it. Zero-length strokes contribute nothing. When a stroke starts
/// exactly where the previous one ended (same position and same `z`) the
/// repeated point is emitted once, so splitting a stroke at one of its grid
/// points does not change the mapping.
pub fn build_length_mapping(sketch: &Sketch, spacing: f64) -> LengthMapping {
    assert!(spacing > 0.0, "spacing must be positive");
    let mut points: Vec<MappedPoint> = Vec::new();
    let mut drawn = 0.0;
    for stroke in sketch.strokes() {
        let r = resample_stroke(stroke, spacing);
        if r.length <= 0.0 {
            continue;
        }
        let offset = snap_to_grid(drawn, spacing);
        for (k, &(x, y)) in r.points.iter().enumerate() {
            let p = MappedPoint {
                x,
                y,
                z: offset + k as f64 * spacing,
            };
            if k == 0 {
                if let Some(prev) = points.last() {
                    if prev.x == p.x && prev.y == p.y && (prev.z - p.z).abs() <= SNAP_EPS * spacing
                    {
                        continue;
                    }
                }
            }
            points.push(p);
        }
        drawn += r.length;
    }
    if points.is_empty() {
        return LengthMapping::default();
    }
    let total_length = drawn.max(points.last().map_or(0.0, |p| p.z));
    LengthMapping::from_parts_unchecked(points, total_length)
}

fn snap_to_grid(z: f64, spacing: f64) -> f64 {
    let k = (z / spacing).round();
    let snapped = k * spacing;
    if (z - snapped).abs() <= SNAP_EPS * spacing {
        snapped
    } else {
        z
    }
}

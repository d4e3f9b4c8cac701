//! Seedable synthetic drawers.
//!
//! A [`ShapeProgram`] describes the parts of an image a drawer may trace and
//! the order they would trace them in. A [`DrawerModel`] traces the parts at
//! constant speed, emitting 60 Hz pen samples, with occasional swaps of
//! adjacent parts and positional jitter, and stops at the time limit.

mod rng;
mod scenario;

pub use rng::{derive_path, derive_seed, splitmix64, Stream};
pub use scenario::{ConditionSpec, DrawerParams, PriorityRule, Scenario, SyntheticDataset};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stroke::{Sketch, Stroke, StrokeSample};

/// Pen sampling rate of synthetic drawers.
pub const SAMPLE_HZ: f64 = 60.0;
/// Pause between lifting the pen and starting the next part.
pub const PEN_UP_MS: f64 = 150.0;
/// Per-sample noise as a fraction of `jitter_px`; the rest of the jitter
/// displaces whole parts.
const SAMPLE_NOISE_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("part {0} has zero length")]
    DegeneratePart(usize),
    #[error("priority is not a permutation of {0} parts")]
    BadPriority(usize),
    #[error("part {0} leaves the {1}x{2} image")]
    PartOutOfBounds(usize, u32, u32),
    #[error("drawer parameter {0} out of range")]
    BadDrawer(&'static str),
    #[error("program needs at least one part")]
    NoParts,
}

/// A parametric contour in image pixels. Angles are in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Contour {
    Line {
        from: (f64, f64),
        to: (f64, f64),
    },
    Arc {
        center: (f64, f64),
        radius: f64,
        start: f64,
        sweep: f64,
    },
    /// Closed outline through the vertices.
    Polygon {
        vertices: Vec<(f64, f64)>,
    },
    Ellipse {
        center: (f64, f64),
        rx: f64,
        ry: f64,
        rotation: f64,
    },
}

impl Contour {
    /// Flattened polyline, with chords of at most about 2 px on curves.
    pub fn polyline(&self) -> Vec<(f64, f64)> {
        match self {
            Contour::Line { from, to } => vec![*from, *to],
            Contour::Polygon { vertices } => {
                let mut v = vertices.clone();
                if let Some(&first) = vertices.first() {
                    v.push(first);
                }
                v
            }
            Contour::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let n = ((sweep.abs() * radius / 2.0).ceil() as usize).max(8);
                (0..=n)
                    .map(|i| {
                        let a = start + sweep * i as f64 / n as f64;
                        (center.0 + radius * a.cos(), center.1 + radius * a.sin())
                    })
                    .collect()
            }
            Contour::Ellipse {
                center,
                rx,
                ry,
                rotation,
            } => {
                let h = ((rx - ry) / (rx + ry)).powi(2);
                let perimeter = std::f64::consts::PI
                    * (rx + ry)
                    * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
                let n = ((perimeter / 2.0).ceil() as usize).max(16);
                let (s, c) = rotation.sin_cos();
                (0..=n)
                    .map(|i| {
                        let a = std::f64::consts::TAU * i as f64 / n as f64;
                        let (px, py) = (rx * a.cos(), ry * a.sin());
                        (center.0 + c * px - s * py, center.1 + s * px + c * py)
                    })
                    .collect()
            }
        }
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.polyline())
    }
}

fn polyline_length(p: &[(f64, f64)]) -> f64 {
    p.windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub name: String,
    pub contour: Contour,
}

/// The traceable parts of one image and their canonical drawing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeProgram {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    parts: Vec<Part>,
    /// Part indices, first-drawn first.
    canonical_priority: Vec<usize>,
}

impl ShapeProgram {
    pub fn new(
        image_id: impl Into<String>,
        width: u32,
        height: u32,
        parts: Vec<Part>,
        canonical_priority: Vec<usize>,
    ) -> Result<Self, SynthError> {
        if parts.is_empty() {
            return Err(SynthError::NoParts);
        }
        check_permutation(&canonical_priority, parts.len())?;
        for (i, p) in parts.iter().enumerate() {
            let poly = p.contour.polyline();
            if !(polyline_length(&poly) > 0.0) {
                return Err(SynthError::DegeneratePart(i));
            }
            let inside = poly.iter().all(|&(x, y)| {
                (0.0..=f64::from(width)).contains(&x) && (0.0..=f64::from(height)).contains(&y)
            });
            if !inside {
                return Err(SynthError::PartOutOfBounds(i, width, height));
            }
        }
        Ok(Self {
            image_id: image_id.into(),
            width,
            height,
            parts,
            canonical_priority,
        })
    }

    /// Random program of `n_parts` lines, arcs, polygons and ellipses placed
    /// inside a `width` x `height` image.
    pub fn random(
        image_id: impl Into<String>,
        width: u32,
        height: u32,
        n_parts: usize,
        seed: u64,
    ) -> Self {
        let mut rng = Stream::new(seed);
        let (w, h) = (f64::from(width), f64::from(height));
        let max_r = (w.min(h) / 5.0).max(4.0);
        let parts = (0..n_parts.max(1))
            .map(|i| {
                let r = rng.range(max_r * 0.4, max_r);
                let center = (
                    rng.range(r + 1.0, w - r - 1.0),
                    rng.range(r + 1.0, h - r - 1.0),
                );
                let contour = match rng.below(4) {
                    0 => {
                        let a = rng.range(0.0, std::f64::consts::TAU);
                        let (dx, dy) = (r * a.cos(), r * a.sin());
                        Contour::Line {
                            from: (center.0 - dx, center.1 - dy),
                            to: (center.0 + dx, center.1 + dy),
                        }
                    }
                    1 => Contour::Arc {
                        center,
                        radius: r,
                        start: rng.range(0.0, std::f64::consts::TAU),
                        sweep: rng.range(2.0, 5.5),
                    },
                    2 => {
                        let sides = 3 + rng.below(4);
                        let phase = rng.range(0.0, std::f64::consts::TAU);
                        Contour::Polygon {
                            vertices: (0..sides)
                                .map(|k| {
                                    let a = phase + std::f64::consts::TAU * k as f64 / sides as f64;
                                    (center.0 + r * a.cos(), center.1 + r * a.sin())
                                })
                                .collect(),
                        }
                    }
                    _ => Contour::Ellipse {
                        center,
                        rx: r,
                        ry: r * rng.range(0.4, 1.0),
                        rotation: rng.range(0.0, std::f64::consts::PI),
                    },
                };
                Part {
                    name: format!("part{i}"),
                    contour,
                }
            })
            .collect::<Vec<_>>();
        let order = (0..parts.len()).collect();
        Self::new(image_id, width, height, parts, order).expect("random parts lie inside the image")
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn canonical_priority(&self) -> &[usize] {
        &self.canonical_priority
    }

    /// Same parts, different canonical order.
    pub fn with_priority(&self, priority: Vec<usize>) -> Result<Self, SynthError> {
        check_permutation(&priority, self.parts.len())?;
        Ok(Self {
            canonical_priority: priority,
            ..self.clone()
        })
    }

    pub fn reversed(&self) -> Self {
        let mut p = self.canonical_priority.clone();
        p.reverse();
        self.with_priority(p).expect("reversal keeps a permutation")
    }

    pub fn total_length(&self) -> f64 {
        self.parts.iter().map(|p| p.contour.length()).sum()
    }
}

fn check_permutation(order: &[usize], n: usize) -> Result<(), SynthError> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(SynthError::BadPriority(n));
    }
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(SynthError::BadPriority(n));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawerModel {
    /// Probability of swapping each adjacent pair of parts, in one
    /// left-to-right pass over the canonical order.
    pub priority_noise: f64,
    /// Standard deviation of positional noise, in pixels.
    pub jitter_px: f64,
    pub speed_px_per_s: f64,
    pub seed: u64,
}

impl DrawerModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..=1.0).contains(&self.priority_noise) {
            return Err(SynthError::BadDrawer("priority_noise"));
        }
        if !(self.jitter_px >= 0.0 && self.jitter_px.is_finite()) {
            return Err(SynthError::BadDrawer("jitter_px"));
        }
        if !(self.speed_px_per_s > 0.0 && self.speed_px_per_s.is_finite()) {
            return Err(SynthError::BadDrawer("speed_px_per_s"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// The drawer's order: the canonical order after one noisy pass of adjacent
/// swaps.
pub fn perturbed_order(canonical: &[usize], noise: f64, rng: &mut Stream) -> Vec<usize> {
    let mut order = canonical.to_vec();
    for i in 1..order.len() {
        if rng.bernoulli(noise) {
            order.swap(i - 1, i);
        }
    }
    order
}

/// Point at arc position `s` along a polyline with cumulative lengths `cum`.
fn point_at(poly: &[(f64, f64)], cum: &[f64], s: f64) -> (f64, f64) {
    let last = poly.len() - 1;
    if s <= 0.0 {
        return poly[0];
    }
    if s >= cum[last] {
        return poly[last];
    }
    let seg = cum.partition_point(|&c| c <= s) - 1;
    let t = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
    let (a, b) = (poly[seg], poly[seg + 1]);
    (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
}

/// Traces `program` with `drawer` under a `time_limit_s` deadline.
///
/// Parts are drawn one stroke each in the drawer's order. Samples fall every
/// 1/60 s from pen-down plus one at the end of the part; if the deadline
/// arrives mid-part a final sample is placed at the deadline and drawing
/// stops. Consecutive parts are separated by a [`PEN_UP_MS`] pause.
pub fn simulate_sketch(
    program: &ShapeProgram,
    drawer: &DrawerModel,
    time_limit_s: u32,
) -> Result<Sketch, SynthError> {
    drawer.validate()?;
    let mut order_rng = Stream::new(derive_seed(drawer.seed, 0));
    let order = perturbed_order(
        &program.canonical_priority,
        drawer.priority_noise,
        &mut order_rng,
    );

    let (w, h) = (f64::from(program.width), f64::from(program.height));
    let clamp = |(x, y): (f64, f64)| (x.clamp(0.0, w), y.clamp(0.0, h));
    let limit_ms = f64::from(time_limit_s) * 1000.0;
    let sample_ms = 1000.0 / SAMPLE_HZ;
    let speed = drawer.speed_px_per_s / 1000.0;
    let noise = drawer.jitter_px * SAMPLE_NOISE_FRACTION;
    let offset_sd = drawer.jitter_px * (1.0 - SAMPLE_NOISE_FRACTION);

    let mut strokes = Vec::new();
    let mut start_ms = 0.0;
    'parts: for &part_idx in &order {
        if start_ms > limit_ms {
            break;
        }
        let mut rng = Stream::new(derive_seed(drawer.seed, part_idx as u64 + 1));
        let (dx, dy) = (rng.normal(offset_sd), rng.normal(offset_sd));
        let poly: Vec<(f64, f64)> = program.parts[part_idx]
            .contour
            .polyline()
            .into_iter()
            .map(|(x, y)| clamp((x + dx, y + dy)))
            .collect();
        let mut cum = vec![0.0];
        for w in poly.windows(2) {
            cum.push(cum[cum.len() - 1] + (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1));
        }
        let duration = cum[cum.len() - 1] / speed;

        let mut samples = Vec::new();
        let mut emit = |local_ms: f64, rng: &mut Stream| {
            let (x, y) = point_at(&poly, &cum, local_ms * speed);
            let p = clamp((x + rng.normal(noise), y + rng.normal(noise)));
            samples.push(StrokeSample::new(
                p.0,
                p.1,
                (start_ms + local_ms).floor() as u64,
            ));
        };
        let mut k = 0u32;
        loop {
            let local = f64::from(k) * sample_ms;
            if local >= duration {
                break;
            }
            if start_ms + local > limit_ms {
                emit(limit_ms - start_ms, &mut rng);
                strokes.push(Stroke::new(samples).expect("non-empty"));
                break 'parts;
            }
            emit(local, &mut rng);
            k += 1;
        }
        if start_ms + duration > limit_ms {
            emit(limit_ms - start_ms, &mut rng);
            strokes.push(Stroke::new(samples).expect("non-empty"));
            break;
        }
        emit(duration, &mut rng);
        strokes.push(Stroke::new(samples).expect("non-empty"));
        start_ms += duration + PEN_UP_MS;
    }

    Ok(Sketch::new(
        format!(
            "{}-{}s-{:016x}",
            program.image_id, time_limit_s, drawer.seed
        ),
        program.image_id.clone(),
        format!("synth-{:016x}", drawer.seed),
        time_limit_s,
        program.width,
        program.height,
        strokes,
    )
    .expect("synthetic samples are clamped to the canvas and time-ordered"))
}

/// `n` independent drawers sharing `template`'s parameters; drawer `i` gets
/// seed `derive_seed(seed, i)`.
pub fn simulate_population(
    program: &ShapeProgram,
    template: &DrawerModel,
    n: usize,
    time_limit_s: u32,
    seed: u64,
) -> Result<Vec<Sketch>, SynthError> {
    template.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            simulate_sketch(
                program,
                &template.with_seed(derive_seed(seed, i)),
                time_limit_s,
            )
        })
        .collect()
}

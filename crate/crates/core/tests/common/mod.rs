#![allow(dead_code)]

use std::collections::HashMap;

use proptest::prelude::*;
use shapeattn::stroke::{LengthMapping, Sketch, Stroke, StrokeSample};

/// Random sketch on a random image of at most 300 x 300 px.
pub fn arb_sketch() -> impl Strategy<Value = Sketch> {
    (60u32..=300, 60u32..=300).prop_flat_map(|(w, h)| arb_sketch_on(w, h))
}

pub fn arb_sketch_on(w: u32, h: u32) -> impl Strategy<Value = Sketch> {
    let point = (0.0..=f64::from(w), 0.0..=f64::from(h));
    prop::collection::vec(prop::collection::vec(point, 1..8), 0..5).prop_map(move |strokes| {
        let strokes = strokes
            .into_iter()
            .map(|pts| {
                Stroke::new(
                    pts.into_iter()
                        .enumerate()
                        .map(|(i, (x, y))| StrokeSample::new(x, y, 16 * i as u64))
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        Sketch::new("s", "img", "d", 20, w, h, strokes).unwrap()
    })
}

/// Brute-force voxel binning: integer division of floored coordinates.
/// Returns dims and a sparse map of non-zero counts.
pub fn brute_force_bins(
    mapping: &LengthMapping,
    w: u32,
    h: u32,
) -> ([usize; 3], HashMap<(usize, usize, usize), u32>) {
    let nx = (w as usize).div_ceil(60);
    let ny = (h as usize).div_ceil(60);
    let len = mapping.total_length();
    let nz = if len > 0.0 {
        (len / 300.0).ceil() as usize
    } else {
        0
    };
    let mut bins = HashMap::new();
    if nz == 0 {
        return ([nx, ny, nz], bins);
    }
    for p in mapping.points() {
        let ix = ((p.x.floor() as usize) / 60).min(nx - 1);
        let iy = ((p.y.floor() as usize) / 60).min(ny - 1);
        let iz = ((p.z.floor() as usize) / 300).min(nz - 1);
        *bins.entry((ix, iy, iz)).or_insert(0) += 1;
    }
    ([nx, ny, nz], bins)
}

/// Splits stroke `stroke` of `sketch` at its `k`-th resample point, which is
/// duplicated as the end of the first piece and the start of the second.
pub fn split_at_resample_point(
    sketch: &Sketch,
    stroke: usize,
    k: usize,
    point: (f64, f64),
) -> Sketch {
    let samples = sketch.strokes()[stroke].samples();
    let mut cum = 0.0;
    let target = k as f64;
    let mut seg = 0;
    for i in 0..samples.len() - 1 {
        let d = (samples[i + 1].x - samples[i].x).hypot(samples[i + 1].y - samples[i].y);
        if cum + d >= target {
            seg = i;
            break;
        }
        cum += d;
        seg = i + 1;
    }
    let t = samples[seg].t_ms;
    let p = StrokeSample::new(point.0, point.1, t);
    let mut first: Vec<StrokeSample> = samples[..=seg].to_vec();
    first.push(p);
    let mut second = vec![p];
    second.extend_from_slice(&samples[seg + 1..]);
    let mut strokes = sketch.strokes().to_vec();
    strokes.splice(
        stroke..=stroke,
        [Stroke::new(first).unwrap(), Stroke::new(second).unwrap()],
    );
    sketch.with_strokes(strokes).unwrap()
}

/// Same geometry with timestamps remapped by `f` (must be monotone).
pub fn retimed(sketch: &Sketch, f: impl Fn(u64) -> u64) -> Sketch {
    let strokes = sketch
        .strokes()
        .iter()
        .map(|s| {
            Stroke::new(
                s.samples()
                    .iter()
                    .map(|p| StrokeSample::new(p.x, p.y, f(p.t_ms)))
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    sketch.with_strokes(strokes).unwrap()
}

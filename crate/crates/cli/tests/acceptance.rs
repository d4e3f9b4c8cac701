//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run alone with `cargo test -p shapeattn-cli --test acceptance`; extra
//! arguments select criteria by substring.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Child, Command, ExitCode, Stdio};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use reqwest::StatusCode;
use shapeattn::dataset::{
    ImageManifest, ManifestEntry, SetLabel, SketchRecord, STANDARD_CATEGORIES,
};
use shapeattn::stats::{
    run_image_test, two_sample_t_test, Comparison, ImageOutcome, TestConfig, TestKind,
};
use shapeattn::stroke::MappedPoint;
use shapeattn::synth::{
    derive_path, derive_seed, simulate_population, simulate_sketch, ConditionSpec, Contour,
    DrawerModel, DrawerParams, Part, PriorityRule, Scenario, ShapeProgram, Stream,
};
use shapeattn::{
    build_length_mapping, pair_dissimilarity, resample_stroke, voxelize, MappedSketch, Sketch,
    Stroke, StrokeSample, VoxelGrid,
};
use shapeattn_capture::{valid_prefix, CoverageSummary, TaskAssignment};

const CELL_XY: usize = 60;
const CELL_Z: usize = 300;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("voxelization-oracle", voxelization_oracle),
        ("metric-axioms", metric_axioms),
        ("truncation", truncation),
        ("t-test-fidelity", ttest_fidelity),
        ("null-calibration", null_calibration),
        ("power", power),
        ("report-bookkeeping", report_bookkeeping),
        ("service", service),
    ];
    let mut ran = 0;
    let mut failed = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        ran += 1;
        failed += usize::from(!verdict.pass);
        println!(
            "{} {name}: {} ({:.2} s)",
            if verdict.pass { "PASS" } else { "FAIL" },
            verdict.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------------------
// Independent oracles

/// Voxel counts by floor-and-divide binning of every point. Only non-zero
/// voxels are stored.
struct Bins {
    dims: [usize; 3],
    counts: HashMap<(usize, usize, usize), u64>,
}

fn brute_bins(points: &[MappedPoint], length: f64, w: u32, h: u32) -> Bins {
    let nx = (w as usize).div_ceil(CELL_XY);
    let ny = (h as usize).div_ceil(CELL_XY);
    let nz = (length / CELL_Z as f64).ceil() as usize;
    let mut counts = HashMap::new();
    if nz > 0 {
        for p in points {
            let ix = (p.x.floor() as usize / CELL_XY).min(nx - 1);
            let iy = (p.y.floor() as usize / CELL_XY).min(ny - 1);
            let iz = (p.z.floor() as usize / CELL_Z).min(nz - 1);
            *counts.entry((ix, iy, iz)).or_insert(0) += 1;
        }
    }
    Bins {
        dims: [nx, ny, nz],
        counts,
    }
}

fn grid_matches(grid: &VoxelGrid, bins: &Bins) -> bool {
    if grid.dims() != bins.dims {
        return false;
    }
    let [nx, ny, nz] = bins.dims;
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                let want = bins.counts.get(&(ix, iy, iz)).copied().unwrap_or(0);
                if u64::from(grid.get(ix, iy, iz)) != want {
                    return false;
                }
            }
        }
    }
    true
}

/// D from two bin maps of equal shape, summed in integers.
fn oracle_d(a: &Bins, b: &Bins) -> f64 {
    let keys: BTreeSet<_> = a.counts.keys().chain(b.counts.keys()).collect();
    let sum: u64 = keys
        .into_iter()
        .map(|k| {
            let x = a.counts.get(k).copied().unwrap_or(0) as i64;
            let y = b.counts.get(k).copied().unwrap_or(0) as i64;
            ((x - y) * (x - y)) as u64
        })
        .sum();
    let [nx, ny, nz] = a.dims;
    sum as f64 / (nx * ny * nz) as f64
}

// ---------------------------------------------------------------------------
// Sketch generators

fn random_drawer(rng: &mut Stream) -> DrawerModel {
    DrawerModel {
        priority_noise: rng.range(0.0, 0.5),
        jitter_px: rng.range(0.0, 6.0),
        speed_px_per_s: rng.range(60.0, 200.0),
        seed: rng.next_u64(),
    }
}

fn random_limit(rng: &mut Stream) -> u32 {
    [10, 20, 40][rng.below(3)]
}

/// Random program on a random image of at most 300 x 300 px.
fn random_program(rng: &mut Stream, id: &str) -> ShapeProgram {
    let w = 60 + rng.below(241) as u32;
    let h = 60 + rng.below(241) as u32;
    ShapeProgram::random(id, w, h, 1 + rng.below(5), rng.next_u64())
}

fn mapped(s: &Sketch) -> MappedSketch {
    MappedSketch::from_sketch(s, 1.0)
}

/// Splits stroke `si` at its `k`-th 1 px grid point; the point ends the first
/// piece and starts the second.
fn split_stroke(sketch: &Sketch, si: usize, k: usize) -> Sketch {
    let point = resample_stroke(&sketch.strokes()[si], 1.0).points[k];
    let samples = sketch.strokes()[si].samples();
    let mut cum = 0.0;
    let mut seg = samples.len() - 1;
    for i in 0..samples.len() - 1 {
        let d = (samples[i + 1].x - samples[i].x).hypot(samples[i + 1].y - samples[i].y);
        if cum + d >= k as f64 {
            seg = i;
            break;
        }
        cum += d;
    }
    let p = StrokeSample::new(point.0, point.1, samples[seg].t_ms);
    let mut first = samples[..=seg.min(samples.len() - 1)].to_vec();
    first.push(p);
    let mut second = vec![p];
    second.extend_from_slice(&samples[(seg + 1).min(samples.len())..]);
    let mut strokes = sketch.strokes().to_vec();
    strokes.splice(
        si..=si,
        [Stroke::new(first).unwrap(), Stroke::new(second).unwrap()],
    );
    sketch.with_strokes(strokes).unwrap()
}

fn retimed(sketch: &Sketch, f: impl Fn(u64) -> u64) -> Sketch {
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

/// Ellipses in distinct 120 px tiles (two cells wide) of a 300 x 300 image,
/// each longer than one length bin.
fn tiled_program(rng: &mut Stream, id: &str) -> ShapeProgram {
    let mut tiles = vec![(60.0, 60.0), (180.0, 60.0), (60.0, 180.0), (180.0, 180.0)];
    let n = 2 + rng.below(3);
    let parts = (0..n)
        .map(|i| {
            let center = tiles.swap_remove(rng.below(tiles.len()));
            Part {
                name: format!("p{i}"),
                contour: Contour::Ellipse {
                    center,
                    rx: rng.range(50.0, 58.0),
                    ry: rng.range(50.0, 58.0),
                    rotation: rng.range(0.0, std::f64::consts::PI),
                },
            }
        })
        .collect();
    ShapeProgram::new(id, 300, 300, parts, (0..n).collect()).unwrap()
}

// ---------------------------------------------------------------------------
// Criteria

fn voxelization_oracle() -> Verdict {
    let start = Instant::now();
    let mismatches: usize = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = Stream::new(derive_seed(0x0ac1e, i));
            let program = random_program(&mut rng, &format!("img{i}"));
            let sketch =
                simulate_sketch(&program, &random_drawer(&mut rng), random_limit(&mut rng))
                    .unwrap();
            let m = build_length_mapping(&sketch, 1.0);
            let grid = voxelize(&m, program.width, program.height).unwrap();
            let bins = brute_bins(m.points(), m.total_length(), program.width, program.height);
            usize::from(!grid_matches(&grid, &bins))
        })
        .sum();
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        mismatches == 0 && secs < 10.0,
        format!("200 sketches, {mismatches} grids differ from brute-force binning, {secs:.2} s (limit 10 s)"),
    )
}

fn metric_axioms() -> Verdict {
    #[derive(Default)]
    struct Tally {
        asym: usize,
        negative: usize,
        self_nonzero: usize,
        split_nonzero: usize,
        split_tested: usize,
        retime_nonzero: usize,
    }
    let tallies: Vec<Tally> = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = Stream::new(derive_seed(0xa110, i));
            let program = random_program(&mut rng, "img");
            let a = simulate_sketch(&program, &random_drawer(&mut rng), random_limit(&mut rng))
                .unwrap();
            let b = simulate_sketch(&program, &random_drawer(&mut rng), random_limit(&mut rng))
                .unwrap();
            let (ma, mb) = (mapped(&a), mapped(&b));
            let ab = pair_dissimilarity(&ma, &mb).unwrap().value;
            let ba = pair_dissimilarity(&mb, &ma).unwrap().value;
            let mut t = Tally {
                asym: usize::from(ab.to_bits() != ba.to_bits()),
                negative: usize::from(ab.is_nan() || ab < 0.0),
                self_nonzero: usize::from(pair_dissimilarity(&ma, &ma).unwrap().value != 0.0),
                ..Tally::default()
            };

            let splittable: Vec<usize> = (0..a.strokes().len())
                .filter(|&s| resample_stroke(&a.strokes()[s], 1.0).points.len() >= 3)
                .collect();
            if !splittable.is_empty() {
                let si = splittable[rng.below(splittable.len())];
                let n = resample_stroke(&a.strokes()[si], 1.0).points.len();
                let split = split_stroke(&a, si, 1 + rng.below(n - 2));
                t.split_tested = 1;
                t.split_nonzero =
                    usize::from(pair_dissimilarity(&ma, &mapped(&split)).unwrap().value != 0.0);
            }
            let slow = retimed(&a, |ms| 3 * ms + 1000);
            t.retime_nonzero =
                usize::from(pair_dissimilarity(&ma, &mapped(&slow)).unwrap().value != 0.0);
            t
        })
        .collect();

    let swap_zero: usize = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = Stream::new(derive_seed(0x5a4b, i));
            let program = tiled_program(&mut rng, "tiles");
            let n = program.parts().len();
            let j = rng.below(n - 1);
            let mut order: Vec<usize> = (0..n).collect();
            order.swap(j, j + 1);
            let swapped = program.with_priority(order).unwrap();
            let drawer = DrawerModel {
                priority_noise: 0.0,
                jitter_px: 0.0,
                speed_px_per_s: 100.0,
                seed: rng.next_u64(),
            };
            let s1 = simulate_sketch(&program, &drawer, 40).unwrap();
            let s2 = simulate_sketch(&swapped, &drawer, 40).unwrap();
            usize::from(
                pair_dissimilarity(&mapped(&s1), &mapped(&s2))
                    .unwrap()
                    .value
                    <= 0.0,
            )
        })
        .sum();

    let sum = |f: fn(&Tally) -> usize| tallies.iter().map(f).sum::<usize>();
    let (asym, neg, selfd) = (
        sum(|t| t.asym),
        sum(|t| t.negative),
        sum(|t| t.self_nonzero),
    );
    let (split, split_n, retime) = (
        sum(|t| t.split_nonzero),
        sum(|t| t.split_tested),
        sum(|t| t.retime_nonzero),
    );
    Verdict::new(
        asym + neg + selfd + split + retime + swap_zero == 0 && split_n > 900,
        format!(
            "1000 pairs: {asym} asymmetric, {neg} negative, {selfd} D(a,a) != 0; \
             {split}/{split_n} re-segmented and {retime}/1000 re-timed copies with D != 0; \
             {swap_zero}/1000 part-order swaps with D = 0"
        ),
    )
}

fn truncation() -> Verdict {
    let results: Vec<(bool, bool)> = (0..300u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = Stream::new(derive_seed(0x7c, i));
            let program = random_program(&mut rng, "img");
            let mut short = random_drawer(&mut rng);
            short.speed_px_per_s = rng.range(30.0, 60.0);
            let a = simulate_sketch(&program, &short, 10).unwrap();
            let b = simulate_sketch(&program, &random_drawer(&mut rng), 40).unwrap();
            let (ma, mb) = (mapped(&a), mapped(&b));
            let unequal = ma.total_length() != mb.total_length();
            let lib = pair_dissimilarity(&ma, &mb).unwrap();

            let common = ma.total_length().min(mb.total_length());
            let (w, h) = (program.width, program.height);
            let cut = |s: &Sketch| -> Bins {
                let full = build_length_mapping(s, 1.0);
                let kept: Vec<MappedPoint> = full
                    .points()
                    .iter()
                    .copied()
                    .filter(|p| p.z <= common)
                    .collect();
                brute_bins(&kept, common, w, h)
            };
            let (ba, bb) = (cut(&a), cut(&b));
            let same = lib.common_length == common
                && lib.voxel_count == ba.dims.iter().product::<usize>()
                && lib.value == oracle_d(&ba, &bb);
            (unequal, same)
        })
        .collect();
    let unequal = results.iter().filter(|r| r.0).count();
    let differ = results.iter().filter(|r| r.0 && !r.1).count();
    Verdict::new(
        differ == 0 && unequal >= 290,
        format!("{unequal} pairs with unequal lengths, {differ} where D differs from the independently truncated oracle"),
    )
}

struct RefCase {
    a: &'static [f64],
    b: &'static [f64],
    t: f64,
    p: f64,
}

/// `scipy.stats.ttest_ind(a, b)` with equal variances.
const REFERENCE: [RefCase; 3] = [
    RefCase {
        a: &[1.0, 2.0, 3.0, 4.0, 5.0],
        b: &[2.0, 3.0, 4.0, 5.0, 6.0],
        t: -1.0,
        p: 0.34659350708733416,
    },
    RefCase {
        a: &[12.1, 14.3, 9.8, 11.0, 13.7, 10.4, 12.9],
        b: &[15.2, 16.8, 14.1, 17.9, 15.5, 16.0],
        t: -4.536742849438836,
        p: 0.0008483877336545969,
    },
    RefCase {
        a: &[0.31, 0.42, 0.29, 0.55, 0.47, 0.38, 0.36, 0.51, 0.44, 0.33],
        b: &[0.61, 0.35, 0.72, 0.28, 0.66, 0.49, 0.81, 0.57, 0.40, 0.69],
        t: -2.4773829357112898,
        p: 0.02338031931320309,
    },
];

fn ttest_fidelity() -> Verdict {
    let mut problems = Vec::new();
    for (i, c) in REFERENCE.iter().enumerate() {
        let r = two_sample_t_test(c.a, c.b, 0.05, TestKind::Pooled).unwrap();
        if (r.t - c.t).abs() > 1e-6 || (r.p_value - c.p).abs() > 1e-4 {
            problems.push(format!("reference {i}: t {} p {}", r.t, r.p_value));
        }
    }
    let same = [3.0, 1.5, 4.0, 1.0, 5.5, 9.0];
    for kind in [TestKind::Pooled, TestKind::Welch] {
        let r = two_sample_t_test(&same, &same, 0.05, kind).unwrap();
        if r.t != 0.0 || r.p_value != 1.0 || r.reject {
            problems.push(format!(
                "identical samples ({kind:?}): t {} p {}",
                r.t, r.p_value
            ));
        }
    }
    let mut rng = Stream::new(0x77e57);
    let mut broken = 0;
    for _ in 0..100 {
        let sample = |rng: &mut Stream| {
            let n = 2 + rng.below(19);
            let (mu, sd) = (rng.range(-5.0, 5.0), rng.range(0.1, 3.0));
            (0..n).map(|_| mu + rng.normal(sd)).collect::<Vec<f64>>()
        };
        let (a, b) = (sample(&mut rng), sample(&mut rng));
        let k = rng.range(0.01, 100.0);
        let scale = |v: &[f64], f: f64| v.iter().map(|x| x * f).collect::<Vec<_>>();
        for kind in [TestKind::Pooled, TestKind::Welch] {
            let base = two_sample_t_test(&a, &b, 0.05, kind).unwrap();
            let scaled = two_sample_t_test(&scale(&a, k), &scale(&b, k), 0.05, kind).unwrap();
            let swapped = two_sample_t_test(&b, &a, 0.05, kind).unwrap();
            let negated =
                two_sample_t_test(&scale(&a, -1.0), &scale(&b, -1.0), 0.05, kind).unwrap();
            let tol = 1e-9 * base.t.abs().max(1.0);
            let ok = (scaled.t - base.t).abs() <= tol
                && (scaled.p_value - base.p_value).abs() <= 1e-9
                && swapped.t == -base.t
                && swapped.p_value == base.p_value
                && (negated.t + base.t).abs() <= tol
                && (negated.p_value - base.p_value).abs() <= 1e-9;
            broken += usize::from(!ok);
        }
    }
    if broken > 0 {
        problems.push(format!(
            "{broken} random inputs break scale or sign symmetry"
        ));
    }
    Verdict::new(
        problems.is_empty(),
        if problems.is_empty() {
            "3 reference sets within 1e-6 / 1e-4, identical samples give t = 0 and p = 1, \
             scale and sign symmetry hold on 100 random inputs"
                .to_owned()
        } else {
            problems.join("; ")
        },
    )
}

fn null_calibration() -> Verdict {
    const SEED: u64 = 0x0dd;
    let start = Instant::now();
    let drawer = {
        let p = DrawerParams::default();
        DrawerModel {
            priority_noise: p.priority_noise,
            jitter_px: p.jitter_px,
            speed_px_per_s: p.speed_px_per_s,
            seed: 0,
        }
    };
    let config = TestConfig::default();
    let rejections: usize = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let id = format!("null{i}");
            let program = ShapeProgram::random(&id, 300, 300, 4, derive_path(SEED, &[1, i]));
            let set = |k: u64| {
                simulate_population(&program, &drawer, 10, 20, derive_path(SEED, &[2, i, k]))
                    .unwrap()
            };
            let (p, b, o) = (set(0), set(1), set(2));
            let r =
                run_image_test(&id, &p, &b, &o, Comparison::Custom("AA'".into()), &config).unwrap();
            usize::from(r.reject)
        })
        .sum();
    let rate = rejections as f64 / 500.0;
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        rate <= 0.15 && secs < 300.0,
        format!(
            "measured rejection rate {rate:.3} ({rejections}/500) at alpha 0.05 (limit 0.15), \
             {secs:.1} s (limit 300 s)"
        ),
    )
}

fn power_scenario(run: u64) -> Scenario {
    let mut s = Scenario::standard(derive_seed(0x90e7, run), 20);
    s.drawer.priority_noise = 0.05;
    let mut ten = ConditionSpec::new(10, SetLabel::Primary, PriorityRule::Reversed);
    ten.priority_noise = Some(0.05);
    let mut forty = ConditionSpec::new(40, SetLabel::Primary, PriorityRule::Canonical);
    forty.priority_noise = Some(0.3);
    s.conditions = vec![
        ten,
        ConditionSpec::new(20, SetLabel::Primary, PriorityRule::Canonical),
        ConditionSpec::new(20, SetLabel::Baseline20s, PriorityRule::Canonical),
        forty,
    ];
    s
}

fn power() -> Verdict {
    let config = TestConfig::default();
    let counts: Vec<(usize, usize)> = (0..20u64)
        .into_par_iter()
        .map(|run| {
            let scenario = power_scenario(run);
            let data = scenario.generate_cells().unwrap();
            let mut n = [0usize; 2];
            for (k, c) in [Comparison::TwentyVsTen, Comparison::TwentyVsForty]
                .into_iter()
                .enumerate()
            {
                for i in 0..scenario.images {
                    let id = scenario.image_id(i);
                    let (p, b, o) = data.comparison_sets(&id, &c).unwrap();
                    n[k] += usize::from(
                        run_image_test(&id, p, b, o, c.clone(), &config)
                            .unwrap()
                            .reject,
                    );
                }
            }
            (n[0], n[1])
        })
        .collect();
    let ordered = counts.iter().filter(|(ten, forty)| ten >= forty).count();
    let ten: usize = counts.iter().map(|c| c.0).sum();
    let forty: usize = counts.iter().map(|c| c.1).sum();
    let power = ten as f64 / 400.0;
    Verdict::new(
        ordered >= 18 && power >= 0.8,
        format!(
            "20v10 >= 20v40 rejections in {ordered}/20 runs (need 18); 20v10 power {power:.3} \
             (need 0.8); 20v40 rate {:.3}",
            forty as f64 / 400.0
        ),
    )
}

/// Per-category rejections of the published tables, in `STANDARD_CATEGORIES`
/// order.
const TABLE_20V10: [usize; 9] = [6, 4, 12, 8, 7, 8, 1, 4, 8];
const TABLE_20V40: [usize; 9] = [2, 3, 11, 5, 4, 7, 0, 2, 5];
const RATES_20V10: [f64; 9] = [0.3, 0.2, 0.29, 0.4, 0.35, 0.4, 0.2, 0.2, 0.4];
const RATES_20V40: [f64; 9] = [0.1, 0.15, 0.26, 0.25, 0.2, 0.35, 0.0, 0.1, 0.25];

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_shapeattn")
}

fn report_bookkeeping() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut entries = Vec::new();
    let mut outcomes = Vec::new();
    for (c, &(category, n)) in STANDARD_CATEGORIES.iter().enumerate() {
        for i in 0..n {
            let image_id = format!("{}-{i:02}", category.replace(' ', "_").to_lowercase());
            entries.push(ManifestEntry {
                image_id: image_id.clone(),
                category: category.to_owned(),
                width: 300,
                height: 300,
                path: format!("{image_id}.png"),
            });
            for (comparison, table) in [
                (Comparison::TwentyVsTen, &TABLE_20V10),
                (Comparison::TwentyVsForty, &TABLE_20V40),
            ] {
                // Rejected images are spread through the category, not leading.
                let k = table[c];
                let reject = (i * k) / n != ((i + 1) * k) / n;
                outcomes.push(ImageOutcome {
                    image_id: image_id.clone(),
                    comparison,
                    t: if reject { -3.0 } else { -0.5 },
                    df: 18.0,
                    p: if reject { 0.008 } else { 0.62 },
                    reject,
                });
            }
        }
    }
    let manifest = ImageManifest::new(entries).unwrap();
    std::fs::write(dir.path().join("manifest.csv"), manifest.to_csv()).unwrap();
    let mut w = csv::Writer::from_path(dir.path().join("results.csv")).unwrap();
    for o in &outcomes {
        w.serialize(o).unwrap();
    }
    w.flush().unwrap();

    let out = Command::new(bin())
        .arg("report")
        .arg("--results")
        .arg(dir.path().join("results.csv"))
        .arg("--manifest")
        .arg(dir.path().join("manifest.csv"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    if !out.status.success() {
        return Verdict::new(
            false,
            format!("report failed: {}", String::from_utf8_lossy(&out.stderr)),
        );
    }

    let read = |name: &str| -> BTreeMap<String, (usize, usize, f64)> {
        let mut r = csv::Reader::from_path(dir.path().join(name)).unwrap();
        r.deserialize::<(String, usize, usize, f64)>()
            .map(|row| {
                let (c, n, k, rate) = row.unwrap();
                (c, (n, k, rate))
            })
            .collect()
    };
    let mut problems = Vec::new();
    for (file, table, rates, total) in [
        ("20v10.csv", &TABLE_20V10, &RATES_20V10, 58),
        ("20v40.csv", &TABLE_20V40, &RATES_20V40, 39),
    ] {
        let rows = read(file);
        for (c, &(category, n)) in STANDARD_CATEGORIES.iter().enumerate() {
            match rows.get(category) {
                Some(&(count, k, rate))
                    if count == n
                        && k == table[c]
                        && ((rate * 100.0).round() - rates[c] * 100.0).abs() < 1e-9 => {}
                other => problems.push(format!("{file} {category}: {other:?}")),
            }
        }
        match rows.get("Total") {
            Some(&(187, k, _)) if k == total => {}
            other => problems.push(format!("{file} Total: {other:?}")),
        }
    }
    let faces = read("20v10.csv")["Faces"];
    let natural = read("20v40.csv")["Natural Objects"];
    Verdict::new(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "Faces 20v10 ({}, {}), Natural Objects 20v40 ({}, {}), totals 58 and 39; \
                 all 18 category rows match the published counts and two-decimal rates",
                faces.1, faces.2, natural.1, natural.2
            )
        } else {
            problems.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// Capture service, driven over HTTP against the real binary

const SERVICE_IMAGES: [&str; 3] = ["alpha", "beta", "gamma"];
const TARGET: usize = 10;

struct ServerProcess {
    child: Child,
    base: String,
}

impl ServerProcess {
    fn spawn(dir: &Path) -> Self {
        let mut child = Command::new(bin())
            .args(["serve", "--port", "0", "--target", &TARGET.to_string()])
            .arg("--data")
            .arg(dir.join("store.jsonl"))
            .arg("--manifest")
            .arg(dir.join("manifest.csv"))
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected server output {line:?}"))
            .to_owned();
        Self {
            child,
            base: format!("http://{addr}"),
        }
    }

    /// SIGKILL on Unix.
    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for ServerProcess {
    fn drop(&mut self) {
        self.kill();
    }
}

fn service_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let manifest = ImageManifest::new(SERVICE_IMAGES.iter().map(|id| ManifestEntry {
        image_id: (*id).to_owned(),
        category: "Synthetic".to_owned(),
        width: 300,
        height: 300,
        path: format!("{id}.png"),
    }))
    .unwrap();
    std::fs::write(dir.path().join("manifest.csv"), manifest.to_csv()).unwrap();
    dir
}

/// What the drawers saw: ids acknowledged by the server and ids posted.
#[derive(Default)]
struct Ledger {
    acked: BTreeSet<String>,
    posted: BTreeSet<String>,
    rejected: usize,
}

fn submission(task: &TaskAssignment, drawer_seed: u64, valid: bool) -> SketchRecord {
    let image = SERVICE_IMAGES
        .iter()
        .position(|i| *i == task.image_id)
        .unwrap() as u64;
    let program = ShapeProgram::random(&task.image_id, 300, 300, 4, derive_seed(0x5e7, image));
    let drawer = DrawerModel {
        priority_noise: 0.1,
        jitter_px: 3.0,
        speed_px_per_s: 100.0,
        seed: drawer_seed,
    };
    let sketch = simulate_sketch(&program, &drawer, task.time_limit_s).unwrap();
    let mut r = SketchRecord::from_sketch(&sketch, task.set_label, "acceptance");
    if !valid {
        r.strokes.clear();
    }
    r
}

/// One drawer: ask for tasks and submit them until the collection is complete
/// or the server goes away. Every `invalid_every`-th submission is empty.
async fn drawer_loop(
    client: reqwest::Client,
    base: String,
    drawer: usize,
    invalid_every: usize,
    ledger: Arc<Mutex<Ledger>>,
    submissions: Arc<AtomicUsize>,
) {
    let id = format!("drawer{drawer:03}");
    let mut idle = 0;
    loop {
        let Ok(resp) = client
            .get(format!("{base}/api/task?drawer_id={id}"))
            .send()
            .await
        else {
            return;
        };
        match resp.status() {
            StatusCode::OK => {}
            StatusCode::GONE => return,
            _ => {
                // Nothing eligible right now: wait for in-flight tasks to settle.
                idle += 1;
                if idle > 2000 {
                    return;
                }
                tokio::time::sleep(Duration::from_millis(5)).await;
                continue;
            }
        }
        idle = 0;
        let Ok(task) = resp.json::<TaskAssignment>().await else {
            return;
        };
        let n = submissions.fetch_add(1, Ordering::SeqCst) + 1;
        let valid = invalid_every == 0 || n % invalid_every != 0;
        let record = submission(&task, derive_seed(drawer as u64, n as u64), valid);
        // Drawing takes a moment; this keeps several tasks in flight at once.
        tokio::time::sleep(Duration::from_millis(
            10 + derive_seed(drawer as u64, n as u64) % 50,
        ))
        .await;
        ledger.lock().unwrap().posted.insert(task.task_id.clone());
        let Ok(resp) = client
            .post(format!("{base}/api/submission/{}", task.task_id))
            .json(&record)
            .send()
            .await
        else {
            return;
        };
        let mut l = ledger.lock().unwrap();
        match resp.status() {
            StatusCode::OK => {
                l.acked.insert(task.task_id);
            }
            StatusCode::UNPROCESSABLE_ENTITY => l.rejected += 1,
            _ => {}
        }
    }
}

async fn stats(client: &reqwest::Client, base: &str) -> Option<CoverageSummary> {
    client
        .get(format!("{base}/api/stats"))
        .send()
        .await
        .ok()?
        .json()
        .await
        .ok()
}

fn spread(s: &CoverageSummary) -> usize {
    let totals = s.cells.iter().map(|c| c.accepted + c.in_flight);
    totals.clone().max().unwrap_or(0) - totals.min().unwrap_or(0)
}

fn stored(dir: &Path) -> (Vec<SketchRecord>, usize, usize) {
    let bytes = std::fs::read(dir.join("store.jsonl")).unwrap_or_default();
    let (records, valid) = valid_prefix(&bytes);
    (records, valid, bytes.len())
}

fn per_cell(records: &[SketchRecord]) -> BTreeMap<(String, u32, SetLabel), usize> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry((r.image_id.clone(), r.time_limit_s, r.set_label))
            .or_insert(0) += 1;
    }
    m
}

fn summary_cells(s: &CoverageSummary) -> BTreeMap<(String, u32, SetLabel), usize> {
    s.cells
        .iter()
        .filter(|c| c.accepted > 0)
        .map(|c| {
            (
                (c.image_id.clone(), c.time_limit_s, c.set_label),
                c.accepted,
            )
        })
        .collect()
}

fn service() -> Verdict {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let mut problems = Vec::new();
    let mut notes = Vec::new();

    // Uninterrupted run: 100 concurrent drawers fill all cells while a
    // monitor samples coverage.
    {
        let dir = service_dir();
        let server = ServerProcess::spawn(dir.path());
        let client = reqwest::Client::new();
        let ledger = Arc::new(Mutex::new(Ledger::default()));
        let done = Arc::new(AtomicBool::new(false));
        let (max_spread, samples, final_stats) = rt.block_on(async {
            let monitor = {
                let (client, base, done) = (client.clone(), server.base.clone(), done.clone());
                tokio::spawn(async move {
                    let (mut worst, mut n) = (0, 0);
                    while !done.load(Ordering::SeqCst) {
                        if let Some(s) = stats(&client, &base).await {
                            worst = worst.max(spread(&s));
                            n += 1;
                        }
                        tokio::task::yield_now().await;
                    }
                    (worst, n)
                })
            };
            let submissions = Arc::new(AtomicUsize::new(0));
            let drawers: Vec<_> = (0..100)
                .map(|d| {
                    tokio::spawn(drawer_loop(
                        client.clone(),
                        server.base.clone(),
                        d,
                        0,
                        ledger.clone(),
                        submissions.clone(),
                    ))
                })
                .collect();
            for d in drawers {
                d.await.unwrap();
            }
            done.store(true, Ordering::SeqCst);
            let (worst, n) = monitor.await.unwrap();
            (worst, n, stats(&client, &server.base).await.unwrap())
        });
        let (records, valid, len) = stored(dir.path());
        let cells = per_cell(&records);
        let over = cells.values().filter(|&&n| n > TARGET).count();
        if !final_stats.complete || final_stats.accepted != 12 * TARGET {
            problems.push(format!(
                "run did not complete: {} accepted",
                final_stats.accepted
            ));
        }
        if over > 0 || final_stats.cells.iter().any(|c| c.accepted > TARGET) {
            problems.push(format!("{over} cells over target"));
        }
        if max_spread > 1 {
            problems.push(format!("coverage spread reached {max_spread}"));
        }
        if valid != len || records.len() != ledger.lock().unwrap().acked.len() {
            problems.push("store does not match acknowledgements".to_owned());
        }
        notes.push(format!(
            "{} cells filled to {TARGET}, max spread {max_spread} over {samples} samples",
            final_stats.cells.len()
        ));
    }

    // Crash run: some submissions are invalid, the server is SIGKILLed while
    // drawers are active, then restarted on the same store.
    {
        let dir = service_dir();
        let mut server = ServerProcess::spawn(dir.path());
        let client = reqwest::Client::new();
        let ledger = Arc::new(Mutex::new(Ledger::default()));
        rt.block_on(async {
            let submissions = Arc::new(AtomicUsize::new(0));
            let drawers: Vec<_> = (0..100)
                .map(|d| {
                    tokio::spawn(drawer_loop(
                        client.clone(),
                        server.base.clone(),
                        d,
                        7,
                        ledger.clone(),
                        submissions.clone(),
                    ))
                })
                .collect();
            while ledger.lock().unwrap().acked.len() < 50 {
                tokio::time::sleep(Duration::from_millis(1)).await;
            }
            server.kill();
            for d in drawers {
                d.await.unwrap();
            }
        });

        let (records, valid, len) = stored(dir.path());
        let ids: BTreeSet<String> = records.iter().map(|r| r.sketch_id.clone()).collect();
        let l = ledger.lock().unwrap();
        if valid != len {
            problems.push(format!(
                "store not valid JSONL after kill: {valid} of {len} bytes parse"
            ));
        }
        if !l.acked.is_subset(&ids) || !ids.is_subset(&l.posted) || ids.len() != records.len() {
            problems.push(format!(
                "store holds {} records; {} acknowledged, {} posted",
                records.len(),
                l.acked.len(),
                l.posted.len()
            ));
        }
        notes.push(format!(
            "killed after {} acks ({} stored, {} rejected)",
            l.acked.len(),
            records.len(),
            l.rejected
        ));
        drop(l);

        let server = ServerProcess::spawn(dir.path());
        rt.block_on(async {
            let s = stats(&client, &server.base).await.unwrap();
            if s.accepted != records.len()
                || s.in_flight != 0
                || summary_cells(&s) != per_cell(&records)
            {
                problems.push(format!(
                    "rebuilt coverage {} accepted, store has {}",
                    s.accepted,
                    records.len()
                ));
            }
            let submissions = Arc::new(AtomicUsize::new(0));
            let drawers: Vec<_> = (0..100)
                .map(|d| {
                    tokio::spawn(drawer_loop(
                        client.clone(),
                        server.base.clone(),
                        d + 100,
                        0,
                        ledger.clone(),
                        submissions.clone(),
                    ))
                })
                .collect();
            for d in drawers {
                d.await.unwrap();
            }
        });
        let (records, valid, len) = stored(dir.path());
        let cells = per_cell(&records);
        let ids: BTreeSet<&str> = records.iter().map(|r| r.sketch_id.as_str()).collect();
        if valid != len
            || records.len() != 12 * TARGET
            || cells.len() != 12
            || cells.values().any(|&n| n != TARGET)
            || ids.len() != records.len()
        {
            problems.push(format!(
                "after restart: {} records in {} cells, max per cell {:?}",
                records.len(),
                cells.len(),
                cells.values().max()
            ));
        }
        notes.push("restart completed every cell".to_owned());
        drop(server);
    }

    Verdict::new(
        problems.is_empty(),
        if problems.is_empty() {
            notes.join("; ")
        } else {
            problems.join("; ")
        },
    )
}

use std::collections::BTreeMap;
use std::io::{Cursor, Write};
use std::net::SocketAddr;
use std::sync::Arc;

use anyhow::{Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use shapeattn::dataset::{load_dataset, ImageManifest, ValidationConfig};
use shapeattn::stats::{
    aggregate_categories, run_image_test, Comparison, ImageOutcome, TestConfig, TestKind,
};
use shapeattn::synth::Scenario;
use shapeattn::{build_length_mapping, pair_dissimilarity, voxelize as voxelize_mapping};
use shapeattn::{MappedSketch, Sketch};
use shapeattn_capture::{AppState, CaptureService, JsonlStore, ServiceConfig, SystemClock};

use crate::output::{pick_record, write_atomic};
use crate::render::render_mapping;
use crate::{
    AbtestArgs, CompareArgs, RenderArgs, ReportArgs, ServeArgs, SimulateArgs, SketchSource,
    UsageError, VoxelizeArgs,
};

fn check_spacing(spacing: f64) -> Result<()> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(UsageError(format!("spacing must be positive, got {spacing}")).into());
    }
    Ok(())
}

fn load_sketch(src: &SketchSource) -> Result<Sketch> {
    let record = pick_record(&src.input, src.sketch_id.as_deref())?;
    record
        .to_sketch()
        .with_context(|| format!("sketch {}", record.sketch_id))
}

fn emit(out: Option<&std::path::Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn voxelize(args: VoxelizeArgs) -> Result<()> {
    check_spacing(args.spacing)?;
    let sketch = load_sketch(&args.source)?;
    let mapping = build_length_mapping(&sketch, args.spacing);
    let grid = voxelize_mapping(&mapping, sketch.canvas_w(), sketch.canvas_h())?;
    emit(args.out.as_deref(), &grid.dump())
}

pub fn compare(args: CompareArgs) -> Result<()> {
    check_spacing(args.spacing)?;
    let mapped = |path: &std::path::Path| -> Result<MappedSketch> {
        let sketch = pick_record(path, None)?
            .to_sketch()
            .with_context(|| format!("{}", path.display()))?;
        let w = args.image_w.unwrap_or(sketch.canvas_w());
        let h = args.image_h.unwrap_or(sketch.canvas_h());
        Ok(MappedSketch::new(
            build_length_mapping(&sketch, args.spacing),
            w,
            h,
        ))
    };
    let d = pair_dissimilarity(&mapped(&args.a)?, &mapped(&args.b)?)?;
    println!("{}", d.value);
    Ok(())
}

fn parse_comparisons(s: &str) -> Result<Vec<Comparison>> {
    match s {
        "both" => Ok(vec![Comparison::TwentyVsTen, Comparison::TwentyVsForty]),
        "20v10" => Ok(vec![Comparison::TwentyVsTen]),
        "20v40" => Ok(vec![Comparison::TwentyVsForty]),
        other => Err(UsageError(format!(
            "unknown comparison {other:?}; expected 20v10, 20v40 or both"
        ))
        .into()),
    }
}

pub fn abtest(args: AbtestArgs) -> Result<()> {
    check_spacing(args.spacing)?;
    let comparisons = parse_comparisons(&args.comparison)?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(UsageError(format!("alpha must be in (0, 1), got {}", args.alpha)).into());
    }
    let config = TestConfig {
        spacing: args.spacing,
        alpha: args.alpha,
        kind: if args.welch {
            TestKind::Welch
        } else {
            TestKind::Pooled
        },
    };
    let manifest = ImageManifest::load(&args.manifest)?;
    let dataset = load_dataset(&args.data, &manifest, &ValidationConfig::from_env())?;
    if !dataset.exclusions.is_empty() {
        warn!("{} records excluded", dataset.exclusions.len());
    }

    let mut jobs = Vec::new();
    for c in &comparisons {
        for entry in manifest.entries() {
            let id = entry.image_id.as_str();
            let (p, b, o) = dataset
                .comparison_sets(id, c)
                .expect("standard comparisons have a time limit");
            if p.len() < 2 || b.len() < 2 || o.len() < 2 {
                warn!(
                    "{id} {c}: skipped, set sizes {} / {} / {}",
                    p.len(),
                    b.len(),
                    o.len()
                );
                continue;
            }
            jobs.push((id, c.clone(), p, b, o));
        }
    }
    let mut outcomes = jobs
        .into_par_iter()
        .map(|(id, c, p, b, o)| run_image_test(id, p, b, o, c, &config).map(|r| r.outcome()))
        .collect::<Result<Vec<ImageOutcome>, _>>()?;
    outcomes.sort_by(|a, b| {
        (a.comparison.as_str(), &a.image_id).cmp(&(b.comparison.as_str(), &b.image_id))
    });
    info!("{} image tests", outcomes.len());

    let mut w = csv::Writer::from_writer(Vec::new());
    for o in &outcomes {
        w.serialize(o)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    emit(args.out.as_deref(), &String::from_utf8(bytes)?)
}

pub fn report(args: ReportArgs) -> Result<()> {
    let manifest = ImageManifest::load(&args.manifest)?;
    let mut reader = csv::Reader::from_path(&args.results)
        .with_context(|| format!("opening {}", args.results.display()))?;
    let mut groups: BTreeMap<String, Vec<ImageOutcome>> = BTreeMap::new();
    for row in reader.deserialize() {
        let o: ImageOutcome = row.with_context(|| format!("reading {}", args.results.display()))?;
        groups.entry(o.comparison.to_string()).or_default().push(o);
    }
    let categories = manifest.categories();
    let mut text = String::new();
    for (name, rows) in &groups {
        let report = aggregate_categories(rows, &categories)?;
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&report.to_text());
        if let Some(dir) = &args.out_dir {
            write_atomic(&dir.join(format!("{name}.csv")), report.to_csv().as_bytes())?;
        }
    }
    print!("{text}");
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let scenario: Scenario =
        toml::from_str(&text).with_context(|| format!("parsing {}", args.scenario.display()))?;
    let data = scenario.generate()?;
    write_atomic(&args.out, data.to_jsonl().as_bytes())?;
    write_atomic(&args.manifest_out, data.manifest.to_csv().as_bytes())?;
    eprintln!(
        "wrote {} sketches for {} images",
        data.records.len(),
        data.manifest.len()
    );
    Ok(())
}

pub fn render(args: RenderArgs) -> Result<()> {
    if args.scale == 0 || args.scale > 16 {
        return Err(UsageError(format!("scale must be 1..=16, got {}", args.scale)).into());
    }
    let sketch = load_sketch(&args.source)?;
    let mapping = build_length_mapping(&sketch, shapeattn::DEFAULT_SPACING_PX);
    let img = render_mapping(&mapping, sketch.canvas_w(), sketch.canvas_h(), args.scale);
    let mut png = Cursor::new(Vec::new());
    img.write_to(&mut png, image::ImageFormat::Png)?;
    write_atomic(&args.out, png.get_ref())
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let manifest = Arc::new(ImageManifest::load(&args.manifest)?);
    let recovered = JsonlStore::open(&args.data)?;
    if recovered.truncated_bytes > 0 {
        warn!(
            "recovered store: cut {} trailing bytes",
            recovered.truncated_bytes
        );
    }
    let mut validation = ValidationConfig::default();
    if let Some(g) = args.grace_ms {
        validation.grace_ms = g;
    }
    if let Some(m) = args.min_length_px {
        validation.min_length_px = m;
    }
    if args.target == 0 {
        return Err(UsageError("target must be at least 1".into()).into());
    }
    let config = ServiceConfig {
        target: args.target,
        expiry_ms: args.expiry_s * 1000,
        validation,
        ..ServiceConfig::default()
    };
    let service = CaptureService::new(
        manifest.clone(),
        config,
        Arc::new(SystemClock),
        Box::new(recovered.store),
        &recovered.records,
    );
    let addr: SocketAddr = format!("{}:{}", args.bind, args.port)
        .parse()
        .map_err(|e| UsageError(format!("bad bind address: {e}")))?;

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        println!("listening on {}", listener.local_addr()?);
        std::io::stdout().flush()?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        shapeattn_capture::serve(listener, AppState::new(service, manifest), shutdown).await?;
        Ok(())
    })
}

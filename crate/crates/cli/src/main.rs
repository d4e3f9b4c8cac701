//! `shapeattn` command-line tool.

mod commands;
mod output;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Length-parameterized comparison of traced sketches.
#[derive(Debug, Parser)]
#[command(name = "shapeattn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the voxel grid of one sketch.
    Voxelize(VoxelizeArgs),
    /// Print the dissimilarity D between two sketches.
    Compare(CompareArgs),
    /// Run the AA/AB test for every image of a dataset.
    Abtest(AbtestArgs),
    /// Summarize per-image results by category.
    Report(ReportArgs),
    /// Generate a synthetic dataset from a scenario file.
    Simulate(SimulateArgs),
    /// Draw a sketch as a PNG, colored from early (yellow) to late (blue).
    Render(RenderArgs),
    /// Run the capture service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SketchSource {
    /// JSONL file of sketch records.
    input: PathBuf,
    /// Record to use; defaults to the first one.
    #[arg(long)]
    sketch_id: Option<String>,
}

#[derive(Debug, Args)]
struct VoxelizeArgs {
    #[command(flatten)]
    source: SketchSource,
    #[arg(long, default_value_t = shapeattn::DEFAULT_SPACING_PX)]
    spacing: f64,
    /// Write the dump here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// JSONL file holding the first sketch (its first record is used).
    a: PathBuf,
    /// JSONL file holding the second sketch.
    b: PathBuf,
    /// Image width, if it differs from the records' canvas.
    #[arg(long)]
    image_w: Option<u32>,
    #[arg(long)]
    image_h: Option<u32>,
    #[arg(long, default_value_t = shapeattn::DEFAULT_SPACING_PX)]
    spacing: f64,
}

#[derive(Debug, Args)]
struct AbtestArgs {
    /// Sketch records (JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Image manifest (CSV or JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Comparisons to run: 20v10, 20v40 or both.
    #[arg(long, default_value = "both")]
    comparison: String,
    #[arg(long, default_value_t = shapeattn::stats::DEFAULT_ALPHA)]
    alpha: f64,
    /// Welch's unequal-variance test instead of the pooled test.
    #[arg(long)]
    welch: bool,
    #[arg(long, default_value_t = shapeattn::DEFAULT_SPACING_PX)]
    spacing: f64,
    /// Results CSV; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Results CSV written by `abtest`.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Also write one `<comparison>.csv` table per comparison here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output JSONL.
    #[arg(long, short)]
    out: PathBuf,
    /// Output manifest CSV.
    #[arg(long)]
    manifest_out: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    source: SketchSource,
    #[arg(long, short)]
    out: PathBuf,
    /// Output pixels per image pixel.
    #[arg(long, default_value_t = 1)]
    scale: u32,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "SHAPEATTN_BIND", default_value = "127.0.0.1")]
    bind: String,
    /// 0 picks a free port.
    #[arg(long, env = "SHAPEATTN_PORT", default_value_t = 8080)]
    port: u16,
    /// Append-only JSONL store of accepted sketches.
    #[arg(long, env = "SHAPEATTN_DATA")]
    data: PathBuf,
    #[arg(long, env = "SHAPEATTN_MANIFEST")]
    manifest: PathBuf,
    /// Accepted sketches wanted per cell.
    #[arg(long, env = "SHAPEATTN_TARGET", default_value_t = 10)]
    target: usize,
    #[arg(long, env = "SKETCH_GRACE_MS")]
    grace_ms: Option<u64>,
    #[arg(long, env = "SKETCH_MIN_LEN_PX")]
    min_length_px: Option<f64>,
    /// Seconds before an unanswered task returns to the pool.
    #[arg(long, default_value_t = 600)]
    expiry_s: u64,
}

/// Bad arguments that clap cannot catch; exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Voxelize(a) => commands::voxelize(a),
        Command::Compare(a) => commands::compare(a),
        Command::Abtest(a) => commands::abtest(a),
        Command::Report(a) => commands::report(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Render(a) => commands::render(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use shapeattn::dataset::SketchRecord;
use tempfile::NamedTempFile;

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<SketchRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = SketchRecord::parse_line(&line)
            .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        out.push(r);
    }
    Ok(out)
}

/// The record with `sketch_id`, or the first record.
pub fn pick_record(path: &Path, sketch_id: Option<&str>) -> Result<SketchRecord> {
    let records = read_records(path)?;
    let found = match sketch_id {
        Some(id) => records.into_iter().find(|r| r.sketch_id == id),
        None => records.into_iter().next(),
    };
    match (found, sketch_id) {
        (Some(r), _) => Ok(r),
        (None, Some(id)) => bail!("{}: no sketch {id}", path.display()),
        (None, None) => bail!("{}: no sketches", path.display()),
    }
}

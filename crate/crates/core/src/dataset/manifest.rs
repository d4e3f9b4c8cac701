use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The nine source-image super-categories and their image counts in the
/// original collection (187 images).
pub const STANDARD_CATEGORIES: [(&str, usize); 9] = [
    ("Abstract Shape", 20),
    ("Animal", 20),
    ("Artifacts", 42),
    ("Faces", 20),
    ("Food", 20),
    ("Geological Formation", 20),
    ("Natural Objects", 5),
    ("People", 20),
    ("Plant", 20),
];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("reading manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate image id {0}")]
    DuplicateImage(String),
    #[error("image {0} has a zero dimension")]
    EmptyImage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub category: String,
    pub width: u32,
    pub height: u32,
    /// File path (relative to the manifest) or URL of the source image.
    #[serde(default)]
    pub path: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageManifest {
    entries: BTreeMap<String, ManifestEntry>,
    base_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonManifest {
    List(Vec<ManifestEntry>),
    Wrapped { images: Vec<ManifestEntry> },
}

impl ImageManifest {
    pub fn new(entries: impl IntoIterator<Item = ManifestEntry>) -> Result<Self, ManifestError> {
        let mut map = BTreeMap::new();
        for e in entries {
            if e.width == 0 || e.height == 0 {
                return Err(ManifestError::EmptyImage(e.image_id));
            }
            if map.contains_key(&e.image_id) {
                return Err(ManifestError::DuplicateImage(e.image_id));
            }
            map.insert(e.image_id.clone(), e);
        }
        Ok(Self {
            entries: map,
            base_dir: None,
        })
    }

    /// Loads a `.json` manifest (a list, or `{"images": [...]}`) or a CSV
    /// with header `image_id,category,width,height,path`.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_owned(),
            source,
        })?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut manifest = if is_json {
            Self::from_json(&text)?
        } else {
            Self::from_csv(&text)?
        };
        manifest.base_dir = path.parent().map(Path::to_owned);
        Ok(manifest)
    }

    pub fn from_csv(text: &str) -> Result<Self, ManifestError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let entries = reader
            .deserialize()
            .collect::<Result<Vec<ManifestEntry>, _>>()?;
        Self::new(entries)
    }

    pub fn from_json(text: &str) -> Result<Self, ManifestError> {
        let entries = match serde_json::from_str(text)? {
            JsonManifest::List(v) | JsonManifest::Wrapped { images: v } => v,
        };
        Self::new(entries)
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for e in self.entries.values() {
            writer.serialize(e).expect("in-memory CSV write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory CSV flush"))
            .expect("CSV output is UTF-8")
    }

    pub fn get(&self, image_id: &str) -> Option<&ManifestEntry> {
        self.entries.get(image_id)
    }

    /// Entries in image id order.
    pub fn entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// image id → category.
    pub fn categories(&self) -> BTreeMap<String, String> {
        self.entries
            .values()
            .map(|e| (e.image_id.clone(), e.category.clone()))
            .collect()
    }

    /// Local file of an entry, resolved against the manifest's directory.
    pub fn resolve_path(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_owned(),
        }
    }
}

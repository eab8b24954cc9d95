//! On-disk feature store: a JSON manifest plus one headerless payload of
//! little-endian `f32` values per class, row-major.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cilrec_core::embedding::EmbeddingSet;
use cilrec_core::linalg::Matrix;
use cilrec_core::stream::{ClassData, LabeledDataset};
use cilrec_core::ClassId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed manifest: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("{}: unsupported format_version {found} (this build reads {FORMAT_VERSION})", path.display())]
    Version { path: PathBuf, found: u32 },
    #[error("class {id} (`{}`): dimension mismatch, expected {expected} but the payload holds {found} values, not a whole number of rows", file.display())]
    PayloadShape {
        id: ClassId,
        file: PathBuf,
        expected: usize,
        found: u64,
    },
    #[error("class {id} (`{}`): dimension mismatch, expected {expected} but found {found}", file.display())]
    DimensionMismatch {
        id: ClassId,
        file: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("class {id} (`{}`): truncated payload, {found} bytes for {expected} declared", file.display())]
    Truncated {
        id: ClassId,
        file: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("class {id} (`{}`): {extra} rows beyond the {rows} declared", file.display())]
    TrailingRows {
        id: ClassId,
        file: PathBuf,
        rows: usize,
        extra: u64,
    },
    #[error("class {id} (`{}`): non-finite value at row {row}", file.display())]
    NonFinite { id: ClassId, file: PathBuf, row: usize },
    #[error("unknown class id {id} in {}", manifest.display())]
    UnknownClass { id: ClassId, manifest: PathBuf },
    #[error("class id {id} is declared twice in {}", manifest.display())]
    DuplicateClass { id: ClassId, manifest: PathBuf },
    #[error("class {id} (`{name}`) has {rows} rows; embedding stores need exactly one row per label")]
    NotSingleRow { id: ClassId, name: String, rows: usize },
    #[error(transparent)]
    Core(#[from] cilrec_core::Error),
}

pub type Result<T> = std::result::Result<T, StoreError>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub dimension: usize,
    pub classes: Vec<ManifestClass>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestClass {
    pub id: ClassId,
    pub name: String,
    pub rows: usize,
    /// Relative to the manifest's directory.
    pub file: PathBuf,
}

/// A validated manifest; payloads are read on demand.
#[derive(Clone, Debug)]
pub struct FeatureStore {
    path: PathBuf,
    root: PathBuf,
    manifest: Manifest,
}

impl FeatureStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let text = fs::read_to_string(&path).map_err(|source| StoreError::Io {
            path: path.clone(),
            source,
        })?;
        // Check the version before the schema so that a future layout is
        // reported as such rather than as a parse error.
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| StoreError::Manifest {
            path: path.clone(),
            message: e.to_string(),
        })?;
        match raw.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(StoreError::Version {
                    path,
                    found: u32::try_from(v).unwrap_or(u32::MAX),
                })
            }
            None => {
                return Err(StoreError::Manifest {
                    path,
                    message: "missing integer `format_version`".into(),
                })
            }
        }
        let manifest: Manifest = serde_path_to_error::deserialize(raw).map_err(|e| StoreError::Manifest {
            path: path.clone(),
            message: format!("{}: {}", e.path(), e.inner()),
        })?;
        if manifest.dimension == 0 {
            return Err(StoreError::Manifest {
                path,
                message: "dimension: must be at least 1".into(),
            });
        }
        let mut seen = BTreeSet::new();
        for c in &manifest.classes {
            if !seen.insert(c.id) {
                return Err(StoreError::DuplicateClass { id: c.id, manifest: path });
            }
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { path, root, manifest })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn dimension(&self) -> usize {
        self.manifest.dimension
    }

    /// Fails with [`StoreError::DimensionMismatch`] naming the first class
    /// when the store's dimension is not `expected`.
    pub fn expect_dimension(&self, expected: usize) -> Result<()> {
        if self.dimension() == expected {
            return Ok(());
        }
        let (id, file) = self
            .manifest
            .classes
            .first()
            .map(|c| (c.id, self.root.join(&c.file)))
            .unwrap_or((0, self.path.clone()));
        Err(StoreError::DimensionMismatch {
            id,
            file,
            expected,
            found: self.dimension(),
        })
    }

    fn entry(&self, id: ClassId) -> Result<&ManifestClass> {
        self.manifest
            .classes
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| StoreError::UnknownClass {
                id,
                manifest: self.path.clone(),
            })
    }

    pub fn load_class(&self, id: ClassId) -> Result<ClassData> {
        let entry = self.entry(id)?;
        let file = self.root.join(&entry.file);
        let bytes = fs::read(&file).map_err(|source| StoreError::Io {
            path: file.clone(),
            source,
        })?;
        let d = self.dimension();
        let row_bytes = 4 * d as u64;
        let expected = row_bytes * entry.rows as u64;
        let found = bytes.len() as u64;
        if found < expected {
            return Err(StoreError::Truncated { id, file, expected, found });
        }
        if found % row_bytes != 0 {
            return Err(StoreError::PayloadShape {
                id,
                file,
                expected: d,
                found: found / 4,
            });
        }
        if found > expected {
            return Err(StoreError::TrailingRows {
                id,
                file,
                rows: entry.rows,
                extra: (found - expected) / row_bytes,
            });
        }
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite { id, file, row: i / d });
        }
        let mut features = Matrix::with_cols(d);
        for row in values.chunks_exact(d) {
            features.push_row(row)?;
        }
        Ok(ClassData {
            id,
            name: entry.name.clone(),
            features,
        })
    }

    pub fn load_classes(&self, ids: &[ClassId]) -> Result<LabeledDataset> {
        let classes = ids.iter().map(|&id| self.load_class(id)).collect::<Result<_>>()?;
        Ok(LabeledDataset {
            dimension: self.dimension(),
            classes,
        })
    }

    pub fn load_all(&self) -> Result<LabeledDataset> {
        let ids: Vec<ClassId> = self.manifest.classes.iter().map(|c| c.id).collect();
        self.load_classes(&ids)
    }

    /// Reads a store with one row per class as an embedding set labeled by
    /// class name. Rows are L2-normalized on load.
    pub fn load_embeddings(&self) -> Result<EmbeddingSet> {
        if let Some(c) = self.manifest.classes.iter().find(|c| c.rows != 1) {
            return Err(StoreError::NotSingleRow {
                id: c.id,
                name: c.name.clone(),
                rows: c.rows,
            });
        }
        let data = self.load_all()?;
        let mut vectors = Matrix::with_cols(data.dimension);
        let mut labels = Vec::with_capacity(data.classes.len());
        for c in &data.classes {
            vectors.push_row(c.features.row(0))?;
            labels.push(c.name.clone());
        }
        Ok(EmbeddingSet::normalized(labels, &vectors)?)
    }
}

/// Shorthand for [`FeatureStore::open`] followed by [`FeatureStore::load_all`].
pub fn load_feature_store(manifest: impl AsRef<Path>) -> Result<LabeledDataset> {
    FeatureStore::open(manifest)?.load_all()
}

/// Writes `dataset` under `dir` as `manifest.json` plus `class_<id>.f32`
/// payloads and returns the manifest path. Values are stored as `f32`.
pub fn write_feature_store(dir: impl AsRef<Path>, dataset: &LabeledDataset) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| StoreError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut classes = Vec::with_capacity(dataset.classes.len());
    for c in &dataset.classes {
        if c.features.cols() != dataset.dimension {
            return Err(StoreError::DimensionMismatch {
                id: c.id,
                file: dir.to_path_buf(),
                expected: dataset.dimension,
                found: c.features.cols(),
            });
        }
        let name = PathBuf::from(format!("class_{}.f32", c.id));
        let path = dir.join(&name);
        let file = fs::File::create(&path).map_err(io(&path))?;
        let mut out = BufWriter::new(file);
        for v in c.features.as_slice() {
            out.write_all(&(*v as f32).to_le_bytes()).map_err(io(&path))?;
        }
        out.flush().map_err(io(&path))?;
        classes.push(ManifestClass {
            id: c.id,
            name: c.name.clone(),
            rows: c.features.rows(),
            file: name,
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dimension: dataset.dimension,
        classes,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(path)
}

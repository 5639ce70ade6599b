//! On-disk catalog store.
//!
//! ```text
//! <root>/<catalog>/catalog.dtd
//! <root>/<catalog>/meta.json
//! <root>/<catalog>/docs/<name>.xml
//! <root>/<catalog>/runs/<run-id>/{run.json, result.dtd}
//! ```
//!
//! Catalogs are written to a scratch directory and renamed into place, so
//! readers never observe a half-written catalog.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use equix_core::dtd::{parse_dtd_with_root, serialize_dtd, Dtd};
use equix_core::xml::{parse_document_typed, Document};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Origin {
    Ingested,
    Derived { source: String, run: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    root: String,
    origin: Origin,
    documents: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct StoredDocument {
    pub name: String,
    /// Bytes exactly as stored.
    pub text: String,
    pub document: Document,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub id: String,
    pub dtd: Dtd,
    pub dtd_text: String,
    pub origin: Origin,
    pub documents: Vec<StoredDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatalogSummary {
    pub id: String,
    pub root: String,
    pub origin: Origin,
    pub documents: usize,
}

pub struct Store {
    root: PathBuf,
    writer: Mutex<()>,
}

/// Catalog, document and run names: ASCII letters, digits, `-`, `_` and
/// inner dots.
pub fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 128
        && !name.starts_with('.')
        && !name.contains("..")
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Store {
            root,
            writer: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Serializes writers; readers never take it.
    pub fn write_lock(&self) -> MutexGuard<'_, ()> {
        self.writer.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn exists(&self, id: &str) -> bool {
        valid_name(id) && self.dir(id).join("meta.json").is_file()
    }

    fn catalog_ids(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if valid_name(&name) && entry.path().join("meta.json").is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn meta(&self, id: &str) -> Result<Meta> {
        if !self.exists(id) {
            return Err(ServiceError::NotFound {
                kind: "catalog",
                id: id.to_owned(),
            });
        }
        let text = fs::read_to_string(self.dir(id).join("meta.json"))?;
        serde_json::from_str(&text).map_err(|e| ServiceError::Internal(format!("{id}/meta.json: {e}")))
    }

    pub fn list(&self) -> Result<Vec<CatalogSummary>> {
        self.catalog_ids()?
            .into_iter()
            .map(|id| {
                let meta = self.meta(&id)?;
                Ok(CatalogSummary {
                    id,
                    root: meta.root,
                    origin: meta.origin,
                    documents: meta.documents.len(),
                })
            })
            .collect()
    }

    pub fn load(&self, id: &str) -> Result<Catalog> {
        let meta = self.meta(id)?;
        let dir = self.dir(id);
        let dtd_text = fs::read_to_string(dir.join("catalog.dtd"))?;
        let dtd = parse_dtd_with_root(&dtd_text, Some(&meta.root))
            .map_err(|e| ServiceError::Internal(format!("{id}/catalog.dtd: {e}")))?;
        let mut documents = Vec::with_capacity(meta.documents.len());
        for name in meta.documents {
            let text = fs::read_to_string(dir.join("docs").join(&name))?;
            let document = parse_document_typed(&text, &dtd)
                .map_err(|e| ServiceError::Internal(format!("{id}/docs/{name}: {e}")))?;
            documents.push(StoredDocument { name, text, document });
        }
        Ok(Catalog {
            id: id.to_owned(),
            dtd,
            dtd_text,
            origin: meta.origin,
            documents,
        })
    }

    pub fn load_all(&self) -> Result<Vec<Catalog>> {
        self.catalog_ids()?.iter().map(|id| self.load(id)).collect()
    }

    /// Persists a new catalog. The caller holds the write lock.
    pub fn create(&self, id: &str, dtd: &Dtd, documents: &[(String, String)], origin: Origin) -> Result<()> {
        if !valid_name(id) {
            return Err(ServiceError::validation("catalog", format!("invalid catalog name {id:?}")));
        }
        if self.dir(id).exists() {
            return Err(ServiceError::Duplicate(id.to_owned()));
        }
        let dtd_text = serialize_dtd(dtd).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let scratch = self.root.join(format!(".tmp-{id}"));
        if scratch.exists() {
            fs::remove_dir_all(&scratch)?;
        }
        fs::create_dir_all(scratch.join("docs"))?;
        fs::write(scratch.join("catalog.dtd"), dtd_text)?;
        for (name, text) in documents {
            fs::write(scratch.join("docs").join(name), text)?;
        }
        let meta = Meta {
            root: dtd.root().to_owned(),
            origin,
            documents: documents.iter().map(|(n, _)| n.clone()).collect(),
        };
        let meta = serde_json::to_string_pretty(&meta).map_err(|e| ServiceError::Internal(e.to_string()))?;
        fs::write(scratch.join("meta.json"), meta)?;
        fs::rename(&scratch, self.dir(id))?;
        Ok(())
    }

    fn run_dirs(&self) -> Result<Vec<(String, PathBuf)>> {
        let mut out = Vec::new();
        for id in self.catalog_ids()? {
            let runs = self.dir(&id).join("runs");
            if !runs.is_dir() {
                continue;
            }
            for entry in fs::read_dir(runs)? {
                let entry = entry?;
                out.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
            }
        }
        Ok(out)
    }

    /// Next free run id, unique across the store. The caller holds the
    /// write lock.
    pub fn next_run_id(&self) -> Result<String> {
        let last = self
            .run_dirs()?
            .iter()
            .filter_map(|(name, _)| name.strip_prefix("run-")?.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        Ok(format!("run-{:04}", last + 1))
    }

    /// Writes a run record below its catalog. The caller holds the write lock.
    pub fn save_run<T: Serialize>(&self, catalog: &str, run_id: &str, record: &T, result_dtd: &str) -> Result<()> {
        let dir = self.dir(catalog).join("runs").join(run_id);
        fs::create_dir_all(&dir)?;
        let json = serde_json::to_string_pretty(record).map_err(|e| ServiceError::Internal(e.to_string()))?;
        fs::write(dir.join("result.dtd"), result_dtd)?;
        fs::write(dir.join("run.json"), json)?;
        Ok(())
    }

    pub fn load_run<T: for<'de> Deserialize<'de>>(&self, run_id: &str) -> Result<T> {
        let not_found = || ServiceError::NotFound {
            kind: "run",
            id: run_id.to_owned(),
        };
        if !valid_name(run_id) {
            return Err(not_found());
        }
        let (_, dir) = self
            .run_dirs()?
            .into_iter()
            .find(|(name, _)| name == run_id)
            .ok_or_else(not_found)?;
        let text = fs::read_to_string(dir.join("run.json")).map_err(|_| not_found())?;
        serde_json::from_str(&text).map_err(|e| ServiceError::Internal(format!("{run_id}/run.json: {e}")))
    }
}

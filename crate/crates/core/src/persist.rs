//! Project documents on disk: canonical JSON and atomic saves.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::id::ObjectId;
use crate::model::Project;

pub const SCHEMA_VERSION: &str = "tae-1";
pub const EXTENSION: &str = ".tae.json";

/// Canonical document: sorted keys, so equal projects serialize identically.
pub fn to_document(p: &Project) -> Value {
    let project = serde_json::to_value(p).expect("projects serialize");
    json!({ "schema_version": SCHEMA_VERSION, "project": project })
}

pub fn serialize_project(p: &Project) -> Result<String> {
    p.validate()?;
    Ok(serde_json::to_string_pretty(&to_document(p)).expect("values serialize"))
}

pub fn from_document(doc: &Value) -> Result<Project> {
    let version = doc
        .get("schema_version")
        .ok_or_else(|| Error::CorruptDocument("missing schema_version".into()))?
        .as_str()
        .ok_or_else(|| Error::CorruptDocument("schema_version must be a string".into()))?;
    if version != SCHEMA_VERSION {
        return Err(Error::UnsupportedSchemaVersion(version.to_string()));
    }
    let body = doc.get("project").ok_or_else(|| Error::CorruptDocument("missing project".into()))?;
    let p: Project = serde_json::from_value(body.clone()).map_err(|e| Error::CorruptDocument(e.to_string()))?;
    p.validate()?;
    Ok(p)
}

pub fn deserialize_project(text: &str) -> Result<Project> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::CorruptDocument(e.to_string()))?;
    from_document(&doc)
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Replace `path` with `bytes` so that readers see either the old or the new
/// contents, never a mix: write a sibling temp file, sync it, rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(".{name}.{}.{n}.tmp", std::process::id()));
    let written = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = written {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    #[cfg(unix)]
    if let Ok(d) = fs::File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

pub fn save_to(p: &Project, path: &Path) -> Result<()> {
    write_atomic(path, serialize_project(p)?.as_bytes())
}

pub fn load_from(path: &Path) -> Result<Project> {
    deserialize_project(&fs::read_to_string(path)?)
}

/// A directory of `<project_id>.tae.json` files plus uploaded asset bytes
/// under `assets/`.
#[derive(Debug, Clone)]
pub struct ProjectStore {
    root: PathBuf,
}

impl ProjectStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("assets"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, id: &ObjectId) -> PathBuf {
        self.root.join(format!("{id}{EXTENSION}"))
    }

    pub fn asset_path(&self, id: &ObjectId) -> PathBuf {
        self.root.join("assets").join(id.as_str())
    }

    pub fn save(&self, p: &Project) -> Result<()> {
        save_to(p, &self.path(&p.id))
    }

    pub fn load(&self, id: &ObjectId) -> Result<Project> {
        let path = self.path(id);
        if !path.exists() {
            return Err(Error::UnknownProject(id.to_string()));
        }
        load_from(&path)
    }

    pub fn delete(&self, id: &ObjectId) -> Result<()> {
        fs::remove_file(self.path(id)).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::UnknownProject(id.to_string()),
            _ => e.into(),
        })
    }

    /// Ids of stored projects, sorted.
    pub fn list(&self) -> Result<Vec<ObjectId>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let name = entry?.file_name();
            let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(EXTENSION)) else { continue };
            if let Ok(id) = stem.parse() {
                out.push(id);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn write_asset(&self, id: &ObjectId, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.asset_path(id);
        write_atomic(&path, bytes)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClipPayload, TrackKind};
    use crate::time::Time;
    use crate::timeline;

    #[test]
    fn empty_project_round_trips() {
        let p = Project::new("e", 3);
        let text = serialize_project(&p).unwrap();
        assert_eq!(deserialize_project(&text).unwrap(), p);
        assert_eq!(serialize_project(&p).unwrap(), text);
    }

    #[test]
    fn rejects_versions_and_garbage() {
        let p = Project::new("e", 3);
        let mut doc = to_document(&p);
        doc["schema_version"] = json!("tae-0");
        assert_eq!(from_document(&doc).unwrap_err(), Error::UnsupportedSchemaVersion("tae-0".into()));
        assert_eq!(deserialize_project("{").unwrap_err().code(), "corrupt_document");
        assert_eq!(deserialize_project("{\"project\": {}}").unwrap_err().code(), "corrupt_document");
    }

    #[test]
    fn dangling_track_is_reported() {
        let mut p = Project::new("d", 3);
        let t = p.add_track(TrackKind::Text, "T").id;
        timeline::add_clip(&mut p, &t, Time::ZERO, Time::from_secs(1.0), ClipPayload::text("x")).unwrap();
        let mut doc = to_document(&p);
        doc["project"]["tracks"] = json!({});
        assert_eq!(from_document(&doc).unwrap_err().code(), "dangling_reference");
    }

    #[test]
    fn store_save_load_list_delete() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProjectStore::open(dir.path()).unwrap();
        let p = Project::new("s", 4);
        store.save(&p).unwrap();
        assert_eq!(store.list().unwrap(), vec![p.id.clone()]);
        assert_eq!(store.load(&p.id).unwrap(), p);
        store.delete(&p.id).unwrap();
        assert_eq!(store.load(&p.id).unwrap_err().code(), "unknown_project");
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().ends_with(".tmp")).collect();
        assert!(leftovers.is_empty());
    }
}

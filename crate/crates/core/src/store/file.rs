//! Directory layout:
//!
//! ```text
//! <root>/store.json              {"format_version": 1}
//! <root>/profiles/<id>.json      canonical JSON, one document per profile
//! <root>/events/<id>.jsonl       one StoreEvent per line, append-only
//! ```

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use super::{
    canonical_json, CandidateProfile, DocumentStore, StoreError, StoreEvent, STORE_FORMAT_VERSION,
};

pub struct FileStore {
    root: PathBuf,
}

impl FileStore {
    /// Opens `root`, initialising the layout when the directory is new or empty.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("profiles"))?;
        fs::create_dir_all(root.join("events"))?;
        let marker = root.join("store.json");
        if marker.exists() {
            let text = fs::read_to_string(&marker)?;
            let version = serde_json::from_str::<serde_json::Value>(&text)
                .ok()
                .and_then(|v| v["format_version"].as_u64());
            if version != Some(u64::from(STORE_FORMAT_VERSION)) {
                return Err(StoreError::StorageUnavailable(format!(
                    "{} has unsupported format version {version:?}",
                    marker.display()
                )));
            }
        } else {
            fs::write(
                &marker,
                canonical_json(&json!({ "format_version": STORE_FORMAT_VERSION })).unwrap(),
            )?;
        }
        Ok(FileStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn profile_path(&self, profile_id: &str) -> PathBuf {
        self.root
            .join("profiles")
            .join(format!("{profile_id}.json"))
    }

    fn events_path(&self, profile_id: &str) -> PathBuf {
        self.root.join("events").join(format!("{profile_id}.jsonl"))
    }
}

impl DocumentStore for FileStore {
    fn load(&self, profile_id: &str) -> Result<Option<CandidateProfile>, StoreError> {
        let text = match fs::read_to_string(self.profile_path(profile_id)) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| StoreError::Corrupt {
                profile_id: profile_id.to_string(),
                message: e.to_string(),
            })
    }

    fn save(&self, profile: &CandidateProfile) -> Result<(), StoreError> {
        let text =
            canonical_json(profile).map_err(|e| StoreError::StorageUnavailable(e.to_string()))?;
        let path = self.profile_path(&profile.profile_id);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    fn append_event(&self, event: &StoreEvent) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(event)
            .map_err(|e| StoreError::StorageUnavailable(e.to_string()))?;
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.events_path(&event.profile_id))?;
        file.write_all(line.as_bytes())?;
        Ok(())
    }

    fn events(&self, profile_id: &str) -> Result<Vec<StoreEvent>, StoreError> {
        let file = match fs::File::open(self.events_path(profile_id)) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        BufReader::new(file)
            .lines()
            .filter(|l| !matches!(l, Ok(l) if l.trim().is_empty()))
            .map(|line| {
                serde_json::from_str(&line?).map_err(|e| StoreError::Corrupt {
                    profile_id: profile_id.to_string(),
                    message: format!("event log: {e}"),
                })
            })
            .collect()
    }

    fn profile_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("profiles"))? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".json")) {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }
}

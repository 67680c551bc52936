use std::collections::BTreeMap;

use parking_lot::RwLock;

use super::{canonical_json, CandidateProfile, DocumentStore, StoreError, StoreEvent};

/// Keeps canonical JSON in memory, so it exercises the same serialization
/// path as the file backend.
#[derive(Default)]
pub struct MemoryStore {
    profiles: RwLock<BTreeMap<String, String>>,
    events: RwLock<BTreeMap<String, Vec<StoreEvent>>>,
}

impl DocumentStore for MemoryStore {
    fn load(&self, profile_id: &str) -> Result<Option<CandidateProfile>, StoreError> {
        self.profiles
            .read()
            .get(profile_id)
            .map(|text| {
                serde_json::from_str(text).map_err(|e| StoreError::Corrupt {
                    profile_id: profile_id.to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    fn save(&self, profile: &CandidateProfile) -> Result<(), StoreError> {
        let text =
            canonical_json(profile).map_err(|e| StoreError::StorageUnavailable(e.to_string()))?;
        self.profiles
            .write()
            .insert(profile.profile_id.clone(), text);
        Ok(())
    }

    fn append_event(&self, event: &StoreEvent) -> Result<(), StoreError> {
        self.events
            .write()
            .entry(event.profile_id.clone())
            .or_default()
            .push(event.clone());
        Ok(())
    }

    fn events(&self, profile_id: &str) -> Result<Vec<StoreEvent>, StoreError> {
        Ok(self
            .events
            .read()
            .get(profile_id)
            .cloned()
            .unwrap_or_default())
    }

    fn profile_ids(&self) -> Result<Vec<String>, StoreError> {
        Ok(self.profiles.read().keys().cloned().collect())
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DaemonError;
use crate::engine::{CommandBinding, TaskName, Threshold};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileRecord {
    pub name: String,
    pub task_name: TaskName,
    pub binding: CommandBinding,
    pub default_threshold: Threshold,
    #[serde(default)]
    pub trained: bool,
}

/// Profiles persisted as one JSON array, replaced atomically on each write.
#[derive(Debug)]
pub struct ProfileStore {
    path: Option<PathBuf>,
    records: BTreeMap<String, ProfileRecord>,
}

impl ProfileStore {
    /// Opens the store at `path`; a missing file is an empty store.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, DaemonError> {
        let path = path.into();
        let records = match fs::read_to_string(&path) {
            Ok(text) => {
                let list: Vec<ProfileRecord> = serde_json::from_str(&text)
                    .map_err(|e| DaemonError::StoreIo(format!("{}: {e}", path.display())))?;
                list.into_iter().map(|r| (r.name.clone(), r)).collect()
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(DaemonError::StoreIo(format!("{}: {e}", path.display()))),
        };
        Ok(Self { path: Some(path), records })
    }

    /// A store that is never written to disk.
    pub fn in_memory() -> Self {
        Self { path: None, records: BTreeMap::new() }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, name: &str) -> Option<&ProfileRecord> {
        self.records.get(name)
    }

    /// All records sorted by name.
    pub fn list(&self) -> Vec<ProfileRecord> {
        self.records.values().cloned().collect()
    }

    pub fn put(&mut self, record: ProfileRecord, overwrite: bool) -> Result<(), DaemonError> {
        if record.name.is_empty() {
            return Err(DaemonError::InvalidProfile("profile name must not be empty".into()));
        }
        if !overwrite && self.records.contains_key(&record.name) {
            return Err(DaemonError::DuplicateName(record.name));
        }
        let previous = self.records.insert(record.name.clone(), record.clone());
        if let Err(e) = self.save() {
            match previous {
                Some(p) => self.records.insert(p.name.clone(), p),
                None => self.records.remove(&record.name),
            };
            return Err(e);
        }
        Ok(())
    }

    pub fn set_trained(&mut self, name: &str, trained: bool) -> Result<ProfileRecord, DaemonError> {
        let mut record = self
            .get(name)
            .cloned()
            .ok_or_else(|| DaemonError::ProfileNotFound(name.to_string()))?;
        record.trained = trained;
        self.put(record.clone(), true)?;
        Ok(record)
    }

    fn save(&self) -> Result<(), DaemonError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let io = |e: std::io::Error| DaemonError::StoreIo(format!("{}: {e}", path.display()));
        let text = serde_json::to_string_pretty(&self.list()).expect("profiles serialize");
        let mut tmp = path.clone().into_os_string();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, text).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }
}

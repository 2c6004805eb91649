//! Store location, snapshot cache and per-project writer locks.
//!
//! Readers get an `Arc` of the last committed snapshot. Writers hold the
//! project's async mutex, mutate a clone, save it atomically and then swap the
//! `Arc`, so a write never blocks readers beyond the swap itself.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::SystemTime;

use community_pulse_core::model::{BotPolicy, RepoRef};
use community_pulse_core::store::{save_snapshot, Store, StoreSnapshot};

use crate::error::{ApiError, ErrorCode};

/// Where store files live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreLocation {
    /// One `owner__name.ndjson` file per project.
    Dir(PathBuf),
    /// A single store file serving one project.
    File(PathBuf),
}

impl StoreLocation {
    /// Existing directories and paths without an extension are directories.
    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        if path.is_dir() || (!path.exists() && path.extension().is_none()) {
            Self::Dir(path)
        } else {
            Self::File(path)
        }
    }

    pub fn path_for(&self, repo: &RepoRef) -> PathBuf {
        match self {
            Self::Dir(dir) => dir.join(format!("{}.ndjson", repo.file_stem())),
            Self::File(file) => file.clone(),
        }
    }

    /// Every store file currently present.
    pub fn existing_files(&self) -> Vec<PathBuf> {
        match self {
            Self::File(file) => file.is_file().then(|| file.clone()).into_iter().collect(),
            Self::Dir(dir) => {
                let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
                    .into_iter()
                    .flatten()
                    .flatten()
                    .map(|entry| entry.path())
                    .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "ndjson"))
                    .collect();
                files.sort();
                files
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Stamp {
    modified: Option<SystemTime>,
    len: u64,
}

fn stamp(path: &Path) -> Option<Stamp> {
    let meta = std::fs::metadata(path).ok()?;
    Some(Stamp {
        modified: meta.modified().ok(),
        len: meta.len(),
    })
}

#[derive(Debug, Default)]
struct Slot {
    cached: RwLock<Option<(Stamp, Arc<StoreSnapshot>)>>,
    writer: tokio::sync::Mutex<()>,
}

/// Shared access to store files.
#[derive(Debug)]
pub struct Snapshots {
    location: StoreLocation,
    bots: BotPolicy,
    slots: Mutex<HashMap<PathBuf, Arc<Slot>>>,
}

impl Snapshots {
    pub fn new(location: StoreLocation, bots: BotPolicy) -> Self {
        Self {
            location,
            bots,
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn location(&self) -> &StoreLocation {
        &self.location
    }

    fn slot(&self, path: &Path) -> Arc<Slot> {
        let mut slots = self.slots.lock().expect("slot map poisoned");
        slots.entry(path.to_path_buf()).or_default().clone()
    }

    /// Last committed snapshot of the file at `path`, `None` if it does not exist.
    /// The file is re-read when it changed on disk, e.g. after a CLI ingest.
    pub fn read_path(&self, path: &Path) -> Result<Option<Arc<StoreSnapshot>>, ApiError> {
        let Some(current) = stamp(path) else {
            return Ok(None);
        };
        let slot = self.slot(path);
        if let Some((seen, snapshot)) = slot.cached.read().expect("cache poisoned").as_ref() {
            if *seen == current {
                return Ok(Some(snapshot.clone()));
            }
        }
        let snapshot = Arc::new(Store::load(path, &self.bots)?.snapshot);
        *slot.cached.write().expect("cache poisoned") = Some((current, snapshot.clone()));
        Ok(Some(snapshot))
    }

    /// Snapshot of an ingested project, or 404 `not_ingested`.
    pub fn read(&self, repo: &RepoRef) -> Result<Arc<StoreSnapshot>, ApiError> {
        let not_ingested = || ApiError::new(ErrorCode::NotIngested, format!("{repo} has not been ingested"));
        let snapshot = self.read_path(&self.location.path_for(repo))?.ok_or_else(not_ingested)?;
        if &snapshot.repo != repo {
            return Err(not_ingested());
        }
        Ok(snapshot)
    }

    /// All readable project snapshots.
    pub fn all(&self) -> Vec<Arc<StoreSnapshot>> {
        self.location
            .existing_files()
            .iter()
            .filter_map(|path| match self.read_path(path) {
                Ok(snapshot) => snapshot,
                Err(e) => {
                    tracing::warn!(path = %path.display(), message = %e.message, "skipping unreadable store");
                    None
                }
            })
            .collect()
    }

    /// Runs `f` on a private copy of the project's snapshot while holding its
    /// writer lock, then persists and publishes the result. A missing file
    /// starts from an empty snapshot. Nothing is written when `f` fails.
    pub async fn write<T, F>(&self, repo: &RepoRef, f: F) -> Result<T, ApiError>
    where
        F: FnOnce(&mut StoreSnapshot) -> Result<T, ApiError>,
    {
        let path = self.location.path_for(repo);
        let slot = self.slot(&path);
        let _guard = slot.writer.lock().await;
        let mut draft = match self.read_path(&path)? {
            Some(current) if &current.repo != repo => {
                return Err(ApiError::new(
                    ErrorCode::RepoMismatch,
                    format!("store {} belongs to {}", path.display(), current.repo),
                ))
            }
            Some(current) => StoreSnapshot::clone(&current),
            None => StoreSnapshot::new(repo.clone()),
        };
        let out = f(&mut draft)?;
        save_snapshot(&path, &draft)?;
        if let Some(saved) = stamp(&path) {
            *slot.cached.write().expect("cache poisoned") = Some((saved, Arc::new(draft)));
        }
        Ok(out)
    }
}

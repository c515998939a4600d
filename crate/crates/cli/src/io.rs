use std::fs;
use std::path::{Path, PathBuf};

use pushfit::trialdata::{load_trial, Trial};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A per-trial error recorded in a report; the batch carries on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    /// Trial id, or the file name when the file did not load.
    pub source: String,
    pub error: String,
}

impl Failure {
    pub fn new(source: impl Into<String>, error: impl ToString) -> Self {
        Self {
            source: source.into(),
            error: error.to_string(),
        }
    }
}

/// Trial CSV files of `dir`, sorted by name.
pub fn list_trials(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(CliError::io(dir))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(CliError::io(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Sidecar metadata lives next to the CSV as `<stem>.meta.json`.
fn sidecar(path: &Path) -> Option<PathBuf> {
    let stem = path.file_stem()?.to_string_lossy().into_owned();
    let side = path.with_file_name(format!("{stem}.meta.json"));
    side.is_file().then_some(side)
}

pub fn load(path: &Path) -> Result<Trial, Failure> {
    load_trial(path, sidecar(path).as_deref()).map_err(|e| Failure::new(file_name(path), e))
}

/// Loads every trial of `dir`, sorted by id. Unreadable files become
/// failures.
pub fn load_dir(dir: &Path, workers: usize) -> Result<(Vec<Trial>, Vec<Failure>), CliError> {
    let files = list_trials(dir)?;
    let loaded = parallel(workers, &files, |p| load(p));
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for item in loaded {
        match item {
            Ok(t) => trials.push(t),
            Err(f) => failures.push(f),
        }
    }
    trials.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((trials, failures))
}

/// Maps `f` over `items` on a pool of `workers` threads, keeping input order.
pub fn parallel<T, R, F>(workers: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(CliError::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::BadArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    if !path.is_file() {
        return Err(CliError::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::BadArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

//! Event-sourced persistence: an append-only command log in the data
//! directory, replayed on open. The audit ledger inside the rebuilt plane is
//! byte-identical to the one that was running before the restart.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use agentgov_core::config::PlaneConfig;
use agentgov_core::plane::{ControlPlane, PlaneError};
use chrono::{DateTime, Utc};
use rand::Rng;
use serde_json::Value;
use thiserror::Error;

use crate::command::{Command, LoggedCommand};

pub const LOG_FILE: &str = "commands.jsonl";
pub const SEED_FILE: &str = "authority.seed";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {reason}")]
    Seed { path: PathBuf, reason: String },
    #[error("command log line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("command log line {line} no longer applies: {source}")]
    Replay { line: usize, source: PlaneError },
    #[error(transparent)]
    Plane(#[from] PlaneError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub struct Store {
    plane: ControlPlane,
    log: Option<(PathBuf, File)>,
    applied: usize,
}

impl Store {
    /// A store with no backing files.
    pub fn in_memory(config: PlaneConfig, seed: [u8; 32]) -> Result<Self, StoreError> {
        Ok(Self {
            plane: ControlPlane::new(config, seed)?,
            log: None,
            applied: 0,
        })
    }

    /// Opens (or initialises) the data directory and replays its log.
    pub fn open(data_dir: &Path, config: PlaneConfig) -> Result<Self, StoreError> {
        fs::create_dir_all(data_dir).map_err(io_err(data_dir))?;
        let seed = load_or_create_seed(&data_dir.join(SEED_FILE))?;
        let mut store = Self::in_memory(config, seed)?;
        let path = data_dir.join(LOG_FILE);
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io_err(&path))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err(&path))?;
                if line.trim().is_empty() {
                    continue;
                }
                let logged: LoggedCommand = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
                logged
                    .command
                    .apply(&mut store.plane, logged.at)
                    .map_err(|source| StoreError::Replay { line: i + 1, source })?;
                store.applied += 1;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        store.log = Some((path, file));
        Ok(store)
    }

    pub fn plane(&self) -> &ControlPlane {
        &self.plane
    }

    /// Commands applied since the store was created, replayed ones included.
    pub fn applied(&self) -> usize {
        self.applied
    }

    /// Applies a command; on success appends it to the log.
    pub fn execute(&mut self, command: Command, at: DateTime<Utc>) -> Result<Value, StoreError> {
        let out = command.apply(&mut self.plane, at)?;
        self.applied += 1;
        if let Some((path, file)) = &mut self.log {
            let mut line = serde_json::to_string(&LoggedCommand { at, command }).expect("commands serialize");
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(io_err(path))?;
            file.flush().map_err(io_err(path))?;
        }
        Ok(out)
    }
}

fn load_or_create_seed(path: &Path) -> Result<[u8; 32], StoreError> {
    if path.exists() {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let bytes = hex::decode(text.trim()).map_err(|e| StoreError::Seed {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        return bytes.try_into().map_err(|_| StoreError::Seed {
            path: path.to_path_buf(),
            reason: "expected 32 bytes".into(),
        });
    }
    let seed: [u8; 32] = rand::rng().random();
    fs::write(path, hex::encode(seed)).map_err(io_err(path))?;
    Ok(seed)
}

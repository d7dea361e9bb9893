//! Versioned JSON container for trained parameters and optimizer state.

use super::policy::GaussianPolicy;
use super::sac::SacAgent;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

pub const FORMAT: &str = "dextron-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: malformed checkpoint: {msg}")]
    Format { path: String, msg: String },
    #[error("{path}: expected a {expected} checkpoint, found {found}")]
    Kind { path: String, expected: String, found: String },
    #[error("{path}: unsupported checkpoint version {found}")]
    Version { path: String, found: u32 },
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    payload: T,
}

/// Trained policy from either learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum PolicyCheckpoint {
    Sac { agent: Box<SacAgent> },
    Bc { policy: GaussianPolicy },
}

impl PolicyCheckpoint {
    pub fn policy(&self) -> &GaussianPolicy {
        match self {
            PolicyCheckpoint::Sac { agent } => &agent.nets.policy,
            PolicyCheckpoint::Bc { policy } => policy,
        }
    }
}

pub fn save<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io { path: path.display().to_string(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let env = Envelope { format: FORMAT.to_string(), version: VERSION, kind: kind.to_string(), payload };
    serde_json::to_writer(&mut w, &env).map_err(|e| io(std::io::Error::other(e)))?;
    w.flush().map_err(io)
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T, CheckpointError> {
    let p = path.display().to_string();
    let file = File::open(path).map_err(|source| CheckpointError::Io { path: p.clone(), source })?;
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CheckpointError::Format { path: p.clone(), msg: e.to_string() })?;
    let header: Envelope<serde::de::IgnoredAny> = serde_json::from_value(value.clone())
        .map_err(|e| CheckpointError::Format { path: p.clone(), msg: e.to_string() })?;
    if header.format != FORMAT {
        return Err(CheckpointError::Format { path: p, msg: format!("unknown format {:?}", header.format) });
    }
    if header.version != VERSION {
        return Err(CheckpointError::Version { path: p, found: header.version });
    }
    if header.kind != kind {
        return Err(CheckpointError::Kind { path: p, expected: kind.to_string(), found: header.kind });
    }
    let env: Envelope<T> =
        serde_json::from_value(value).map_err(|e| CheckpointError::Format { path: p, msg: e.to_string() })?;
    Ok(env.payload)
}

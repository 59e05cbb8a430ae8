//! Versioned, checksummed checkpoint files.
//!
//! A checkpoint is two lines of JSON: a header naming the schema, version and
//! the sha256 of the payload, then the payload itself (a [`RunState`]). Files
//! are written to a temporary sibling and renamed into place, so a crash never
//! leaves a half-written checkpoint behind.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::search::{RunState, Search};

pub const CHECKPOINT_SCHEMA: &str = "agent-search/checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    sha256: String,
}

/// Serializes a run state into checkpoint bytes.
pub fn encode(state: &RunState) -> Result<Vec<u8>> {
    let payload = serde_json::to_vec(state)?;
    let header = Header {
        schema: CHECKPOINT_SCHEMA.to_string(),
        version: CHECKPOINT_VERSION,
        sha256: hex::encode(Sha256::digest(&payload)),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.extend_from_slice(&payload);
    out.push(b'\n');
    Ok(out)
}

/// Parses and verifies checkpoint bytes.
pub fn decode(bytes: &[u8]) -> Result<RunState> {
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..split])
        .map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
    if header.schema != CHECKPOINT_SCHEMA {
        return Err(Error::Checkpoint(format!(
            "unexpected schema `{}`",
            header.schema
        )));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            what: "checkpoint",
            found: header.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let payload = bytes[split + 1..]
        .strip_suffix(b"\n")
        .unwrap_or(&bytes[split + 1..]);
    let actual = hex::encode(Sha256::digest(payload));
    if actual != header.sha256 {
        return Err(Error::Checkpoint("payload checksum mismatch".into()));
    }
    serde_json::from_slice(payload)
        .map_err(|e| Error::Checkpoint(format!("unreadable payload: {e}")))
}

/// Writes `state` to `path` atomically.
pub fn save(state: &RunState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(state)?;
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<RunState> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

impl<E: Environment> Search<E> {
    /// Saves the current run state to `path`.
    pub fn checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        save(&self.state(), path)
    }

    /// Loads a checkpoint and continues it with `env`.
    pub fn resume_from(path: impl AsRef<Path>, env: E) -> Result<Self> {
        Search::resume(load(path)?, env)
    }
}

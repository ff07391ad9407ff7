//! Versioned checkpoint blobs with an embedded config hash.
//!
//! Layout: magic "PSCK", format version u32 LE, 32-byte SHA-256 of the
//! run's config document, payload length u64 LE, JSON payload (network +
//! optimizer state).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::TrainerError;
use crate::net::{Adam, PolicyNet};

const MAGIC: &[u8; 4] = b"PSCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointPayload {
    pub net: PolicyNet,
    pub optimizer: Adam,
    pub iteration: usize,
    pub stage: usize,
}

pub fn config_hash(config_json: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(config_json.as_bytes());
    h.finalize().into()
}

pub fn save(
    path: &Path,
    payload: &CheckpointPayload,
    config_json: &str,
) -> Result<(), TrainerError> {
    let json = serde_json::to_vec(payload).map_err(|e| TrainerError::Serialize(e.to_string()))?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    f.write_all(&config_hash(config_json))?;
    f.write_all(&(json.len() as u64).to_le_bytes())?;
    f.write_all(&json)?;
    Ok(())
}

/// Load a checkpoint, verifying the embedded config hash against the
/// provided config document.
pub fn load(path: &Path, config_json: &str) -> Result<CheckpointPayload, TrainerError> {
    let mut f = std::fs::File::open(path)?;
    let mut head = [0u8; 4 + 4 + 32 + 8];
    f.read_exact(&mut head)?;
    if &head[0..4] != MAGIC {
        return Err(TrainerError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(TrainerError::Checkpoint(format!("unknown version {version}")));
    }
    let hash: [u8; 32] = head[8..40].try_into().unwrap();
    if hash != config_hash(config_json) {
        return Err(TrainerError::Checkpoint("config hash mismatch".into()));
    }
    let len = u64::from_le_bytes(head[40..48].try_into().unwrap()) as usize;
    let mut json = vec![0u8; len];
    f.read_exact(&mut json)?;
    serde_json::from_slice(&json).map_err(|e| TrainerError::Checkpoint(e.to_string()))
}

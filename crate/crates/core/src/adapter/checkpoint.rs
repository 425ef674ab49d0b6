//! Checkpoint directory layout: `manifest.json` lists every slot with its
//! shape and byte offset into `weights.ibmat`, which is the concatenation of
//! one IBMAT block per slot.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{io, ParamCollection};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.ibmat";
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub weights: String,
    pub slots: Vec<SlotEntry>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

pub fn save_checkpoint<P: ParamCollection + ?Sized>(
    dir: &Path,
    params: &P,
    meta: serde_json::Value,
) -> Result<Manifest> {
    params.check_unique_names()?;
    fs::create_dir_all(dir)?;
    let mut blob = Vec::new();
    let mut slots = Vec::new();
    for slot in params.slots() {
        let bytes = io::to_bytes(slot.value());
        slots.push(SlotEntry {
            name: slot.name().to_string(),
            rows: slot.value().rows(),
            cols: slot.value().cols(),
            offset: blob.len(),
            length: bytes.len(),
        });
        blob.extend_from_slice(&bytes);
    }
    let manifest = Manifest {
        schema_version: CHECKPOINT_SCHEMA_VERSION,
        weights: WEIGHTS_FILE.to_string(),
        slots,
        meta,
    };
    fs::write(dir.join(WEIGHTS_FILE), blob)?;
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint schema version {}",
            manifest.schema_version
        )));
    }
    Ok(manifest)
}

/// Overwrites every slot of `params` from the checkpoint. Slot names and
/// shapes must match exactly.
pub fn load_checkpoint_into<P: ParamCollection + ?Sized>(dir: &Path, params: &mut P) -> Result<Manifest> {
    let manifest = read_manifest(dir)?;
    let blob = fs::read(dir.join(&manifest.weights))?;
    let mut slots = params.slots_mut();
    if slots.len() != manifest.slots.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} slots, model expects {}",
            manifest.slots.len(),
            slots.len()
        )));
    }
    for (slot, entry) in slots.iter_mut().zip(&manifest.slots) {
        if slot.name() != entry.name {
            return Err(Error::Format(format!(
                "slot order mismatch: checkpoint `{}`, model `{}`",
                entry.name,
                slot.name()
            )));
        }
        let end = entry
            .offset
            .checked_add(entry.length)
            .filter(|&e| e <= blob.len())
            .ok_or_else(|| Error::Format(format!("slot `{}` lies outside the weights file", entry.name)))?;
        let m = io::from_bytes(&blob[entry.offset..end])?;
        if m.shape() != (entry.rows, entry.cols) {
            return Err(Error::Format(format!("slot `{}` shape disagrees with manifest", entry.name)));
        }
        slot.set_value(m)?;
    }
    Ok(manifest)
}

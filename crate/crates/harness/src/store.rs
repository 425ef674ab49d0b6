//! Trained-model directories: the adapter checkpoint (manifest plus IBMAT
//! weights), with the training configuration in the manifest metadata and
//! the loss trace alongside as CSV.

use std::path::Path;

use ibkit_core::adapter::checkpoint::{load_checkpoint_into, read_manifest, save_checkpoint};
use ibkit_core::{Error, Result};
use serde_json::json;

use crate::model::Classifier;
use crate::report::write_trace_csv;
use crate::train::{init_model, TrainConfig, TrainOutcome};

pub const TRACE_FILE: &str = "trace.csv";

pub fn save_model(dir: &Path, outcome: &TrainOutcome) -> Result<()> {
    let meta = json!({
        "model_kind": outcome.model.kind,
        "train_config": outcome.config,
        "final_loss": outcome.trace.last().map(|p| p.loss),
    });
    save_checkpoint(dir, &outcome.model, meta)?;
    write_trace_csv(&dir.join(TRACE_FILE), &outcome.trace)
}

/// Rebuilds the classifier described by the stored configuration and loads
/// its weights.
pub fn load_model(dir: &Path) -> Result<(Classifier, TrainConfig)> {
    let manifest = read_manifest(dir)?;
    let config: TrainConfig = serde_json::from_value(
        manifest
            .meta
            .get("train_config")
            .cloned()
            .ok_or_else(|| Error::Format("checkpoint metadata has no train_config".into()))?,
    )?;
    let mut model = init_model(&config)?;
    load_checkpoint_into(dir, &mut model)?;
    Ok((model, config))
}

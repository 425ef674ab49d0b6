//! Robustness reports, their comparison, and training-trace CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ibkit_core::corruptions::{CorruptionKind, CorruptionParams};
use ibkit_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::ModelKind;
use crate::train::{TracePoint, TrainConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Largest clean-accuracy difference at which two models are compared.
pub const CLEAN_MATCH_TOLERANCE: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub params: CorruptionParams,
    pub accuracy: f64,
    /// Token-mean cosine between clean and corrupted encoder tokens.
    pub encoder_consistency: f64,
    /// Token-mean cosine between clean and corrupted adapter outputs.
    pub feature_consistency: f64,
    /// K-means (K = 2) purity of corrupted adapter outputs against the token mask.
    pub grouping_purity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub schema_version: u32,
    pub model_kind: ModelKind,
    pub train_seed: u64,
    pub eval_seed: u64,
    pub eval_scenes: usize,
    pub corruption_seed: u64,
    pub config_hash: String,
    pub clean_accuracy: f64,
    pub clean_grouping_purity: f64,
    pub cells: Vec<CellReport>,
}

impl RobustnessReport {
    pub fn cell(&self, kind: CorruptionKind, severity: u8) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.kind == kind && c.severity == severity)
    }

    /// Mean accuracy over the cells matching `kinds` and `severities`.
    pub fn mean_accuracy(&self, kinds: &[CorruptionKind], severities: &[u8]) -> Option<f64> {
        let picked: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| kinds.contains(&c.kind) && severities.contains(&c.severity))
            .map(|c| c.accuracy)
            .collect();
        (!picked.is_empty()).then(|| picked.iter().sum::<f64>() / picked.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let report: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "report schema version {} (expected {REPORT_SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }
}

/// SHA-256 of the canonical JSON form of the training configuration.
pub fn config_hash(config: &TrainConfig) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(config)?);
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellDelta {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
    pub consistency_a: f64,
    pub consistency_b: f64,
    pub purity_a: f64,
    pub purity_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub model_a: ModelKind,
    pub model_b: ModelKind,
    pub clean_a: f64,
    pub clean_b: f64,
    /// Clean accuracies within [`CLEAN_MATCH_TOLERANCE`].
    pub comparable: bool,
    pub cells: Vec<CellDelta>,
}

/// Pairs up cells present in both reports.
pub fn compare_reports(a: &RobustnessReport, b: &RobustnessReport) -> Comparison {
    let cells = a
        .cells
        .iter()
        .filter_map(|ca| {
            b.cell(ca.kind, ca.severity).map(|cb| CellDelta {
                kind: ca.kind,
                severity: ca.severity,
                accuracy_a: ca.accuracy,
                accuracy_b: cb.accuracy,
                consistency_a: ca.feature_consistency,
                consistency_b: cb.feature_consistency,
                purity_a: ca.grouping_purity,
                purity_b: cb.grouping_purity,
            })
        })
        .collect();
    Comparison {
        model_a: a.model_kind,
        model_b: b.model_kind,
        clean_a: a.clean_accuracy,
        clean_b: b.clean_accuracy,
        comparable: (a.clean_accuracy - b.clean_accuracy).abs() <= CLEAN_MATCH_TOLERANCE + 1e-12,
        cells,
    }
}

impl Comparison {
    /// Side-by-side text table; deltas are `b − a`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "clean accuracy  {}: {:.4}  {}: {:.4}  delta {:+.4}{}",
            self.model_a,
            self.clean_a,
            self.model_b,
            self.clean_b,
            self.clean_b - self.clean_a,
            if self.comparable { "" } else { "  (clean accuracies differ by more than 2 points; per-cell comparison withheld)" }
        );
        if !self.comparable {
            return out;
        }
        let _ = writeln!(
            out,
            "{:<18} {:>3} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "kind", "sev", "acc_a", "acc_b", "delta", "cons_a", "cons_b", "delta"
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:<18} {:>3} {:>8.4} {:>8.4} {:>+8.4} {:>8.4} {:>8.4} {:>+8.4}",
                c.kind.name(),
                c.severity,
                c.accuracy_a,
                c.accuracy_b,
                c.accuracy_b - c.accuracy_a,
                c.consistency_a,
                c.consistency_b,
                c.consistency_b - c.consistency_a
            );
        }
        out
    }
}

pub fn trace_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from("step,loss\n");
    for p in trace {
        let _ = writeln!(out, "{},{}", p.step, p.loss);
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &[TracePoint]) -> Result<()> {
    fs::write(path, trace_csv(trace))?;
    Ok(())
}

//! Corruption-grid evaluation of a trained classifier.

use ibkit_core::corruptions::{severity_params, CorruptionKind, CorruptionParams};
use ibkit_core::tensor::Matrix;
use ibkit_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoder::FrozenEncoder;
use crate::metrics::{feature_consistency, kmeans2_grouping};
use crate::model::{argmax, Classifier};
use crate::report::{CellReport, RobustnessReport, REPORT_SCHEMA_VERSION};
use crate::scene::{make_toy_dataset, ToyScene};
use crate::train::{corrupt_counted, TrainConfig};

pub const EVAL_DATA_SEED: u64 = 0xe7a1_5eed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub eval_seed: u64,
    pub eval_scenes: usize,
    /// Scenes (from the front of the evaluation set) used for K-means purity.
    pub grouping_scenes: usize,
    pub corruption_seed: u64,
    pub kinds: Vec<CorruptionKind>,
    pub severities: Vec<u8>,
    /// Worker threads for grid cells; 0 defers to `IBKIT_THREADS`, then to
    /// the available parallelism.
    pub threads: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            eval_seed: EVAL_DATA_SEED,
            eval_scenes: 512,
            grouping_scenes: 64,
            corruption_seed: 0,
            kinds: vec![
                CorruptionKind::GaussianNoise,
                CorruptionKind::ImpulseNoise,
                CorruptionKind::SpeckleNoise,
            ],
            severities: vec![3, 4, 5],
            threads: 0,
        }
    }
}

/// One grid cell: a kind at a severity, with the generator parameters to
/// use (normally the table entry).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub params: CorruptionParams,
}

impl CellSpec {
    pub fn from_table(kind: CorruptionKind, severity: u8) -> Result<Self> {
        Ok(Self {
            kind,
            severity,
            params: severity_params(kind, severity)?,
        })
    }
}

impl EvalConfig {
    pub fn cells(&self) -> Result<Vec<CellSpec>> {
        let mut out = Vec::new();
        for &kind in &self.kinds {
            for &s in &self.severities {
                out.push(CellSpec::from_table(kind, s)?);
            }
        }
        Ok(out)
    }

    pub fn dataset(&self) -> Vec<ToyScene> {
        make_toy_dataset(self.eval_seed, self.eval_scenes)
    }
}

/// Per-image corruption seed: distinct for every (grid seed, image) pair.
fn image_seed(base: u64, index: usize) -> u64 {
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index as u64
}

struct Pass {
    encoder_tokens: Vec<Matrix>,
    adapter_tokens: Vec<Matrix>,
    correct: usize,
}

fn run_pass(
    model: &Classifier,
    encoder: &FrozenEncoder,
    scenes: &[ToyScene],
    corruption: Option<(&CorruptionParams, u64)>,
) -> Result<Pass> {
    let mut pass = Pass {
        encoder_tokens: Vec::with_capacity(scenes.len()),
        adapter_tokens: Vec::with_capacity(scenes.len()),
        correct: 0,
    };
    for (i, scene) in scenes.iter().enumerate() {
        let tokens = match corruption {
            Some((params, seed)) => encoder.encode(&corrupt_counted(&scene.image, params, image_seed(seed, i))?)?,
            None => encoder.encode(&scene.image)?,
        };
        let z = model.adapter_output(&tokens)?;
        let pooled = z.column_means();
        let logits = pooled.matmul(model.head_w.value())?.add(model.head_b.value())?;
        pass.correct += usize::from(argmax(logits.data()) == scene.label);
        pass.encoder_tokens.push(tokens);
        pass.adapter_tokens.push(z);
    }
    Ok(pass)
}

fn mean_purity(tokens: &[Matrix], scenes: &[ToyScene], count: usize) -> Result<f64> {
    let n = count.min(scenes.len());
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..n {
        total += kmeans2_grouping(&tokens[i], &scenes[i].token_mask, i as u64)?.purity;
    }
    Ok(total / n as f64)
}

fn mean_consistency(clean: &[Matrix], corrupted: &[Matrix]) -> Result<f64> {
    let mut total = 0.0;
    for (a, b) in clean.iter().zip(corrupted) {
        total += feature_consistency(a, b)?;
    }
    Ok(total / clean.len().max(1) as f64)
}

/// Purity of K-means on i.i.d. Gaussian tokens against the scene masks.
pub fn random_feature_null(scenes: &[ToyScene], count: usize, dim: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = count.min(scenes.len());
    let mut total = 0.0;
    for (i, scene) in scenes.iter().take(n).enumerate() {
        let z = Matrix::from_fn(scene.token_mask.len(), dim, |_, _| StandardNormal.sample(&mut rng));
        total += kmeans2_grouping(&z, &scene.token_mask, i as u64)?.purity;
    }
    Ok(total / n.max(1) as f64)
}

pub fn evaluate_grid(
    model: &Classifier,
    train_config: &TrainConfig,
    scenes: &[ToyScene],
    cells: &[CellSpec],
    config: &EvalConfig,
) -> Result<RobustnessReport> {
    let encoder = FrozenEncoder::new(train_config.encoder_seed);
    let clean = run_pass(model, &encoder, scenes, None)?;
    let total = scenes.len().max(1) as f64;

    let evaluate_cell = |cell: &CellSpec| -> Result<CellReport> {
        let pass = run_pass(model, &encoder, scenes, Some((&cell.params, config.corruption_seed)))?;
        Ok(CellReport {
            kind: cell.kind,
            severity: cell.severity,
            params: cell.params,
            accuracy: pass.correct as f64 / total,
            encoder_consistency: mean_consistency(&clean.encoder_tokens, &pass.encoder_tokens)?,
            feature_consistency: mean_consistency(&clean.adapter_tokens, &pass.adapter_tokens)?,
            grouping_purity: mean_purity(&pass.adapter_tokens, scenes, config.grouping_scenes)?,
        })
    };

    let threads = crate::resolve_threads(config.threads).min(cells.len().max(1));
    let results: Vec<Result<CellReport>> = if threads <= 1 {
        cells.iter().map(evaluate_cell).collect()
    } else {
        let mut slots: Vec<Option<Result<CellReport>>> = (0..cells.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            for (worker, chunk) in slots.chunks_mut(cells.len().div_ceil(threads)).enumerate() {
                let start = worker * cells.len().div_ceil(threads);
                let evaluate_cell = &evaluate_cell;
                scope.spawn(move || {
                    for (k, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(evaluate_cell(&cells[start + k]));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("every cell evaluated")).collect()
    };
    let cells = results.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(RobustnessReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model_kind: model.kind,
        train_seed: train_config.seed,
        eval_seed: config.eval_seed,
        eval_scenes: scenes.len(),
        corruption_seed: config.corruption_seed,
        config_hash: crate::report::config_hash(train_config)?,
        clean_accuracy: clean.correct as f64 / total,
        clean_grouping_purity: mean_purity(&clean.adapter_tokens, scenes, config.grouping_scenes)?,
        cells,
    })
}

/// Builds the evaluation set and grid from `config` and evaluates.
pub fn evaluate(model: &Classifier, train_config: &TrainConfig, config: &EvalConfig) -> Result<RobustnessReport> {
    evaluate_grid(model, train_config, &config.dataset(), &config.cells()?, config)
}

//! Clean-data training: Adam on softmax cross-entropy with crop and color
//! jitter augmentation. Nothing here touches the corruption generators.

use std::cell::Cell;

use ibkit_core::adapter::{draw_drop, DEFAULT_LAMBDA, DEFAULT_P_DROP};
use ibkit_core::corruptions::Image;
use ibkit_core::tensor::{ParamCollection, ParamSlot};
use ibkit_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{FrozenEncoder, FROZEN_ENCODER_SEED, TOKEN_DIM};
use crate::model::{cross_entropy, Classifier, ModelKind};
use crate::scene::{make_toy_dataset, ToyScene, NUM_CLASSES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub p_drop: f64,
    pub lambda_init: f64,
    /// Largest crop offset in pixels (reflection padding).
    pub crop_jitter: usize,
    /// Largest per-channel additive color shift.
    pub color_jitter: f64,
    pub train_scenes: usize,
    pub heads: usize,
    pub encoder_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model_kind: ModelKind::Fused,
            lr: 1e-3,
            batch_size: 32,
            steps: 2000,
            seed: 0,
            p_drop: DEFAULT_P_DROP,
            lambda_init: DEFAULT_LAMBDA,
            crop_jitter: 4,
            color_jitter: 0.1,
            train_scenes: 4096,
            heads: 4,
            encoder_seed: FROZEN_ENCODER_SEED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.p_drop) {
            return bad(format!("p_drop must lie in [0, 1], got {}", self.p_drop));
        }
        if self.train_scenes == 0 {
            return bad("train_scenes must be at least 1".into());
        }
        if self.color_jitter < 0.0 {
            return bad(format!("color_jitter must be nonnegative, got {}", self.color_jitter));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub config: TrainConfig,
    pub model: Classifier,
    pub trace: Vec<TracePoint>,
}

/// Independent generator streams derived from one seed.
pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const INIT_STREAM: u64 = 1;
const BATCH_STREAM: u64 = 2;
const AUGMENT_STREAM: u64 = 3;
const DROP_STREAM: u64 = 4;

pub fn init_model(config: &TrainConfig) -> Result<Classifier> {
    config.validate()?;
    Classifier::init(
        config.model_kind,
        TOKEN_DIM,
        config.heads,
        NUM_CLASSES,
        config.lambda_init,
        config.p_drop,
        &mut stream(config.seed, INIT_STREAM),
    )
}

/// Generates `config.train_scenes` scenes from `config.seed` and trains.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    let data = make_toy_dataset(config.seed, config.train_scenes);
    train_policy(&data, config)
}

pub fn train_policy(dataset: &[ToyScene], config: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidParam("training set is empty".into()));
    }
    let mut model = init_model(config)?;
    let encoder = FrozenEncoder::new(config.encoder_seed);
    let mut batches = stream(config.seed, BATCH_STREAM);
    let mut augment = stream(config.seed, AUGMENT_STREAM);
    let mut drops = stream(config.seed, DROP_STREAM);
    let mut adam = Adam::new(&model, config.lr);
    let mut trace = Vec::with_capacity(config.steps);
    let p_drop = model.p_drop();
    let scale = 1.0 / config.batch_size as f64;

    for step in 0..config.steps {
        model.zero_grads();
        let dropped = draw_drop(p_drop, &mut drops);
        let mut total = 0.0;
        for _ in 0..config.batch_size {
            let scene = &dataset[batches.random_range(0..dataset.len())];
            let image = augment_image(&scene.image, config.crop_jitter, config.color_jitter, &mut augment);
            let tokens = encoder.encode(&image)?;
            let (logits, cache) = model.forward(&tokens, dropped)?;
            let (loss, mut d_logits) = cross_entropy(&logits, scene.label);
            d_logits.iter_mut().for_each(|g| *g *= scale);
            model.backward(&d_logits, cache)?;
            total += loss;
        }
        let loss = total * scale;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                stage: format!("training loss at step {step}"),
            });
        }
        adam.step(&mut model);
        trace.push(TracePoint { step, loss });
    }
    Ok(TrainOutcome {
        config: config.clone(),
        model,
        trace,
    })
}

/// Random shift of up to `crop` pixels per axis with mirrored borders, then a
/// uniform per-channel shift in `[-color, color]`.
pub fn augment_image<R: Rng + ?Sized>(image: &Image, crop: usize, color: f64, rng: &mut R) -> Image {
    let c = crop as i64;
    let (dy, dx) = if c > 0 {
        (rng.random_range(-c..=c), rng.random_range(-c..=c))
    } else {
        (0, 0)
    };
    let shift: [f64; 3] = if color > 0.0 {
        std::array::from_fn(|_| rng.random_range(-color..=color))
    } else {
        [0.0; 3]
    };
    let (h, w) = (image.height(), image.width());
    Image::from_fn(h, w, |y, x| {
        let rgb = image.rgb(mirror(y as isize + dy as isize, h), mirror(x as isize + dx as isize, w));
        std::array::from_fn(|k| rgb[k] + shift[k])
    })
}

fn mirror(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - 1 - m) as usize
    } else {
        m as usize
    }
}

/// Adam with the usual defaults (β1 = 0.9, β2 = 0.999, ε = 1e-8).
pub struct Adam {
    lr: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new<P: ParamCollection + ?Sized>(params: &P, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.slots().iter().map(|s| vec![0.0; s.value().len()]).collect();
        Self {
            lr,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step<P: ParamCollection + ?Sized>(&mut self, params: &mut P) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for ((slot, m), v) in params.slots_mut().into_iter().zip(&mut self.m).zip(&mut self.v) {
            update_slot(slot, m, v, self.lr, c1, c2);
        }
    }
}

fn update_slot(slot: &mut ParamSlot, m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64) {
    let grad = slot.grad().data().to_vec();
    for (k, value) in slot.value_mut().iter_mut().enumerate() {
        let g = grad[k];
        m[k] = Adam::BETA1 * m[k] + (1.0 - Adam::BETA1) * g;
        v[k] = Adam::BETA2 * v[k] + (1.0 - Adam::BETA2) * g * g;
        *value -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + Adam::EPS);
    }
}

thread_local! {
    static CORRUPTION_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of corruption calls made through [`corrupt_counted`] on this thread.
pub fn corruption_calls() -> u64 {
    CORRUPTION_CALLS.with(Cell::get)
}

pub fn reset_corruption_calls() {
    CORRUPTION_CALLS.with(|c| c.set(0));
}

/// The only route from the harness to the corruption generators; counts
/// every call so tests can assert that training made none.
pub fn corrupt_counted(
    image: &Image,
    params: &ibkit_core::corruptions::CorruptionParams,
    seed: u64,
) -> Result<Image> {
    CORRUPTION_CALLS.with(|c| c.set(c.get() + 1));
    ibkit_core::corruptions::apply_params(image, params, seed)
}

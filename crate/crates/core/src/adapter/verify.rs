//! Self-checks used by the test suites and the command line: a full
//! finite-difference gradient check of the fused adapter and the
//! noise-channel gate suppression experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::{finite_diff_gradcheck, GradCheckReport, Matrix, ParamCollection, ParamSlot, SlotCheck};

use super::fused::{fused_backward, fused_forward, FusedParams, Mode, DEFAULT_LAMBDA};
use super::ib::{covariance_gram, sigmoid_gate};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FusedGradCheckConfig {
    pub tokens: usize,
    pub dim: usize,
    pub heads: usize,
    pub hidden: usize,
    pub step: f64,
    /// Redraw every parameter entry from N(0, scale²) instead of the default
    /// initialization, so that every term of the backward pass is exercised
    /// at order-one magnitudes.
    pub param_scale: Option<f64>,
}

impl Default for FusedGradCheckConfig {
    fn default() -> Self {
        Self {
            tokens: 8,
            dim: 16,
            heads: 4,
            hidden: 64,
            step: 1e-5,
            param_scale: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FusedGradCheck {
    pub seed: u64,
    pub params: GradCheckReport,
    pub input: SlotCheck,
}

impl FusedGradCheck {
    pub fn max_rel_error(&self) -> f64 {
        self.params.max_rel_error().max(self.input.rel_error)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.params.passes(tol) && self.input.rel_error < tol
    }
}

/// Loss `mean(Z)` of the fused adapter in inference mode on `X ~ N(0, 1)`;
/// compares analytic gradients of every slot and of `X` with central
/// differences.
pub fn fused_gradcheck(seed: u64, cfg: &FusedGradCheckConfig) -> Result<FusedGradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = FusedParams::init_with(cfg.dim, cfg.heads, cfg.hidden, DEFAULT_LAMBDA, 0.0, &mut rng)?;
    if let Some(scale) = cfg.param_scale {
        let normal = Normal::new(0.0, scale).map_err(|e| crate::Error::InvalidParam(e.to_string()))?;
        for slot in params.slots_mut() {
            for v in slot.value_mut() {
                *v = normal.sample(&mut rng);
            }
        }
    }
    let x = Matrix::from_fn(cfg.tokens, cfg.dim, |_, _| StandardNormal.sample(&mut rng));
    let count = (cfg.tokens * cfg.dim) as f64;
    let upstream = Matrix::filled(cfg.tokens, cfg.dim, 1.0 / count);

    let loss = |p: &FusedParams, x: &Matrix| -> f64 {
        match fused_forward(x, p, Mode::Infer, &mut rng_stub()) {
            Ok((z, _)) => z.mean(),
            Err(_) => f64::NAN,
        }
    };

    params.zero_grads();
    let (_, cache) = fused_forward(&x, &params, Mode::Infer, &mut rng_stub())?;
    let d_x = fused_backward(&upstream, &cache, &mut params)?;

    let report = finite_diff_gradcheck(&mut params, cfg.step, |p| loss(p, &x))?;

    let mut input = vec![ParamSlot::new("input", x.clone())];
    input[0].accumulate_grad(&d_x)?;
    let input_report = finite_diff_gradcheck(&mut input, cfg.step, |slots| loss(&params, slots[0].value()))?;

    Ok(FusedGradCheck {
        seed,
        params: report,
        input: input_report.slots.into_iter().next().expect("one slot"),
    })
}

/// Inference mode never draws; any generator will do.
fn rng_stub() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuppressionOutcome {
    pub seed: u64,
    /// Mean gate over entries pairing the noise channel with a signal channel.
    pub noise_coupling: f64,
    /// Mean gate over off-diagonal entries between signal channels.
    pub semantic_coupling: f64,
}

impl SuppressionOutcome {
    pub fn suppressed(&self) -> bool {
        self.noise_coupling < self.semantic_coupling
    }
}

/// `d − 1` channels are scaled copies of one latent signal plus a small
/// perturbation, the last channel is independent zero-mean noise. The gate
/// uses `W_q = I`, `τ = 1`, `b = 0`.
pub fn noise_channel_suppression(seed: u64, tokens: usize, channels: usize) -> SuppressionOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale_dist = Uniform::new(0.5, 1.5).expect("valid range");
    let scales: Vec<f64> = (0..channels - 1).map(|_| scale_dist.sample(&mut rng)).collect();
    let mut x = Matrix::zeros(tokens, channels);
    for t in 0..tokens {
        let latent: f64 = StandardNormal.sample(&mut rng);
        for (k, a) in scales.iter().enumerate() {
            let jitter: f64 = StandardNormal.sample(&mut rng);
            x.set(t, k, a * latent + 0.1 * jitter);
        }
        x.set(t, channels - 1, StandardNormal.sample(&mut rng));
    }
    let gram = covariance_gram(&x, &Matrix::identity(channels)).expect("square identity");
    let gate = sigmoid_gate(&gram, 1.0, 0.0);
    let noise = channels - 1;
    let (mut noise_sum, mut noise_n, mut sem_sum, mut sem_n) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..channels {
        for j in 0..channels {
            if i == j {
                continue;
            }
            if i == noise || j == noise {
                noise_sum += gate.get(i, j);
                noise_n += 1.0;
            } else {
                sem_sum += gate.get(i, j);
                sem_n += 1.0;
            }
        }
    }
    SuppressionOutcome {
        seed,
        noise_coupling: noise_sum / noise_n,
        semantic_coupling: sem_sum / sem_n,
    }
}

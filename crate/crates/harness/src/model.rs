//! Projector (MLP, covariance-gated adapter, or the fused pair) followed by
//! mean pooling over tokens and a linear classifier.

use std::fmt;
use std::str::FromStr;

use ibkit_core::adapter::{
    fused_backward, fused_forward_with, ib_adapter_backward, ib_adapter_forward, mlp_backward, mlp_forward,
    FusedCache, FusedParams, IbAdapterParams, IbCache, MlpCache, MlpParams, HIDDEN_RATIO, INIT_STD,
};
use ibkit_core::tensor::{softmax_in_place, Matrix, ParamCollection, ParamSlot};
use ibkit_core::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Ib,
    Fused,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [Self::Mlp, Self::Ib, Self::Fused];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mlp => "mlp",
            Self::Ib => "ib",
            Self::Fused => "fused",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::UnsupportedKind {
                name: s.to_string(),
                valid: "mlp, ib, fused".into(),
            })
    }
}

#[derive(Clone, Debug)]
pub enum Projector {
    Mlp(MlpParams),
    Ib(IbAdapterParams),
    Fused(FusedParams),
}

enum ProjectorCache {
    Mlp(MlpCache),
    Ib(IbCache),
    Fused(FusedCache),
}

pub struct ForwardCache {
    projector: ProjectorCache,
    pooled: Matrix,
    tokens: usize,
}

#[derive(Clone, Debug)]
pub struct Classifier {
    pub kind: ModelKind,
    pub projector: Projector,
    pub head_w: ParamSlot,
    pub head_b: ParamSlot,
}

impl Classifier {
    pub fn init<R: Rng + ?Sized>(
        kind: ModelKind,
        dim: usize,
        heads: usize,
        classes: usize,
        lambda: f64,
        p_drop: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let projector = match kind {
            ModelKind::Mlp => Projector::Mlp(MlpParams::init(dim, HIDDEN_RATIO * dim, rng)),
            ModelKind::Ib => Projector::Ib(IbAdapterParams::init(dim, heads, rng)?),
            ModelKind::Fused => Projector::Fused(FusedParams::init_with(
                dim,
                heads,
                HIDDEN_RATIO * dim,
                lambda,
                p_drop,
                rng,
            )?),
        };
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        Ok(Self {
            kind,
            projector,
            head_w: ParamSlot::new("head.w", Matrix::from_fn(dim, classes, |_, _| normal.sample(rng))),
            head_b: ParamSlot::new("head.b", Matrix::zeros(1, classes)),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.head_w.value().cols()
    }

    /// Whether training draws pathway dropout for this model.
    pub fn p_drop(&self) -> f64 {
        match &self.projector {
            Projector::Fused(p) => p.p_drop(),
            _ => 0.0,
        }
    }

    fn project(&self, x: &Matrix, dropped: bool) -> Result<(Matrix, ProjectorCache)> {
        Ok(match &self.projector {
            Projector::Mlp(p) => {
                let (z, c) = mlp_forward(x, p)?;
                (z, ProjectorCache::Mlp(c))
            }
            Projector::Ib(p) => {
                let (z, c) = ib_adapter_forward(x, p)?;
                (z, ProjectorCache::Ib(c))
            }
            Projector::Fused(p) => {
                let (z, c) = fused_forward_with(x, p, dropped)?;
                (z, ProjectorCache::Fused(c))
            }
        })
    }

    /// Token-level adapter output with every pathway active.
    pub fn adapter_output(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.project(x, false)?.0)
    }

    /// Logits for one token matrix; `dropped` only affects the fused kind.
    pub fn forward(&self, x: &Matrix, dropped: bool) -> Result<(Vec<f64>, ForwardCache)> {
        let (z, cache) = self.project(x, dropped)?;
        let pooled = z.column_means();
        let logits = pooled.matmul(self.head_w.value())?.add(self.head_b.value())?;
        Ok((
            logits.data().to_vec(),
            ForwardCache {
                projector: cache,
                pooled,
                tokens: z.rows(),
            },
        ))
    }

    pub fn logits(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forward(x, false)?.0)
    }

    pub fn predict(&self, x: &Matrix) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// Accumulates parameter gradients for upstream `d_logits`.
    pub fn backward(&mut self, d_logits: &[f64], cache: ForwardCache) -> Result<()> {
        let d_logits = Matrix::row_vector(d_logits);
        self.head_w.accumulate_grad(&cache.pooled.t_matmul(&d_logits)?)?;
        self.head_b.accumulate_grad(&d_logits)?;
        let d_pooled = d_logits.matmul_t(self.head_w.value())?;
        let scale = 1.0 / cache.tokens as f64;
        let d_z = Matrix::from_fn(cache.tokens, d_pooled.cols(), |_, c| d_pooled.get(0, c) * scale);
        match (&mut self.projector, cache.projector) {
            (Projector::Mlp(p), ProjectorCache::Mlp(c)) => {
                mlp_backward(&d_z, &c, p)?;
            }
            (Projector::Ib(p), ProjectorCache::Ib(c)) => {
                ib_adapter_backward(&d_z, &c, p)?;
            }
            (Projector::Fused(p), ProjectorCache::Fused(c)) => {
                fused_backward(&d_z, &c, p)?;
            }
            _ => return Err(Error::State("forward cache does not match the projector kind")),
        }
        Ok(())
    }
}

impl ParamCollection for Classifier {
    fn slots(&self) -> Vec<&ParamSlot> {
        let mut out = match &self.projector {
            Projector::Mlp(p) => p.slots(),
            Projector::Ib(p) => p.slots(),
            Projector::Fused(p) => p.slots(),
        };
        out.push(&self.head_w);
        out.push(&self.head_b);
        out
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot> {
        let mut out = match &mut self.projector {
            Projector::Mlp(p) => p.slots_mut(),
            Projector::Ib(p) => p.slots_mut(),
            Projector::Fused(p) => p.slots_mut(),
        };
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// Softmax cross-entropy; returns the loss and its gradient in the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let mut probs = logits.to_vec();
    softmax_in_place(&mut probs);
    let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
    probs[label] -= 1.0;
    (loss, probs)
}

//! Dual-pathway projector `Z = MLP(X) + tanh(λ) · IB(X)` with stochastic
//! pathway dropout of the MLP branch during training.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{normal_cdf, normal_pdf, tanh_grad, Matrix, ParamCollection, ParamSlot};

use super::ib::{ib_adapter_backward, ib_adapter_forward, IbAdapterParams, IbCache, INIT_STD};

pub const DEFAULT_LAMBDA: f64 = 0.3;
pub const DEFAULT_P_DROP: f64 = 0.3;
pub const HIDDEN_RATIO: usize = 4;

/// Bias-free two-layer GELU MLP.
#[derive(Clone, Debug)]
pub struct MlpParams {
    pub w1: ParamSlot,
    pub w2: ParamSlot,
}

impl MlpParams {
    pub fn init<R: Rng + ?Sized>(dim: usize, hidden: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let w1 = Matrix::from_fn(dim, hidden, |_, _| normal.sample(rng));
        let w2 = Matrix::from_fn(hidden, dim, |_, _| normal.sample(rng));
        Self {
            w1: ParamSlot::new("mlp.w1", w1),
            w2: ParamSlot::new("mlp.w2", w2),
        }
    }

    pub fn new(w1: Matrix, w2: Matrix) -> Result<Self> {
        if w1.cols() != w2.rows() || w1.rows() != w2.cols() {
            return Err(Error::dim("MlpParams", w1.shape(), w2.shape()));
        }
        Ok(Self {
            w1: ParamSlot::new("mlp.w1", w1),
            w2: ParamSlot::new("mlp.w2", w2),
        })
    }

    pub fn dim(&self) -> usize {
        self.w1.value().rows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.value().cols()
    }
}

impl ParamCollection for MlpParams {
    fn slots(&self) -> Vec<&ParamSlot> {
        vec![&self.w1, &self.w2]
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot> {
        vec![&mut self.w1, &mut self.w2]
    }
}

#[derive(Clone, Debug)]
pub struct MlpCache {
    x: Matrix,
    pre: Matrix,
    cdf: Matrix,
    activated: Matrix,
}

pub fn mlp_forward(x: &Matrix, params: &MlpParams) -> Result<(Matrix, MlpCache)> {
    let pre = x.matmul(params.w1.value())?;
    let cdf = pre.map(normal_cdf);
    let activated = pre.zip_map(&cdf, |h, c| h * c)?;
    let out = activated.matmul(params.w2.value())?;
    out.ensure_finite("mlp output")?;
    Ok((
        out,
        MlpCache {
            x: x.clone(),
            pre,
            cdf,
            activated,
        },
    ))
}

pub fn mlp_backward(grad_out: &Matrix, cache: &MlpCache, params: &mut MlpParams) -> Result<Matrix> {
    params.w2.accumulate_grad(&cache.activated.t_matmul(grad_out)?)?;
    let d_act = grad_out.matmul_t(params.w2.value())?;
    let slope = cache.pre.zip_map(&cache.cdf, |h, c| c + h * normal_pdf(h))?;
    let d_pre = d_act.zip_map(&slope, |g, s| g * s)?;
    params.w1.accumulate_grad(&cache.x.t_matmul(&d_pre)?)?;
    d_pre.matmul_t(params.w1.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Clone, Debug)]
pub struct FusedParams {
    pub ib: IbAdapterParams,
    pub mlp: MlpParams,
    pub lambda: ParamSlot,
    p_drop: f64,
}

impl FusedParams {
    /// Default initialization: hidden width 4·D, λ = 0.3.
    pub fn init<R: Rng + ?Sized>(dim: usize, heads: usize, p_drop: f64, rng: &mut R) -> Result<Self> {
        Self::init_with(dim, heads, dim * HIDDEN_RATIO, DEFAULT_LAMBDA, p_drop, rng)
    }

    pub fn init_with<R: Rng + ?Sized>(
        dim: usize,
        heads: usize,
        hidden: usize,
        lambda: f64,
        p_drop: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let ib = IbAdapterParams::init(dim, heads, rng)?;
        let mlp = MlpParams::init(dim, hidden, rng);
        Self::new(ib, mlp, lambda, p_drop)
    }

    pub fn new(ib: IbAdapterParams, mlp: MlpParams, lambda: f64, p_drop: f64) -> Result<Self> {
        check_p_drop(p_drop)?;
        if mlp.dim() != ib.dim() {
            return Err(Error::Shape(format!(
                "MLP pathway dimension {} differs from IB pathway dimension {}",
                mlp.dim(),
                ib.dim()
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidParam("lambda must be finite".into()));
        }
        Ok(Self {
            ib,
            mlp,
            lambda: ParamSlot::scalar("lambda", lambda),
            p_drop,
        })
    }

    pub fn dim(&self) -> usize {
        self.ib.dim()
    }

    pub fn p_drop(&self) -> f64 {
        self.p_drop
    }

    pub fn set_p_drop(&mut self, p_drop: f64) -> Result<()> {
        check_p_drop(p_drop)?;
        self.p_drop = p_drop;
        Ok(())
    }

    pub fn gate_scale(&self) -> f64 {
        self.lambda.value().item().tanh()
    }
}

fn check_p_drop(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("p_drop must lie in [0, 1], got {p}")))
    }
}

impl ParamCollection for FusedParams {
    fn slots(&self) -> Vec<&ParamSlot> {
        let mut out = self.ib.slots();
        out.extend(self.mlp.slots());
        out.push(&self.lambda);
        out
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot> {
        let mut out = self.ib.slots_mut();
        out.extend(self.mlp.slots_mut());
        out.push(&mut self.lambda);
        out
    }
}

/// Everything [`fused_backward`] needs, including the dropout decision.
#[derive(Clone, Debug)]
pub struct FusedCache {
    mlp: Option<MlpCache>,
    ib: IbCache,
    ib_out: Matrix,
    dropped: bool,
}

impl FusedCache {
    /// Whether the MLP pathway was dropped in this forward call.
    pub fn dropped(&self) -> bool {
        self.dropped
    }

    pub fn ib_output(&self) -> &Matrix {
        &self.ib_out
    }

    pub fn ib_cache(&self) -> &IbCache {
        &self.ib
    }
}

/// One Bernoulli(p_drop) draw per call in train mode; inference always keeps
/// both pathways.
pub fn fused_forward<R: Rng + ?Sized>(
    x: &Matrix,
    params: &FusedParams,
    mode: Mode,
    rng: &mut R,
) -> Result<(Matrix, FusedCache)> {
    let dropped = match mode {
        Mode::Train => draw_drop(params.p_drop, rng),
        Mode::Infer => false,
    };
    fused_forward_with(x, params, dropped)
}

/// The SPD draw used by [`fused_forward`] in train mode.
pub fn draw_drop<R: Rng + ?Sized>(p_drop: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < p_drop
}

/// Forward pass with an externally made dropout decision, for callers that
/// share one draw across several inputs (a mini-batch).
pub fn fused_forward_with(x: &Matrix, params: &FusedParams, dropped: bool) -> Result<(Matrix, FusedCache)> {
    let (ib_out, ib) = ib_adapter_forward(x, &params.ib)?;
    let scale = params.gate_scale();
    let (z, mlp) = if dropped {
        (ib_out.scale(scale), None)
    } else {
        let (m, cache) = mlp_forward(x, &params.mlp)?;
        (m.add(&ib_out.scale(scale))?, Some(cache))
    };
    z.ensure_finite("fused output")?;
    Ok((
        z,
        FusedCache {
            mlp,
            ib,
            ib_out,
            dropped,
        },
    ))
}

/// Accumulates gradients into every slot and returns dL/dX.
pub fn fused_backward(grad_out: &Matrix, cache: &FusedCache, params: &mut FusedParams) -> Result<Matrix> {
    let lambda = params.lambda.value().item();
    let scale = lambda.tanh();
    params.lambda.grad_mut()[0] += tanh_grad(lambda) * grad_out.dot(&cache.ib_out)?;
    let mut d_x = ib_adapter_backward(&grad_out.scale(scale), &cache.ib, &mut params.ib)?;
    if let Some(mlp_cache) = &cache.mlp {
        d_x.add_assign(&mlp_backward(grad_out, mlp_cache, &mut params.mlp)?)?;
    }
    Ok(d_x)
}

/// Parameters plus the intermediates of the most recent forward call.
#[derive(Clone, Debug)]
pub struct FusedIbAdapter {
    pub params: FusedParams,
    recorded: Option<FusedCache>,
}

impl FusedIbAdapter {
    pub fn new(params: FusedParams) -> Self {
        Self {
            params,
            recorded: None,
        }
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Matrix, mode: Mode, rng: &mut R) -> Result<Matrix> {
        let (z, cache) = fused_forward(x, &self.params, mode, rng)?;
        self.recorded = Some(cache);
        Ok(z)
    }

    pub fn last_dropped(&self) -> Option<bool> {
        self.recorded.as_ref().map(FusedCache::dropped)
    }

    /// Consumes the recorded intermediates.
    pub fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let cache = self
            .recorded
            .take()
            .ok_or(Error::State("backward called without a recorded forward pass"))?;
        fused_backward(grad_out, &cache, &mut self.params)
    }
}

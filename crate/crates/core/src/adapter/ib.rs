//! The covariance-gated adapter: per head, a channel Gram matrix between a
//! projected query and the raw input, a sigmoid gate over it, and a GELU
//! value transform that the gate mixes across channels.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{
    layer_norm_backward, layer_norm_cached, normal_cdf, normal_pdf, sigmoid, LayerNormCache, Matrix, ParamCollection,
    ParamSlot, LAYER_NORM_EPS,
};

use super::heads::{head_width, merge_heads, partition_heads};

pub const INIT_STD: f64 = 0.02;
pub const INIT_GATE_BIAS: f64 = 1.0;

/// Learnable quantities of one head.
#[derive(Clone, Debug)]
pub struct HeadParams {
    pub w_q: ParamSlot,
    pub tau: ParamSlot,
    pub bias: ParamSlot,
    pub w_v1: ParamSlot,
    pub w_v2: ParamSlot,
    pub norm_gamma: ParamSlot,
    pub norm_beta: ParamSlot,
}

impl HeadParams {
    fn init<R: Rng + ?Sized>(index: usize, d: usize, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut weight = |name: &str| {
            ParamSlot::new(
                format!("ib.head{index}.{name}"),
                Matrix::from_fn(d, d, |_, _| normal.sample(rng)),
            )
        };
        let w_q = weight("w_q");
        let w_v1 = weight("w_v1");
        let w_v2 = weight("w_v2");
        Self {
            w_q,
            tau: ParamSlot::scalar(format!("ib.head{index}.tau"), 1.0 / (d as f64).sqrt()),
            bias: ParamSlot::scalar(format!("ib.head{index}.bias"), INIT_GATE_BIAS),
            w_v1,
            w_v2,
            norm_gamma: ParamSlot::new(format!("ib.head{index}.norm_gamma"), Matrix::filled(1, d, 1.0)),
            norm_beta: ParamSlot::new(format!("ib.head{index}.norm_beta"), Matrix::zeros(1, d)),
        }
    }

    fn slots(&self) -> [&ParamSlot; 7] {
        [
            &self.w_q,
            &self.tau,
            &self.bias,
            &self.w_v1,
            &self.w_v2,
            &self.norm_gamma,
            &self.norm_beta,
        ]
    }

    fn slots_mut(&mut self) -> [&mut ParamSlot; 7] {
        [
            &mut self.w_q,
            &mut self.tau,
            &mut self.bias,
            &mut self.w_v1,
            &mut self.w_v2,
            &mut self.norm_gamma,
            &mut self.norm_beta,
        ]
    }

    fn validate(&self, d: usize) -> Result<()> {
        for (slot, shape) in [
            (&self.w_q, (d, d)),
            (&self.w_v1, (d, d)),
            (&self.w_v2, (d, d)),
            (&self.tau, (1, 1)),
            (&self.bias, (1, 1)),
            (&self.norm_gamma, (1, d)),
            (&self.norm_beta, (1, d)),
        ] {
            if slot.value().shape() != shape {
                return Err(Error::Shape(format!(
                    "slot `{}` has shape {:?}, expected {shape:?}",
                    slot.name(),
                    slot.value().shape()
                )));
            }
        }
        if !self.tau.value().item().is_finite() {
            return Err(Error::InvalidParam(format!("`{}` is not finite", self.tau.name())));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct IbAdapterParams {
    dim: usize,
    heads: Vec<HeadParams>,
}

impl IbAdapterParams {
    /// Random initialization: weights ~ N(0, 0.02²), tau = 1/√d, gate bias +1,
    /// identity norm affine.
    pub fn init<R: Rng + ?Sized>(dim: usize, heads: usize, rng: &mut R) -> Result<Self> {
        let d = head_width(dim, heads)?;
        let heads = (0..heads).map(|h| HeadParams::init(h, d, rng)).collect();
        Ok(Self { dim, heads })
    }

    pub fn from_heads(dim: usize, heads: Vec<HeadParams>) -> Result<Self> {
        let d = head_width(dim, heads.len())?;
        for head in &heads {
            head.validate(d)?;
        }
        Ok(Self { dim, heads })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads.len()
    }

    pub fn heads(&self) -> &[HeadParams] {
        &self.heads
    }

    pub fn heads_mut(&mut self) -> &mut [HeadParams] {
        &mut self.heads
    }
}

impl ParamCollection for IbAdapterParams {
    fn slots(&self) -> Vec<&ParamSlot> {
        self.heads.iter().flat_map(HeadParams::slots).collect()
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot> {
        self.heads.iter_mut().flat_map(HeadParams::slots_mut).collect()
    }
}

/// `G = (X_h W_q)ᵀ X_h`. The key is the raw head input.
pub fn covariance_gram(x_h: &Matrix, w_q: &Matrix) -> Result<Matrix> {
    x_h.matmul(w_q)?.t_matmul(x_h)
}

/// `A[i, j] = sigmoid(tau * G[i, j] - bias)`.
pub fn sigmoid_gate(gram: &Matrix, tau: f64, bias: f64) -> Matrix {
    gram.map(|g| sigmoid(tau * g - bias))
}

/// `V = LayerNorm(GELU(X_h W_v1) W_v2)`, row-wise.
pub fn value_transform(
    x_h: &Matrix,
    w_v1: &Matrix,
    w_v2: &Matrix,
    gamma: &Matrix,
    beta: &Matrix,
) -> Result<Matrix> {
    Ok(value_transform_cached(x_h, w_v1, w_v2, gamma, beta)?.0)
}

#[derive(Clone, Debug)]
struct ValueCache {
    pre_gelu: Matrix,
    cdf: Matrix,
    activated: Matrix,
    norms: Vec<LayerNormCache>,
}

fn value_transform_cached(
    x_h: &Matrix,
    w_v1: &Matrix,
    w_v2: &Matrix,
    gamma: &Matrix,
    beta: &Matrix,
) -> Result<(Matrix, ValueCache)> {
    let pre_gelu = x_h.matmul(w_v1)?;
    let cdf = pre_gelu.map(normal_cdf);
    let activated = pre_gelu.zip_map(&cdf, |h, c| h * c)?;
    let pre_norm = activated.matmul(w_v2)?;
    if gamma.shape() != (1, pre_norm.cols()) || beta.shape() != gamma.shape() {
        return Err(Error::dim("value_transform norm", pre_norm.shape(), gamma.shape()));
    }
    let mut v = Matrix::zeros(pre_norm.rows(), pre_norm.cols());
    let mut norms = Vec::with_capacity(pre_norm.rows());
    for r in 0..pre_norm.rows() {
        let (out, cache) = layer_norm_cached(pre_norm.row(r), gamma.data(), beta.data(), LAYER_NORM_EPS);
        v.row_mut(r).copy_from_slice(&out);
        norms.push(cache);
    }
    Ok((
        v,
        ValueCache {
            pre_gelu,
            cdf,
            activated,
            norms,
        },
    ))
}

#[derive(Clone, Debug)]
struct HeadCache {
    x: Matrix,
    query: Matrix,
    gram: Matrix,
    gate: Matrix,
    value: Matrix,
    value_cache: ValueCache,
}

/// Intermediates recorded by [`ib_adapter_forward`] for the exact reverse pass.
#[derive(Clone, Debug)]
pub struct IbCache {
    heads: Vec<HeadCache>,
}

impl IbCache {
    /// Gate matrix of head `h`.
    pub fn gate(&self, h: usize) -> &Matrix {
        &self.heads[h].gate
    }

    pub fn gram(&self, h: usize) -> &Matrix {
        &self.heads[h].gram
    }

    pub fn value(&self, h: usize) -> &Matrix {
        &self.heads[h].value
    }
}

/// Per head: `Z_h = V_h A_h`; heads merged back in channel order.
pub fn ib_adapter_forward(x: &Matrix, params: &IbAdapterParams) -> Result<(Matrix, IbCache)> {
    if x.cols() != params.dim {
        return Err(Error::dim("ib_adapter_forward", x.shape(), (x.rows(), params.dim)));
    }
    let parts = partition_heads(x, params.num_heads())?;
    let mut outputs = Vec::with_capacity(parts.len());
    let mut caches = Vec::with_capacity(parts.len());
    for (h, (x_h, p)) in parts.into_iter().zip(&params.heads).enumerate() {
        let query = x_h.matmul(p.w_q.value())?;
        let gram = query.t_matmul(&x_h)?;
        gram.ensure_finite(&format!("head {h} gram"))?;
        let gate = sigmoid_gate(&gram, p.tau.value().item(), p.bias.value().item());
        gate.ensure_finite(&format!("head {h} gate"))?;
        let (value, value_cache) = value_transform_cached(
            &x_h,
            p.w_v1.value(),
            p.w_v2.value(),
            p.norm_gamma.value(),
            p.norm_beta.value(),
        )?;
        value.ensure_finite(&format!("head {h} value"))?;
        let z_h = value.matmul(&gate)?;
        z_h.ensure_finite(&format!("head {h} output"))?;
        outputs.push(z_h);
        caches.push(HeadCache {
            x: x_h,
            query,
            gram,
            gate,
            value,
            value_cache,
        });
    }
    Ok((merge_heads(&outputs)?, IbCache { heads: caches }))
}

/// Accumulates parameter gradients for `grad_out = dL/dZ` and returns dL/dX.
pub fn ib_adapter_backward(
    grad_out: &Matrix,
    cache: &IbCache,
    params: &mut IbAdapterParams,
) -> Result<Matrix> {
    let grads = partition_heads(grad_out, params.num_heads())?;
    let mut grad_inputs = Vec::with_capacity(grads.len());
    for ((dz, c), p) in grads.iter().zip(&cache.heads).zip(params.heads.iter_mut()) {
        let tau = p.tau.value().item();

        // Z = V A
        let d_value = dz.matmul_t(&c.gate)?;
        let d_gate = c.value.t_matmul(dz)?;

        // A = sigmoid(tau G - b)
        let d_logit = d_gate.zip_map(&c.gate, |g, a| g * a * (1.0 - a))?;
        p.tau.grad_mut()[0] += d_logit.dot(&c.gram)?;
        p.bias.grad_mut()[0] -= d_logit.sum();
        let d_gram = d_logit.scale(tau);

        // G = Qᵀ X, Q = X W_q
        let d_query = c.x.matmul_t(&d_gram)?;
        let mut d_x = c.query.matmul(&d_gram)?;
        p.w_q.accumulate_grad(&c.x.t_matmul(&d_query)?)?;
        d_x.add_assign(&d_query.matmul_t(p.w_q.value())?)?;

        // V = LN(GELU(X W1) W2)
        let vc = &c.value_cache;
        let mut d_pre_norm = Matrix::zeros(d_value.rows(), d_value.cols());
        let gamma = p.norm_gamma.value().data().to_vec();
        let mut g_gamma = vec![0.0; gamma.len()];
        let mut g_beta = vec![0.0; gamma.len()];
        for r in 0..d_value.rows() {
            let row = layer_norm_backward(
                d_value.row(r),
                &vc.norms[r],
                &gamma,
                &mut g_gamma,
                &mut g_beta,
            );
            d_pre_norm.row_mut(r).copy_from_slice(&row);
        }
        for (g, v) in p.norm_gamma.grad_mut().iter_mut().zip(&g_gamma) {
            *g += v;
        }
        for (g, v) in p.norm_beta.grad_mut().iter_mut().zip(&g_beta) {
            *g += v;
        }
        p.w_v2.accumulate_grad(&vc.activated.t_matmul(&d_pre_norm)?)?;
        let d_activated = d_pre_norm.matmul_t(p.w_v2.value())?;
        let slope = vc.pre_gelu.zip_map(&vc.cdf, |h, c| c + h * normal_pdf(h))?;
        let d_pre_gelu = d_activated.zip_map(&slope, |g, s| g * s)?;
        p.w_v1.accumulate_grad(&c.x.t_matmul(&d_pre_gelu)?)?;
        d_x.add_assign(&d_pre_gelu.matmul_t(p.w_v1.value())?)?;

        grad_inputs.push(d_x);
    }
    merge_heads(&grad_inputs)
}

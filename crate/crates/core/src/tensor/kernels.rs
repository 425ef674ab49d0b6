//! Scalar and row-wise kernels with their analytic derivatives.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use super::Matrix;

/// Default LayerNorm epsilon (population variance convention).
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Standard normal CDF via `erf`.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Exact GELU, `x * Phi(x)`.
#[inline]
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn sigmoid_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

#[inline]
pub fn tanh_grad(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    SoftmaxRows,
    Tanh,
}

pub fn activate(kind: Activation, x: &Matrix) -> Matrix {
    match kind {
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Tanh => x.map(f64::tanh),
        Activation::SoftmaxRows => softmax_rows(x),
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    out
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Normalized row and the inverse standard deviation, kept for backward.
#[derive(Clone, Debug)]
pub struct LayerNormCache {
    pub normalized: Vec<f64>,
    pub inv_std: f64,
}

/// `gamma * (row - mean) / sqrt(var + eps) + beta`, population variance.
pub fn layer_norm(row: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Vec<f64> {
    layer_norm_cached(row, gamma, beta, eps).0
}

pub fn layer_norm_cached(
    row: &[f64],
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
) -> (Vec<f64>, LayerNormCache) {
    let d = row.len() as f64;
    let mean = row.iter().sum::<f64>() / d;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    let inv_std = 1.0 / (var + eps).sqrt();
    let normalized: Vec<f64> = row.iter().map(|v| (v - mean) * inv_std).collect();
    let out = normalized
        .iter()
        .zip(gamma.iter().zip(beta))
        .map(|(x, (g, b))| g * x + b)
        .collect();
    (
        out,
        LayerNormCache {
            normalized,
            inv_std,
        },
    )
}

/// Gradient with respect to the pre-norm row. `grad_out` is dL/d(output).
/// Accumulates dL/dgamma and dL/dbeta into the given buffers.
pub fn layer_norm_backward(
    grad_out: &[f64],
    cache: &LayerNormCache,
    gamma: &[f64],
    grad_gamma: &mut [f64],
    grad_beta: &mut [f64],
) -> Vec<f64> {
    let d = grad_out.len() as f64;
    let mut g_hat = Vec::with_capacity(grad_out.len());
    for (i, (&g, &xh)) in grad_out.iter().zip(&cache.normalized).enumerate() {
        grad_gamma[i] += g * xh;
        grad_beta[i] += g;
        g_hat.push(g * gamma[i]);
    }
    let mean_g = g_hat.iter().sum::<f64>() / d;
    let mean_gx = g_hat
        .iter()
        .zip(&cache.normalized)
        .map(|(g, x)| g * x)
        .sum::<f64>()
        / d;
    g_hat
        .iter()
        .zip(&cache.normalized)
        .map(|(g, x)| cache.inv_std * (g - mean_g - x * mean_gx))
        .collect()
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{sigmoid, softmax_rows, Matrix};

use super::iterate::ib_iterate;
use super::state::{IbKind, IbProblem, IbState};

/// Channel-attention form of one clustering step:
/// `Q = Σ⁻¹X`, `K = [μ_1 … μ_K]` (current centers), gate
/// `A = softmax_rows(β QᵀK)` or `sigmoid(β QᵀK − b)` (D x K, row j = channel),
/// and `Z = X · A · diag(r)` where `r_c = (n_c/D) / (n_c' · |Σ|^{β/2})` is the
/// mass ratio between the current mass `n_c = D p(c)` and the mass `n_c'`
/// implied by the new assignments.
///
/// Assignments are formed first, then their masses, then `Z`.
pub fn attention_equivalent(
    x: &Matrix,
    state: &IbState,
    beta: f64,
    kind: IbKind,
    bias_b: f64,
) -> Result<Matrix> {
    if x.rows() != state.sigma_inv().rows() || state.centers().rows() != x.rows() {
        return Err(Error::dim("attention_equivalent", x.shape(), state.centers().shape()));
    }
    let d = x.cols() as f64;
    let queries = state.sigma_inv().matmul(x)?;
    let scores = queries.t_matmul(state.centers())?.scale(beta);
    let gate = match kind {
        IbKind::Softmax => softmax_rows(&scores),
        IbKind::Sigmoid => scores.map(|s| sigmoid(s - bias_b)),
    };
    let det_factor = (0.5 * beta * state.log_det()).exp();
    let mut ratios = Vec::with_capacity(state.num_clusters());
    for (c, n_prev) in state.masses().into_iter().enumerate() {
        let prefactor = n_prev / d / det_factor;
        let n_next: f64 = (0..gate.rows()).map(|j| prefactor * gate.get(j, c)).sum();
        ratios.push(n_prev / (n_next * d * det_factor));
    }
    let z = x.matmul(&gate)?.scale_columns(&ratios)?;
    z.ensure_finite("attention_equivalent output")?;
    Ok(z)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceConfig {
    pub tokens: usize,
    pub channels: usize,
    pub beta: f64,
    pub eps: f64,
    pub bias_b: f64,
    /// Enforce `μ_cᵀ Σ⁻¹ μ_c = 1`. Turning this off is the negative control.
    pub normalize_centers: bool,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self {
            tokens: 4,
            channels: 6,
            beta: 1.0,
            eps: 1e-6,
            bias_b: 1.0,
            normalize_centers: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceOutcome {
    pub seed: u64,
    pub kind: IbKind,
    pub deviation: f64,
}

pub fn equivalence_check(seed: u64, kind: IbKind) -> Result<EquivalenceOutcome> {
    equivalence_check_with(seed, kind, &EquivalenceConfig::default())
}

/// Builds a random instance with shared Σ and (optionally) unit-norm
/// centers, runs one clustering iterate and the attention form, and returns
/// the largest absolute difference between updated centers and `Z`.
pub fn equivalence_check_with(seed: u64, kind: IbKind, cfg: &EquivalenceConfig) -> Result<EquivalenceOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::from_fn(cfg.tokens, cfg.channels, |_, _| StandardNormal.sample(&mut rng));
    let problem = IbProblem::new(x, cfg.beta, cfg.eps, cfg.channels)?;
    let mut state = IbState::initial(&problem)?;
    if cfg.normalize_centers {
        state.normalize_centers()?;
    }
    let next = ib_iterate(&problem, &state, kind, cfg.bias_b)?;
    let z = attention_equivalent(problem.channels(), &state, cfg.beta, kind, cfg.bias_b)?;
    Ok(EquivalenceOutcome {
        seed,
        kind,
        deviation: next.centers().max_abs_diff(&z)?,
    })
}

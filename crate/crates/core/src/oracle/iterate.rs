use crate::error::{Error, Result};
use crate::tensor::{bilinear, sigmoid, Matrix};

use super::state::{IbKind, IbProblem, IbState};

pub const STOP_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;

/// Categorical step: `q(c|j) ∝ p(c) · exp(−β KL(j, c))`, normalized over
/// clusters, then priors and centers re-estimated as weighted means.
pub fn ib_iterate_categorical(problem: &IbProblem, state: &IbState) -> Result<IbState> {
    check_compatible(problem, state)?;
    let (k, d) = (state.num_clusters(), problem.num_channels());
    let beta = problem.beta();
    let mut q = Matrix::zeros(k, d);
    let mut logits = vec![0.0; k];
    for j in 0..d {
        let c_j = problem.channel(j);
        for (c, l) in logits.iter_mut().enumerate() {
            *l = state.priors()[c].ln() - beta * state.kl(&c_j, c);
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Underflow(format!("categorical assignment of channel {j}")));
        }
        let total: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        for (c, l) in logits.iter().enumerate() {
            q.set(c, j, (l - max).exp() / total);
        }
    }
    let masses = row_sums(&q);
    let priors = masses.iter().map(|n| n / d as f64).collect();
    let centers = weighted_centers(problem, state, &q, &masses);
    Ok(state.with_updates(priors, centers, q))
}

/// Bernoulli step: every (channel, cluster) association is an independent
/// two-state variable with "off" energy `b`. The "on" energy is the KL-based
/// score relative to a unit-norm center, which reduces to `β μ_cᵀ Σ⁻¹ c_j`
/// whenever `μ_cᵀ Σ⁻¹ μ_c = 1`. Gates carry the prior relative to the
/// largest prior, so uniform priors leave them unscaled.
pub fn ib_iterate_bernoulli(problem: &IbProblem, state: &IbState, bias_b: f64) -> Result<IbState> {
    check_compatible(problem, state)?;
    let (k, d) = (state.num_clusters(), problem.num_channels());
    let beta = problem.beta();
    let max_prior = state.priors().iter().copied().fold(0.0, f64::max);
    let mut q = Matrix::zeros(k, d);
    for j in 0..d {
        let c_j = problem.channel(j);
        let reference = 0.5 * (bilinear(&c_j, state.sigma_inv(), &c_j) + 1.0 + state.log_det());
        for c in 0..k {
            let energy = -beta * (state.kl(&c_j, c) - reference);
            if !energy.is_finite() {
                return Err(Error::Underflow(format!("Bernoulli gate of channel {j}, cluster {c}")));
            }
            q.set(c, j, state.priors()[c] / max_prior * sigmoid(energy - bias_b));
        }
    }
    let masses = row_sums(&q);
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Underflow("Bernoulli gates all vanished".into()));
    }
    let priors = masses.iter().map(|n| n / total).collect();
    let centers = weighted_centers(problem, state, &q, &masses);
    Ok(state.with_updates(priors, centers, q))
}

pub fn ib_iterate(problem: &IbProblem, state: &IbState, kind: IbKind, bias_b: f64) -> Result<IbState> {
    match kind {
        IbKind::Softmax => ib_iterate_categorical(problem, state),
        IbKind::Sigmoid => ib_iterate_bernoulli(problem, state, bias_b),
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointRun {
    pub state: IbState,
    pub iterations: usize,
    pub converged: bool,
    pub last_change: f64,
}

/// Iterates until the largest assignment change drops below 1e-8, or 100 steps.
pub fn run_to_fixed_point(
    problem: &IbProblem,
    state: IbState,
    kind: IbKind,
    bias_b: f64,
) -> Result<FixedPointRun> {
    let mut state = state;
    let mut last_change = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let next = ib_iterate(problem, &state, kind, bias_b)?;
        last_change = next.assignments().max_abs_diff(state.assignments())?;
        state = next;
        if last_change < STOP_TOLERANCE {
            return Ok(FixedPointRun {
                state,
                iterations: it,
                converged: true,
                last_change,
            });
        }
    }
    Ok(FixedPointRun {
        state,
        iterations: MAX_ITERATIONS,
        converged: false,
        last_change,
    })
}

fn check_compatible(problem: &IbProblem, state: &IbState) -> Result<()> {
    if state.centers().rows() != problem.tokens() || state.assignments().cols() != problem.num_channels() {
        return Err(Error::dim(
            "ib_iterate",
            problem.channels().shape(),
            state.centers().shape(),
        ));
    }
    if state.num_clusters() != problem.cluster_count() {
        return Err(Error::Shape(format!(
            "state has {} clusters, problem expects {}",
            state.num_clusters(),
            problem.cluster_count()
        )));
    }
    Ok(())
}

fn row_sums(q: &Matrix) -> Vec<f64> {
    (0..q.rows()).map(|c| q.row(c).iter().sum()).collect()
}

/// `μ_c = Σ_j q(c|j) c_j / n_c`; a cluster with zero mass keeps its center.
fn weighted_centers(problem: &IbProblem, state: &IbState, q: &Matrix, masses: &[f64]) -> Matrix {
    let x = problem.channels();
    let mut centers = state.centers().clone();
    for (c, &mass) in masses.iter().enumerate() {
        if mass <= 0.0 {
            continue;
        }
        for r in 0..x.rows() {
            let mut acc = 0.0;
            for j in 0..x.cols() {
                acc += q.get(c, j) * x.get(r, j);
            }
            centers.set(r, c, acc / mass);
        }
    }
    centers
}

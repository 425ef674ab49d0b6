use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{bilinear, Cholesky, Matrix};

pub const COVARIANCE_RIDGE: f64 = 1e-6;

/// Latent structure of the assignments, which fixes the normalizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IbKind {
    /// Each channel belongs to exactly one cluster (softmax over clusters).
    Softmax,
    /// Every channel-cluster association is an independent Bernoulli (sigmoid).
    Sigmoid,
}

impl std::str::FromStr for IbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" | "categorical" => Ok(Self::Softmax),
            "sigmoid" | "bernoulli" => Ok(Self::Sigmoid),
            other => Err(Error::InvalidParam(format!(
                "unknown kind `{other}`, expected softmax or sigmoid"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct IbProblem {
    channels: Matrix,
    beta: f64,
    eps: f64,
    cluster_count: usize,
}

impl IbProblem {
    /// `channels` is N x D; column j is the observation `c_j`.
    pub fn new(channels: Matrix, beta: f64, eps: f64, cluster_count: usize) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParam(format!("beta must be positive, got {beta}")));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParam(format!("eps must be positive, got {eps}")));
        }
        if cluster_count == 0 {
            return Err(Error::InvalidParam("cluster_count must be positive".into()));
        }
        channels.ensure_finite("IbProblem channels")?;
        Ok(Self {
            channels,
            beta,
            eps,
            cluster_count,
        })
    }

    pub fn channels(&self) -> &Matrix {
        &self.channels
    }

    pub fn channel(&self, j: usize) -> Vec<f64> {
        self.channels.column(j)
    }

    /// Observation length N.
    pub fn tokens(&self) -> usize {
        self.channels.rows()
    }

    /// Number of channels D.
    pub fn num_channels(&self) -> usize {
        self.channels.cols()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.channels.clone(), beta, self.eps, self.cluster_count)
    }
}

/// `(1/D) Σ_j (c_j − c̄)(c_j − c̄)ᵀ + ridge · I`, an N x N matrix.
pub fn empirical_channel_covariance(channels: &Matrix, ridge: f64) -> Matrix {
    let (n, d) = channels.shape();
    let mean: Vec<f64> = (0..n).map(|r| channels.row(r).iter().sum::<f64>() / d as f64).collect();
    let mut cov = Matrix::zeros(n, n);
    for j in 0..d {
        for a in 0..n {
            let da = channels.get(a, j) - mean[a];
            for b in 0..n {
                let db = channels.get(b, j) - mean[b];
                cov.set(a, b, cov.get(a, b) + da * db / d as f64);
            }
        }
    }
    for i in 0..n {
        cov.set(i, i, cov.get(i, i) + ridge);
    }
    cov
}

#[derive(Clone, Debug)]
pub struct IbState {
    priors: Vec<f64>,
    /// N x K, column c is `μ_c`.
    centers: Matrix,
    sigma: Matrix,
    sigma_inv: Matrix,
    log_det: f64,
    /// K x D, entry (c, j) is `q(c|j)`.
    assignments: Matrix,
}

impl IbState {
    pub fn new(priors: Vec<f64>, centers: Matrix, sigma: Matrix, assignments: Matrix) -> Result<Self> {
        let k = priors.len();
        if centers.cols() != k || assignments.rows() != k {
            return Err(Error::Shape(format!(
                "{k} priors, {} centers, {} assignment rows",
                centers.cols(),
                assignments.rows()
            )));
        }
        if sigma.shape() != (centers.rows(), centers.rows()) {
            return Err(Error::dim("IbState sigma", sigma.shape(), centers.shape()));
        }
        if priors.iter().any(|p| !(*p >= 0.0)) || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam("priors must be nonnegative and sum to 1".into()));
        }
        let chol = Cholesky::new(&sigma)?;
        Ok(Self {
            priors,
            centers,
            sigma_inv: chol.inverse(),
            log_det: chol.log_det(),
            sigma,
            assignments,
        })
    }

    /// Uniform priors, centers equal to the channels themselves, Σ the
    /// empirical channel covariance plus a 1e-6 ridge, assignments equal to
    /// the priors.
    pub fn initial(problem: &IbProblem) -> Result<Self> {
        let k = problem.cluster_count();
        let d = problem.num_channels();
        if k != d {
            return Err(Error::InvalidParam(format!(
                "channel-seeded initialization needs cluster_count == D ({k} != {d})"
            )));
        }
        let sigma = empirical_channel_covariance(problem.channels(), COVARIANCE_RIDGE);
        let uniform = 1.0 / k as f64;
        Self::new(
            vec![uniform; k],
            problem.channels().clone(),
            sigma,
            Matrix::filled(k, d, uniform),
        )
    }

    /// Rescales every center so that `μ_cᵀ Σ⁻¹ μ_c = 1`.
    pub fn normalize_centers(&mut self) -> Result<()> {
        for c in 0..self.centers.cols() {
            let mu = self.centers.column(c);
            let norm = bilinear(&mu, &self.sigma_inv, &mu);
            if !(norm > 0.0) {
                return Err(Error::InvalidParam(format!("center {c} has zero Mahalanobis norm")));
            }
            let s = 1.0 / norm.sqrt();
            for (r, v) in mu.iter().enumerate() {
                self.centers.set(r, c, v * s);
            }
        }
        Ok(())
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Cluster masses `n_c = D · p(c)`.
    pub fn masses(&self) -> Vec<f64> {
        let d = self.assignments.cols() as f64;
        self.priors.iter().map(|p| p * d).collect()
    }

    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    pub fn center(&self, c: usize) -> Vec<f64> {
        self.centers.column(c)
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &Matrix {
        &self.sigma_inv
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn assignments(&self) -> &Matrix {
        &self.assignments
    }

    pub fn num_clusters(&self) -> usize {
        self.priors.len()
    }

    /// `μ_cᵀ Σ⁻¹ μ_c` for every center.
    pub fn center_norms(&self) -> Vec<f64> {
        (0..self.num_clusters())
            .map(|c| {
                let mu = self.center(c);
                bilinear(&mu, &self.sigma_inv, &mu)
            })
            .collect()
    }

    /// Small-ε KL between channel `x` and cluster `c`, using the cached Σ⁻¹.
    pub fn kl(&self, x: &[f64], c: usize) -> f64 {
        let diff: Vec<f64> = x.iter().zip(self.center(c)).map(|(a, b)| a - b).collect();
        0.5 * (bilinear(&diff, &self.sigma_inv, &diff) + self.log_det)
    }

    pub(crate) fn with_updates(&self, priors: Vec<f64>, centers: Matrix, assignments: Matrix) -> Self {
        Self {
            priors,
            centers,
            sigma: self.sigma.clone(),
            sigma_inv: self.sigma_inv.clone(),
            log_det: self.log_det,
            assignments,
        }
    }
}

/// `½[(c − μ)ᵀ Σ⁻¹ (c − μ) + log|Σ|]`, the ε → 0 KL with constants dropped.
pub fn kl_gaussian_limit(c_j: &[f64], mu_c: &[f64], sigma: &Matrix) -> Result<f64> {
    if c_j.len() != mu_c.len() || sigma.shape() != (c_j.len(), c_j.len()) {
        return Err(Error::dim("kl_gaussian_limit", (c_j.len(), mu_c.len()), sigma.shape()));
    }
    let chol = Cholesky::new(sigma)?;
    let diff: Vec<f64> = c_j.iter().zip(mu_c).map(|(a, b)| a - b).collect();
    let solved = chol.solve_vec(&diff);
    let maha: f64 = diff.iter().zip(&solved).map(|(a, b)| a * b).sum();
    Ok(0.5 * (maha + chol.log_det()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_examples() {
        let eye = Matrix::identity(2);
        assert_eq!(kl_gaussian_limit(&[0.3, -1.0], &[0.3, -1.0], &eye).unwrap(), 0.0);
        assert_eq!(kl_gaussian_limit(&[1.0, 0.0], &[0.0, 0.0], &eye).unwrap(), 0.5);
    }

    #[test]
    fn kl_rejects_non_spd() {
        let bad = Matrix::from_rows(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap();
        assert!(kl_gaussian_limit(&[1.0, 0.0], &[0.0, 0.0], &bad).is_err());
    }

    #[test]
    fn problem_validation() {
        let x = Matrix::identity(2);
        assert!(IbProblem::new(x.clone(), 0.0, 1e-3, 2).is_err());
        assert!(IbProblem::new(x.clone(), 1.0, -1.0, 2).is_err());
        assert!(IbProblem::new(x, 1.0, 1e-3, 2).is_ok());
    }

    #[test]
    fn normalized_centers_have_unit_norm() {
        let x = Matrix::from_rows(&[
            vec![1.0, 0.2, -0.5, 0.3],
            vec![0.1, 1.5, 0.4, -0.7],
            vec![-0.3, 0.6, 1.1, 0.2],
        ])
        .unwrap();
        let problem = IbProblem::new(x, 1.0, 1e-3, 4).unwrap();
        let mut state = IbState::initial(&problem).unwrap();
        state.normalize_centers().unwrap();
        for n in state.center_norms() {
            assert!((n - 1.0).abs() < 1e-10);
        }
    }
}

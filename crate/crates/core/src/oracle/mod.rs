//! Iterative information-bottleneck clustering of feature channels.
//!
//! Each channel `c_j` (a column of the N x D token matrix) is a data point;
//! clusters carry a prior `p(c)`, a center `μ_c` and a covariance `Σ` shared
//! by all clusters. One iterate recomputes soft assignments from the
//! small-ε Gaussian KL and then re-estimates priors and centers as weighted
//! means. [`attention_equivalent`] computes the same updated centers as a
//! channel-attention product `V · norm(β QᵀK)`, and [`equivalence_check`]
//! measures how far apart the two routes land.

mod equivalence;
mod iterate;
mod state;

pub use equivalence::{
    attention_equivalent, equivalence_check, equivalence_check_with, EquivalenceConfig,
    EquivalenceOutcome,
};
pub use iterate::{
    ib_iterate, ib_iterate_bernoulli, ib_iterate_categorical, run_to_fixed_point, FixedPointRun,
    MAX_ITERATIONS, STOP_TOLERANCE,
};
pub use state::{empirical_channel_covariance, kl_gaussian_limit, IbKind, IbProblem, IbState, COVARIANCE_RIDGE};

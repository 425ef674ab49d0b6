//! Toy-scene robustness harness: synthetic scenes, a frozen patch encoder,
//! clean-only training of MLP / covariance-gated / fused projectors, and a
//! corruption-grid evaluation with feature-consistency and grouping metrics.

pub mod encoder;
pub mod eval;
pub mod metrics;
pub mod model;
pub mod report;
pub mod scene;
pub mod store;
pub mod train;

pub use encoder::FrozenEncoder;
pub use eval::{evaluate, evaluate_grid, random_feature_null, CellSpec, EvalConfig};
pub use metrics::{feature_consistency, kmeans2_grouping, Grouping};
pub use model::{Classifier, ModelKind};
pub use report::{compare_reports, Comparison, RobustnessReport};
pub use scene::{make_toy_dataset, ToyScene};
pub use store::{load_model, save_model};
pub use train::{train, train_policy, TrainConfig, TrainOutcome};

/// Environment variable capping worker threads (0 or unset = automatic).
pub const THREADS_ENV: &str = "IBKIT_THREADS";

/// `requested` if nonzero, else `IBKIT_THREADS` if set and nonzero, else the
/// available parallelism.
pub fn resolve_threads(requested: usize) -> usize {
    if requested > 0 {
        return requested;
    }
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

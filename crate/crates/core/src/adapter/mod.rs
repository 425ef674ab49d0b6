//! Channel-covariance gating adapter, its fused dual-pathway variant,
//! checkpoint persistence and gradient self-checks.

pub mod checkpoint;
mod fused;
mod heads;
mod ib;
mod verify;

pub use fused::{
    draw_drop, fused_backward, fused_forward, fused_forward_with, mlp_backward, mlp_forward, FusedCache, FusedIbAdapter,
    FusedParams, MlpCache, MlpParams, Mode, DEFAULT_LAMBDA, DEFAULT_P_DROP, HIDDEN_RATIO,
};
pub use heads::{merge_heads, partition_heads};
pub use ib::{
    covariance_gram, ib_adapter_backward, ib_adapter_forward, sigmoid_gate, value_transform,
    HeadParams, IbAdapterParams, IbCache, INIT_GATE_BIAS, INIT_STD,
};
pub use verify::{
    fused_gradcheck, noise_channel_suppression, FusedGradCheck, FusedGradCheckConfig, SuppressionOutcome,
};

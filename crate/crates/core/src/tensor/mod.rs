//! Dense matrices, activation kernels, gradient bookkeeping and the
//! finite-difference gradient checker.

mod gradcheck;
pub mod io;
mod kernels;
mod linalg;
mod matrix;
mod param;

pub use gradcheck::{finite_diff_gradcheck, GradCheckReport, SlotCheck};
pub use kernels::{
    activate, gelu, gelu_grad, layer_norm, layer_norm_backward, layer_norm_cached, normal_cdf,
    normal_pdf, sigmoid, sigmoid_grad, softmax_in_place, softmax_rows, tanh_grad, Activation,
    LayerNormCache, LAYER_NORM_EPS,
};
pub use linalg::{bilinear, Cholesky};
pub use matrix::Matrix;
pub use param::{ParamCollection, ParamSlot};

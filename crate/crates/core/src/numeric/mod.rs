//! Deterministic 64-bit tensor, layer and optimizer substrate.
//!
//! There is no tape: each layer exposes `forward` returning a cache and a
//! matching `backward` that accumulates parameter gradients into the
//! [`ParamStore`] and returns the input gradient.

pub mod attention;
pub mod gradcheck;
pub mod layers;
pub mod moe;
pub mod optim;
pub mod params;
pub mod resample;
pub mod rng;
pub mod scan;
pub mod tensor;

pub use attention::{AttentionCache, AttentionLayer};
pub use gradcheck::{finite_diff_check, GradCheckConfig, GradCheckReport};
pub use layers::{
    dropout, dropout_backward, layer_norm, linear, log_sum_exp, log_softmax_rows, log_softmax_rows_backward,
    relu, relu_backward, sigmoid, sigmoid_backward, sigmoid_scalar, softmax_rows, softmax_slice, softmax_rows_backward, LayerNorm, Linear,
};
pub use moe::{MoeCache, MoeLayer};
pub use optim::{AdamW, AdamWConfig, PlateauConfig, PlateauScheduler};
pub use params::{Init, ParamId, ParamStore, Parameter};
pub use resample::{linear_resample, ResamplePlan};
pub use rng::RngStream;
pub use scan::{selective_scan, selective_scan_backward, selective_scan_with_state, ScanBlock};
pub use tensor::Tensor;

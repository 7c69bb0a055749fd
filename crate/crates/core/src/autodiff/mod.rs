//! Minimal reverse-mode automatic differentiation.
//!
//! Only the operations the separator needs are provided. The central one is
//! [`Graph::conv1d_frac`], a 1-D convolution whose dilation rate is a
//! continuous value: taps read the input at fractional positions through
//! linear interpolation, so the output is differentiable in the dilation
//! (piecewise linearly, with kinks where a tap position crosses an integer).
//! At integer dilations it is exactly an ordinary dilated convolution.

mod adam;
mod conv;
mod gradcheck;
mod graph;
mod tensor;

use thiserror::Error;

pub use adam::{AdamConfig, AdamState, ParamRef};
pub use conv::PaddingPolicy;
pub use gradcheck::{grad_check, relative_error, GradCheckReport, InputReport, FD_STEP};
pub use graph::{Graph, NodeId};
pub use tensor::{DilationParam, Tensor, D_MIN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: &'static str },
    #[error("{op}: expected a rank-{expected} tensor, got shape {shape:?}")]
    RankMismatch {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: kernel expects {found} input channels but the input has {expected}")]
    ChannelMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("kernel must have an odd number of taps, got {taps}")]
    EvenKernel { taps: usize },
    #[error("{op}: non-finite values in {what}")]
    NonFinite { op: &'static str, what: &'static str },
    #[error("dilation {value} is outside the valid range")]
    InvalidDilation { value: f64 },
    #[error("expected a scalar, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("mse_loss target must not require gradients")]
    TargetRequiresGrad,
    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },
    #[error("optimizer state does not match the parameter set")]
    OptimizerStateMismatch,
}

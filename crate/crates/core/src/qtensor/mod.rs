//! Quantized tensors and the integer-only golden reference.
//!
//! Everything the dataflow mapping produces is checked against the functions
//! in this module: [`conv2d_ref`] computes the 32-bit accumulator tensor and
//! [`requantize_tensor`] folds it back into int8 with the fixed-point
//! multiplier/shift scheme.
//!
//! Layout conventions:
//! - activations are channel-last, `(H, W, C)` row-major;
//! - weights are `(K, R, S, C)` row-major with a symmetric (zero-point 0)
//!   per-output-channel quantization.

mod conv;
mod requant;
mod tensor;

pub use conv::{conv2d_ref, AccTensor, ConvLayerSpec, KernelDims, PadGeometry, Padding};
pub use requant::{
    compute_requant_params, requantize, requantize_tensor, requantize_unclamped, rounding_shift, Multiplier,
    RequantParams,
};
pub use tensor::{dequantize, quantize, BiasVector, Dims3, QuantizedTensor, WeightTensor};

use thiserror::Error;

/// Errors raised by the quantized reference model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantError {
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("accumulator overflow at output (y={y}, x={x}, k={k})")]
    AccumulatorOverflow { y: usize, x: usize, k: usize },
    #[error("unsupported multiplier {value} for channel {channel}: must lie in (0, 1) and be representable with shift <= 31")]
    UnsupportedMultiplier { channel: usize, value: f64 },
    #[error("invalid requantization parameters for channel {channel}: {reason}")]
    InvalidRequant { channel: usize, reason: String },
    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),
}

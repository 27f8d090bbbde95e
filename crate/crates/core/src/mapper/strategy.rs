use std::fmt;

use crate::arch::ArrayDims;
use crate::qtensor::ConvLayerSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    /// 1x1 kernels: the input stream is one linear walk per output row band.
    Spatial1x1,
    /// 3x3 stride 1: one input descriptor per output row, each walking the
    /// three-row band that row needs.
    LineBuffer3x3,
    /// Anything else: one descriptor over the whole output.
    TiledGeneric,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Spatial1x1 => "spatial_1x1",
            StrategyKind::LineBuffer3x3 => "line_buffer_3x3",
            StrategyKind::TiledGeneric => "tiled_generic",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MappingStrategy {
    pub kind: StrategyKind,
    /// Output channels computed concurrently in one pass.
    pub t_k: usize,
    /// Output rows per input descriptor; 0 means the whole image.
    pub t_y: usize,
}

/// ALUs per output channel: mac, four requant stages and one address
/// distribution element.
pub const ALUS_PER_CHANNEL: usize = 6;
/// Zero-point subtract and address counter.
pub const SHARED_ALUS: usize = 2;

/// Largest channel tile the array can hold.
pub fn channel_budget(dims: &ArrayDims) -> usize {
    (dims.alu_slots().saturating_sub(SHARED_ALUS) / ALUS_PER_CHANNEL).min(dims.ram_slots())
}

/// Deterministic strategy choice; rule order breaks ties.
pub fn choose_strategy(spec: &ConvLayerSpec, dims: &ArrayDims) -> MappingStrategy {
    let t_k = spec.kernel.k.min(channel_budget(dims));
    let (r, s) = (spec.kernel.r, spec.kernel.s);
    if r == 1 && s == 1 {
        MappingStrategy { kind: StrategyKind::Spatial1x1, t_k, t_y: 0 }
    } else if r == 3 && s == 3 && spec.stride == 1 {
        MappingStrategy { kind: StrategyKind::LineBuffer3x3, t_k, t_y: 1 }
    } else {
        MappingStrategy { kind: StrategyKind::TiledGeneric, t_k, t_y: 0 }
    }
}

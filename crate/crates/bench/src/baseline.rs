//! Cost model for a scalar processor running the same layer.

use xppsim::arch::DEFAULT_CLOCK_HZ;
use xppsim::qtensor::{ConvLayerSpec, Dims3, KernelDims, Padding};

use crate::suite::{ReferenceRow, REFERENCE_LAYERS};

/// `macs * cpi / clock`, in milliseconds.
pub fn baseline_ms(macs: u64, cpi: f64, clock_hz: u64) -> f64 {
    macs as f64 * cpi / clock_hz as f64 * 1e3
}

pub fn scalar_baseline(spec: &ConvLayerSpec, cpi: f64) -> f64 {
    baseline_ms(spec.macs(), cpi, DEFAULT_CLOCK_HZ)
}

/// MAC count of a published row with its image taken as a same-padded
/// stride-1 input.
pub fn row_macs(row: &ReferenceRow) -> u64 {
    same_padded_macs(row.kernel, row.image)
}

pub fn same_padded_macs(kernel: KernelDims, image: Dims3) -> u64 {
    (image.h * image.w) as u64 * kernel.k as u64 * kernel.taps() as u64
}

/// Cycles per MAC implied by one row's published scalar latency.
pub fn row_cpi(row: &ReferenceRow) -> f64 {
    row.latency.gr740_ms * 1e-3 * DEFAULT_CLOCK_HZ as f64 / row_macs(row) as f64
}

/// Mean of the per-row CPIs over the three 3x3 rows.
pub fn calibrated_cpi() -> f64 {
    let rows: Vec<&ReferenceRow> = REFERENCE_LAYERS.iter().filter(|r| r.kernel.r == 3 && r.kernel.s == 3).collect();
    rows.iter().map(|r| row_cpi(r)).sum::<f64>() / rows.len() as f64
}

/// A full-size published row as a layer spec, for the baseline only.
pub fn row_spec(row: &ReferenceRow) -> ConvLayerSpec {
    use xppsim::qtensor::{BiasVector, Multiplier, RequantParams};
    ConvLayerSpec {
        input: row.image,
        kernel: row.kernel,
        stride: 1,
        padding: Padding::Same,
        z_in: 0,
        requant: RequantParams::uniform(row.kernel.k, Multiplier::new(1 << 30, 0), 0),
        bias: BiasVector::zeros(row.kernel.k),
    }
}

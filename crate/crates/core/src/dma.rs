//! Four-level strided DMA descriptors.
//!
//! A descriptor walks `base + i3*s3 + i2*s2 + i1*s1 + i0*s0` with the
//! innermost index `i0` running fastest. Levels are stored outermost first
//! (`l3, l2, l1, l0`), matching the textual form
//! `dma base=<n> l3=<c>:<s> l2=<c>:<s> l1=<c>:<s> l0=<c>:<s>`.
//!
//! Addresses are in 32-bit word units. Strides may be negative (reverse
//! walks) or zero (broadcast).

use std::fmt;
use std::ops::Range;

use thiserror::Error;

use crate::qtensor::ConvLayerSpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DmaError {
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("address {address} outside region [{}, {}) at indices l3={} l2={} l1={} l0={}",
        region.start, region.end, indices[0], indices[1], indices[2], indices[3])]
    OutOfBounds { address: i128, indices: [u32; 4], region: Range<u64> },
    #[error("tile does not fit the layer: {0}")]
    TileMismatch(String),
}

/// One loop level: `count` iterations advancing by `stride` words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DmaLevel {
    pub count: u32,
    pub stride: i64,
}

impl DmaLevel {
    pub const UNIT: DmaLevel = DmaLevel { count: 1, stride: 0 };

    pub const fn new(count: u32, stride: i64) -> Self {
        Self { count, stride }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dma4dDescriptor {
    pub base: u64,
    /// `[l3, l2, l1, l0]`, outermost first.
    pub levels: [DmaLevel; 4],
}

impl Dma4dDescriptor {
    pub fn new(base: u64, levels: [(u32, i64); 4]) -> Result<Self, DmaError> {
        let d = Self { base, levels: levels.map(|(c, s)| DmaLevel::new(c, s)) };
        d.check_counts()?;
        Ok(d)
    }

    /// `count` contiguous words starting at `base`.
    pub fn linear(base: u64, count: u32) -> Self {
        Self { base, levels: [DmaLevel::UNIT, DmaLevel::UNIT, DmaLevel::UNIT, DmaLevel::new(count, 1)] }
    }

    fn check_counts(&self) -> Result<(), DmaError> {
        if let Some(i) = self.levels.iter().position(|l| l.count == 0) {
            return Err(DmaError::InvalidDescriptor(format!("level l{} has count 0", 3 - i)));
        }
        Ok(())
    }

    /// Number of addresses generated: the product of the four counts.
    pub fn len(&self) -> u64 {
        self.levels.iter().map(|l| u64::from(l.count)).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn address_at(&self, idx: [u32; 4]) -> i128 {
        self.levels
            .iter()
            .zip(idx)
            .fold(i128::from(self.base), |acc, (l, i)| acc + i128::from(i) * i128::from(l.stride))
    }

    /// Lazily generate the address stream, checking each address against
    /// `region`. The stream ends after the first out-of-bounds address.
    pub fn addresses(&self, region: Range<u64>) -> AddressStream<'_> {
        AddressStream { desc: self, region, idx: [0; 4], done: self.check_counts().is_err(), failed: false }
    }

    /// Raw, unchecked addresses (may be negative).
    pub fn raw_addresses(&self) -> impl Iterator<Item = i128> + '_ {
        let [l3, l2, l1, l0] = self.levels;
        (0..l3.count).flat_map(move |i3| {
            (0..l2.count).flat_map(move |i2| {
                (0..l1.count).flat_map(move |i1| (0..l0.count).map(move |i0| self.address_at([i3, i2, i1, i0])))
            })
        })
    }

    /// Analytic `(min, max)` over the whole stream, with the loop indices
    /// that reach each extreme. No enumeration.
    pub fn bounds(&self) -> ((i128, [u32; 4]), (i128, [u32; 4])) {
        let mut lo = (i128::from(self.base), [0u32; 4]);
        let mut hi = lo;
        for (i, l) in self.levels.iter().enumerate() {
            let span = i128::from(l.count - 1) * i128::from(l.stride);
            if span < 0 {
                lo.0 += span;
                lo.1[i] = l.count - 1;
            } else {
                hi.0 += span;
                hi.1[i] = l.count - 1;
            }
        }
        (lo, hi)
    }

    /// Check that every generated address falls inside `region`.
    pub fn validate(&self, region: &Range<u64>) -> Result<(), DmaError> {
        self.check_counts()?;
        let ((min, min_idx), (max, max_idx)) = self.bounds();
        if min < i128::from(region.start) {
            return Err(DmaError::OutOfBounds { address: min, indices: min_idx, region: region.clone() });
        }
        if max >= i128::from(region.end) {
            return Err(DmaError::OutOfBounds { address: max, indices: max_idx, region: region.clone() });
        }
        Ok(())
    }
}

impl fmt::Display for Dma4dDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dma base={}", self.base)?;
        for (i, l) in self.levels.iter().enumerate() {
            write!(f, " l{}={}:{}", 3 - i, l.count, l.stride)?;
        }
        Ok(())
    }
}

/// Iterator returned by [`Dma4dDescriptor::addresses`].
#[derive(Debug, Clone)]
pub struct AddressStream<'a> {
    desc: &'a Dma4dDescriptor,
    region: Range<u64>,
    idx: [u32; 4],
    done: bool,
    failed: bool,
}

impl Iterator for AddressStream<'_> {
    type Item = Result<u64, DmaError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done || self.failed {
            return None;
        }
        let idx = self.idx;
        let address = self.desc.address_at(idx);
        // odometer increment, innermost first
        let mut level = 3;
        loop {
            self.idx[level] += 1;
            if self.idx[level] < self.desc.levels[level].count {
                break;
            }
            self.idx[level] = 0;
            if level == 0 {
                self.done = true;
                break;
            }
            level -= 1;
        }
        if address < i128::from(self.region.start) || address >= i128::from(self.region.end) {
            self.failed = true;
            return Some(Err(DmaError::OutOfBounds { address, indices: idx, region: self.region.clone() }));
        }
        Some(Ok(address as u64))
    }
}

/// A band of output rows handled by one group of input descriptors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvTile {
    /// Output rows covered.
    pub out_rows: Range<usize>,
    /// Output rows per emitted descriptor; `0` means one descriptor for the
    /// whole band.
    pub rows_per_descriptor: usize,
}

impl ConvTile {
    pub fn full(spec: &ConvLayerSpec) -> Self {
        Self { out_rows: 0..spec.output_dims().h, rows_per_descriptor: 0 }
    }
}

/// Input-activation descriptors for a convolution, addressing the padded
/// input buffer (`ConvLayerSpec::padded_input`, channel-last).
///
/// The concatenated stream visits words in the mapped kernel's consumption
/// order: output row, output col, kernel row, kernel col, channel. Kernel col
/// and channel are contiguous in memory, so they share the innermost level.
pub fn conv_input_descriptors(spec: &ConvLayerSpec, tile: &ConvTile) -> Result<Vec<Dma4dDescriptor>, DmaError> {
    let out = spec.output_dims();
    let padded = spec.padded_input();
    if tile.out_rows.start >= tile.out_rows.end || tile.out_rows.end > out.h {
        return Err(DmaError::TileMismatch(format!("rows {:?} outside output height {}", tile.out_rows, out.h)));
    }
    let row_words = (padded.w * padded.c) as i64;
    let c = padded.c as i64;
    let stride = spec.stride as i64;
    let band = tile.out_rows.len();
    let step = if tile.rows_per_descriptor == 0 { band } else { tile.rows_per_descriptor.min(band) };
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| DmaError::TileMismatch(format!("count {v} exceeds 32 bits")));

    let mut out_descs = Vec::new();
    let mut y = tile.out_rows.start;
    while y < tile.out_rows.end {
        let rows = step.min(tile.out_rows.end - y);
        let base = (y as i64 * stride * row_words) as u64;
        out_descs.push(Dma4dDescriptor {
            base,
            levels: [
                DmaLevel::new(to_u32(rows)?, stride * row_words),
                DmaLevel::new(to_u32(out.w)?, stride * c),
                DmaLevel::new(to_u32(spec.kernel.r)?, row_words),
                DmaLevel::new(to_u32(spec.kernel.s * spec.kernel.c)?, 1),
            ],
        });
        y += rows;
    }
    let region = 0..padded.len() as u64;
    for d in &out_descs {
        d.validate(&region)?;
    }
    Ok(out_descs)
}

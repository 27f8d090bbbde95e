//! Maps a quantized convolution with fused re-quantization onto the array.
//!
//! One pass computes `T` output channels. Per channel `j`:
//!
//! ```text
//! X ─▶ SUB(z_in) ─▶ MAC0 ─fwd─▶ MAC1 ─fwd─▶ …          (activations, systolic)
//! CNT(mod N+1) ─▶ D0 ─▶ D1 ─▶ … ─▶ D(T-1)             (addresses; last is a route)
//!                 │     └──▶ Wj.addr ─▶ Wj.dout ─▶ MACj.in1   (bias, then N weights)
//! MACj.out0 ─▶ MULj(M0) ─lo,hi─▶ SHRj(31+n) ─▶ ADDj(z_out) ─▶ CLPj(-128,127) ─▶ Yj
//! ```
//!
//! Each RAM holds `[bias_k, w_k(r,s,c)...]`; the counter sweeps addresses
//! `0..=N` once per output pixel so each mac sees its bias and then its
//! weights in input-stream order. The high/low multiply pair keeps the full
//! 64-bit product so the shift rounds exactly like the scalar reference.

mod estimate;
mod strategy;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use estimate::{critical_path, estimate_cycles, resource_report};
pub use strategy::{channel_budget, choose_strategy, MappingStrategy, StrategyKind, ALUS_PER_CHANNEL, SHARED_ALUS};

use crate::arch::{ArrayDims, Opcode};
use crate::config::{validate, AluPae, ArrayConfig, PortRef, Preload, RamMode, RamPae, RamSide, StreamPort};
use crate::dma::{conv_input_descriptors, ConvTile, Dma4dDescriptor, DmaError};
use crate::memory::{MemSpace, SpacedDma};
use crate::qtensor::{ConvLayerSpec, Dims3, QuantError};

/// Largest supported kernel extent.
pub const MAX_KERNEL: usize = 7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error(transparent)]
    Spec(#[from] QuantError),
    #[error("unsupported geometry: {0}")]
    Unsupported(String),
    #[error("layer needs {required_alu} ALU and {required_ram} RAM elements at minimal tiling, array has {available_alu} ALU and {available_ram} RAM")]
    Resource { required_alu: usize, available_alu: usize, required_ram: usize, available_ram: usize },
    #[error("kernel needs {required} RAM words per channel, capacity is {capacity}")]
    RamCapacity { required: u64, capacity: u32 },
    #[error("{0} does not fit the 32-bit counter range")]
    TooLarge(String),
    #[error(transparent)]
    Dma(#[from] DmaError),
    #[error("generated configuration failed validation: {0}")]
    Internal(String),
}

/// Which output stream carries which output channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub pass: usize,
    pub stream: String,
    pub channel: usize,
}

/// Every output stream delivers one channel in raster order (`y`, then `x`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputLayout {
    pub dims: Dims3,
    pub entries: Vec<OutputEntry>,
}

impl OutputLayout {
    /// Packets each output stream produces.
    pub fn words_per_stream(&self) -> usize {
        self.dims.h * self.dims.w
    }

    /// True if every channel appears exactly once.
    pub fn covers_exactly_once(&self) -> bool {
        let mut seen = vec![0u32; self.dims.c];
        for e in &self.entries {
            match seen.get_mut(e.channel) {
                Some(n) => *n += 1,
                None => return false,
            }
        }
        seen.iter().all(|&n| n == 1)
    }

    /// Walk placing channel `k`'s stream at `(y + top, x + left, k)` of a
    /// channel-last buffer with row width `target.w` and `target.c` channels.
    pub fn descriptor_into(&self, channel: usize, target: Dims3, top: usize, left: usize) -> Dma4dDescriptor {
        let row = (target.w * target.c) as i64;
        Dma4dDescriptor {
            base: ((top * target.w + left) * target.c + channel) as u64,
            levels: [
                crate::dma::DmaLevel::UNIT,
                crate::dma::DmaLevel::UNIT,
                crate::dma::DmaLevel::new(self.dims.h as u32, row),
                crate::dma::DmaLevel::new(self.dims.w as u32, target.c as i64),
            ],
        }
    }

    /// Walk into an unpadded `(H, W, K)` output buffer.
    pub fn output_descriptor(&self, channel: usize) -> Dma4dDescriptor {
        self.descriptor_into(channel, self.dims, 0, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceSummary {
    /// Largest per-pass usage.
    pub alu_used: usize,
    pub alu_available: usize,
    pub ram_used: usize,
    pub ram_available: usize,
    pub ram_words_used: u64,
    /// Longest element path in PAEs, over all passes.
    pub critical_path: usize,
    pub passes: usize,
}

/// One array configuration and the data it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedPass {
    pub config: ArrayConfig,
    pub channels: Range<usize>,
    /// Name of the input stream and its activation walks.
    pub input_stream: String,
    pub input: Vec<SpacedDma>,
    pub weights: Vec<SpacedDma>,
    pub bias: Vec<SpacedDma>,
    /// Input packets per cycle in steady state, as `(packets, cycles)`.
    pub initiation: (u64, u64),
    pub fill: usize,
}

impl MappedPass {
    pub fn input_packets(&self) -> u64 {
        self.input.iter().map(|d| d.desc.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappedKernel {
    pub strategy: MappingStrategy,
    pub passes: Vec<MappedPass>,
    pub output: OutputLayout,
    /// Extent of the `act` buffer the input walks address.
    pub input_buffer: Dims3,
    pub resources: ResourceSummary,
    pub estimate: u64,
}

impl MappedKernel {
    pub fn configs(&self) -> impl Iterator<Item = &ArrayConfig> {
        self.passes.iter().map(|p| &p.config)
    }

    /// A chain of `len` route PAEs carrying `packets` words from `act` to
    /// `out`, used to check the estimator against the latency model.
    pub fn passthrough(len: usize, packets: u32, dims: ArrayDims) -> Result<MappedKernel, MapError> {
        if len == 0 || len > dims.alu_slots() {
            return Err(MapError::Resource {
                required_alu: len,
                available_alu: dims.alu_slots(),
                required_ram: 0,
                available_ram: dims.ram_slots(),
            });
        }
        let mut config = ArrayConfig::new(dims);
        config.name = format!("passthrough_{len}");
        for i in 0..len {
            let (row, col) = cell(i, &dims);
            config.alus.push(AluPae::new(format!("R{i}"), (row, col), Opcode::Route).with_ports(&["w0"], &["e0"]));
            if i > 0 {
                config.connect((&format!("R{}", i - 1), "e0"), (&format!("R{i}"), "w0"));
            }
        }
        let input = vec![SpacedDma { space: MemSpace::Act, desc: Dma4dDescriptor::linear(0, packets) }];
        let mut x = StreamPort::input("X", PortRef::new("R0", "w0"));
        x.dma = input.clone();
        let mut y = StreamPort::output("Y0", PortRef::new(format!("R{}", len - 1), "e0"));
        y.dma = vec![SpacedDma { space: MemSpace::Out, desc: Dma4dDescriptor::linear(0, packets) }];
        config.streams = vec![x, y];
        let fill = critical_path(&config);
        let pass = MappedPass {
            config,
            channels: 0..1,
            input_stream: "X".into(),
            input,
            weights: vec![],
            bias: vec![],
            initiation: (1, 1),
            fill,
        };
        let output = OutputLayout {
            dims: Dims3::new(1, packets as usize, 1),
            entries: vec![OutputEntry { pass: 0, stream: "Y0".into(), channel: 0 }],
        };
        finish(
            MappingStrategy { kind: StrategyKind::TiledGeneric, t_k: 1, t_y: 0 },
            vec![pass],
            output,
            Dims3::new(1, packets as usize, 1),
        )
    }
}

fn finish(
    strategy: MappingStrategy,
    passes: Vec<MappedPass>,
    output: OutputLayout,
    input_buffer: Dims3,
) -> Result<MappedKernel, MapError> {
    let dims = passes.first().map(|p| p.config.dims).unwrap_or_default();
    for p in &passes {
        if let Some(e) = validate(&p.config).into_iter().find(|d| d.is_error()) {
            return Err(MapError::Internal(e.to_string()));
        }
    }
    let resources = ResourceSummary {
        alu_used: passes.iter().map(|p| p.config.alu_used()).max().unwrap_or(0),
        alu_available: dims.alu_slots(),
        ram_used: passes.iter().map(|p| p.config.ram_used()).max().unwrap_or(0),
        ram_available: dims.ram_slots(),
        ram_words_used: passes.iter().map(|p| p.config.ram_words_used()).max().unwrap_or(0),
        critical_path: passes.iter().map(|p| p.fill).max().unwrap_or(0),
        passes: passes.len(),
    };
    let mut mk = MappedKernel { strategy, passes, output, input_buffer, resources, estimate: 0 };
    mk.estimate = estimate_cycles(&mk);
    Ok(mk)
}

/// Grid cell for the `i`-th ALU, filling columns top to bottom.
fn cell(i: usize, dims: &ArrayDims) -> (usize, usize) {
    (i % dims.alu_rows, i / dims.alu_rows)
}

fn ram_slot(i: usize, dims: &ArrayDims) -> (RamSide, usize) {
    let side = if i / dims.ram_rows == 0 { RamSide::Left } else { RamSide::Right };
    (side, i % dims.ram_rows)
}

/// Compile `spec` for an array of the given dimensions.
pub fn map_conv(spec: &ConvLayerSpec, dims: &ArrayDims) -> Result<MappedKernel, MapError> {
    spec.validate()?;
    dims.check().map_err(MapError::Unsupported)?;
    let kd = spec.kernel;
    if kd.r > MAX_KERNEL || kd.s > MAX_KERNEL {
        return Err(MapError::Unsupported(format!("kernel {}x{} exceeds {MAX_KERNEL}x{MAX_KERNEL}", kd.r, kd.s)));
    }
    let strategy = choose_strategy(spec, dims);
    if strategy.t_k == 0 {
        return Err(MapError::Resource {
            required_alu: ALUS_PER_CHANNEL + SHARED_ALUS,
            available_alu: dims.alu_slots(),
            required_ram: 1,
            available_ram: dims.ram_slots(),
        });
    }
    let taps = kd.taps();
    let words = taps as u64 + 1;
    if words > u64::from(dims.ram_capacity) {
        return Err(MapError::RamCapacity { required: words, capacity: dims.ram_capacity });
    }
    let out = spec.output_dims();
    let pixels = (out.h * out.w) as u64;
    let sweep = pixels * words;
    let sweep = i32::try_from(sweep).map_err(|_| MapError::TooLarge(format!("address sweep of {sweep} words")))?;
    let taps_i32 = i32::try_from(taps).map_err(|_| MapError::TooLarge(format!("{taps} taps")))?;

    let tile = ConvTile { out_rows: 0..out.h, rows_per_descriptor: strategy.t_y };
    let input: Vec<SpacedDma> =
        conv_input_descriptors(spec, &tile)?.into_iter().map(|desc| SpacedDma { space: MemSpace::Act, desc }).collect();

    let layout = OutputLayout { dims: out, entries: Vec::new() };
    let mut entries = Vec::new();
    let mut passes = Vec::new();
    let mut k0 = 0;
    while k0 < kd.k {
        let t = strategy.t_k.min(kd.k - k0);
        let channels = k0..k0 + t;
        let mut config = ArrayConfig::new(*dims);
        config.name = format!("conv_{}x{}x{}x{}_p{}", kd.k, kd.r, kd.s, kd.c, passes.len());

        let mut alus = Vec::new();
        for (j, k) in channels.clone().enumerate() {
            let m = spec.requant.multipliers[k];
            let mac_out: &[&str] = if j + 1 < t { &["e0", "s0"] } else { &["e0"] };
            alus.push(
                AluPae::new(format!("MAC{j}"), (0, 0), Opcode::Mac)
                    .with_imms(&[taps_i32])
                    .with_ports(&["w0", "n0"], mac_out),
            );
            alus.push(
                AluPae::new(format!("MUL{j}"), (0, 0), Opcode::Mul)
                    .with_imms(&[m.m0])
                    .with_ports(&["w0"], &["e0", "e1"]),
            );
            alus.push(
                AluPae::new(format!("SHR{j}"), (0, 0), Opcode::ShrRound)
                    .with_imms(&[m.total_shift() as i32])
                    .with_ports(&["w0", "n0"], &["e0"]),
            );
            alus.push(
                AluPae::new(format!("ADD{j}"), (0, 0), Opcode::Add)
                    .with_imms(&[i32::from(spec.requant.z_out)])
                    .with_ports(&["w0"], &["e0"]),
            );
            alus.push(
                AluPae::new(format!("CLP{j}"), (0, 0), Opcode::Clamp)
                    .with_imms(&[-128, 127])
                    .with_ports(&["w0"], &["e0"]),
            );
        }
        alus.push(
            AluPae::new("SUB", (0, 0), Opcode::Sub).with_imms(&[i32::from(spec.z_in)]).with_ports(&["w0"], &["e0"]),
        );
        alus.push(
            AluPae::new("CNT", (0, 0), Opcode::Counter).with_imms(&[taps_i32 + 1, sweep]).with_ports(&[], &["e0"]),
        );
        for j in 0..t {
            alus.push(if j + 1 < t {
                AluPae::new(format!("D{j}"), (0, 0), Opcode::Dup).with_ports(&["w0"], &["e0", "s0"])
            } else {
                AluPae::new(format!("D{j}"), (0, 0), Opcode::Route).with_ports(&["w0"], &["e0"])
            });
        }
        for (i, a) in alus.iter_mut().enumerate() {
            (a.row, a.col) = cell(i, dims);
        }
        config.alus = alus;

        let mut weights = Vec::new();
        let mut bias = Vec::new();
        for (j, k) in channels.clone().enumerate() {
            let (side, row) = ram_slot(j, dims);
            let mut ram = RamPae::new(format!("W{j}"), side, row, RamMode::Ram);
            let b = SpacedDma { space: MemSpace::Bias, desc: Dma4dDescriptor::linear(k as u64, 1) };
            let w = SpacedDma { space: MemSpace::Wgt, desc: Dma4dDescriptor::linear((k * taps) as u64, taps as u32) };
            ram.preload = vec![Preload::Dma(b), Preload::Dma(w)];
            bias.push(b);
            weights.push(w);
            config.rams.push(ram);
        }

        let mut x = StreamPort::input("X", PortRef::new("SUB", "w0"));
        x.dma = input.clone();
        config.streams.push(x);
        for (j, k) in channels.clone().enumerate() {
            let name = format!("Y{j}");
            let mut y = StreamPort::output(&name, PortRef::new(format!("CLP{j}"), "e0"));
            y.dma = vec![SpacedDma { space: MemSpace::Out, desc: layout.output_descriptor(k) }];
            config.streams.push(y);
            entries.push(OutputEntry { pass: passes.len(), stream: name, channel: k });
        }

        config.connect(("SUB", "e0"), ("MAC0", "w0"));
        // Address distribution: D_j feeds W_j and passes the address on, so
        // W_j sees it one cycle after W_{j-1}, matching the activation skew
        // along the mac chain. Unequal hop counts here would throttle the
        // capacity-1 channels.
        config.connect(("CNT", "e0"), ("D0", "w0"));
        for j in 0..t {
            config.connect((&format!("D{j}"), "e0"), (&format!("W{j}"), "addr"));
            if j + 1 < t {
                config.connect((&format!("D{j}"), "s0"), (&format!("D{}", j + 1), "w0"));
            }
        }
        for j in 0..t {
            let n = |p: &str| format!("{p}{j}");
            config.connect((&n("W"), "dout"), (&n("MAC"), "n0"));
            if j + 1 < t {
                config.connect((&n("MAC"), "s0"), (&format!("MAC{}", j + 1), "w0"));
            }
            config.connect((&n("MAC"), "e0"), (&n("MUL"), "w0"));
            config.connect((&n("MUL"), "e0"), (&n("SHR"), "w0"));
            config.connect((&n("MUL"), "e1"), (&n("SHR"), "n0"));
            config.connect((&n("SHR"), "e0"), (&n("ADD"), "w0"));
            config.connect((&n("ADD"), "e0"), (&n("CLP"), "w0"));
        }

        let fill = critical_path(&config);
        passes.push(MappedPass {
            config,
            channels,
            input_stream: "X".into(),
            input: input.clone(),
            weights,
            bias,
            initiation: (taps as u64, words),
            fill,
        });
        k0 += t;
    }
    let output = OutputLayout { dims: out, entries };
    finish(strategy, passes, output, spec.padded_input())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtensor::{BiasVector, KernelDims, Multiplier, Padding, RequantParams};

    fn spec(k: usize, r: usize, c: usize, hw: usize, stride: usize) -> ConvLayerSpec {
        ConvLayerSpec {
            input: Dims3::new(hw, hw, c),
            kernel: KernelDims::new(k, r, r, c),
            stride,
            padding: Padding::Same,
            z_in: 3,
            requant: RequantParams::uniform(k, Multiplier::new(1 << 30, 4), -2),
            bias: BiasVector::zeros(k),
        }
    }

    #[test]
    fn strategies() {
        let d = ArrayDims::default();
        assert_eq!(choose_strategy(&spec(4, 1, 4, 8, 1), &d).kind, StrategyKind::Spatial1x1);
        assert_eq!(choose_strategy(&spec(4, 3, 4, 8, 1), &d).kind, StrategyKind::LineBuffer3x3);
        assert_eq!(choose_strategy(&spec(4, 3, 4, 8, 2), &d).kind, StrategyKind::TiledGeneric);
        assert_eq!(choose_strategy(&spec(4, 5, 4, 8, 1), &d).kind, StrategyKind::TiledGeneric);
        assert_eq!(choose_strategy(&spec(24, 3, 24, 16, 1), &d).t_k, 6);
        assert_eq!(choose_strategy(&spec(2, 3, 24, 16, 1), &d).t_k, 2);
    }

    #[test]
    fn resources_at_default_dims() {
        let mk = map_conv(&spec(24, 3, 24, 16, 1), &ArrayDims::default()).unwrap();
        assert_eq!(mk.passes.len(), 4);
        assert_eq!(mk.resources.alu_used, 38);
        assert_eq!(mk.resources.ram_used, 6);
        assert_eq!(mk.resources.ram_words_used, 6 * 217);
        assert!(mk.output.covers_exactly_once());
        assert_eq!(mk.passes[0].input.len(), 16);
    }

    #[test]
    fn errors() {
        let d = ArrayDims::default();
        assert!(matches!(map_conv(&spec(4, 9, 2, 16, 1), &d), Err(MapError::Unsupported(_))));
        let tiny = ArrayDims { alu_rows: 1, alu_cols: 6, ..d };
        match map_conv(&spec(4, 3, 2, 8, 1), &tiny) {
            Err(MapError::Resource { required_alu, available_alu, .. }) => {
                assert_eq!((required_alu, available_alu), (8, 6));
            }
            other => panic!("{other:?}"),
        }
        let small_ram = ArrayDims { ram_capacity: 100, ..d };
        assert!(matches!(map_conv(&spec(4, 3, 16, 8, 1), &small_ram), Err(MapError::RamCapacity { .. })));
    }

    #[test]
    fn deterministic() {
        let s = spec(10, 3, 5, 9, 1);
        assert_eq!(map_conv(&s, &ArrayDims::default()), map_conv(&s, &ArrayDims::default()));
    }

    #[test]
    fn layout_descriptor_into_padded_buffer() {
        let layout = OutputLayout { dims: Dims3::new(2, 3, 4), entries: vec![] };
        let d = layout.descriptor_into(1, Dims3::new(4, 5, 4), 1, 1);
        let addrs: Vec<u64> = d.addresses(0..80).map(Result::unwrap).collect();
        let expect: Vec<u64> =
            (0..2).flat_map(|y| (0..3).map(move |x| (((y + 1) * 5 + (x + 1)) * 4 + 1) as u64)).collect();
        assert_eq!(addrs, expect);
    }
}

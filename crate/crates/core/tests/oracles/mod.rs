//! Independent reference implementations used by the property tests and the
//! acceptance suite. None of them call into the code they check.
#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity)]

use std::ops::Range;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};
use rand::seq::SliceRandom;
use rand::Rng;
use xppsim::arch::{ArrayDims, Opcode};
use xppsim::config::{AluPae, ArrayConfig, Channel, PortRef, Preload, RamMode, RamPae, RamSide, StreamPort};
use xppsim::dma::{Dma4dDescriptor, DmaLevel};
use xppsim::memory::{MemSpace, SpacedDma};

/// `clamp(round_half_away(acc * m0 / 2^(31+n)) + z_out, -128, 127)` in
/// arbitrary precision.
pub fn requant_oracle(acc: i32, m0: i32, n: u8, z_out: i8) -> i8 {
    let num = BigInt::from(acc) * BigInt::from(m0);
    let den = BigInt::from(1u8) << (31 + u32::from(n));
    let (q, r) = num.abs().div_rem(&den);
    let twice_r: BigInt = r * 2;
    let mag = if twice_r >= den { q + 1 } else { q };
    let rounded = if num.is_negative() { -mag } else { mag };
    let v = rounded + BigInt::from(z_out);
    let lo = BigInt::from(-128);
    let hi = BigInt::from(127);
    let v = if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    };
    v.to_i8().expect("clamped")
}

/// Plain tensors for the brute-force convolution oracle.
pub struct ConvCase {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub k: usize,
    pub r: usize,
    pub s: usize,
    pub stride: usize,
    pub same: bool,
    pub z_in: i8,
    pub input: Vec<i8>,
    /// `(K, R, S, C)`.
    pub weights: Vec<i8>,
    pub bias: Vec<i32>,
}

/// Materialize the padded image (pad value `z_in`), then slide the kernel.
/// Returns `(out_h, out_w, acc)` with `acc` in `(H, W, K)` order.
/// A small random convolution, sometimes with a kernel larger than the image.
pub fn random_conv_case(rng: &mut impl Rng) -> ConvCase {
    let (r, s) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
    let same = rng.gen_bool(0.5);
    let (h, w) =
        if same { (rng.gen_range(1..=8), rng.gen_range(1..=8)) } else { (rng.gen_range(r..=8), rng.gen_range(s..=8)) };
    let (c, k) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
    ConvCase {
        h,
        w,
        c,
        k,
        r,
        s,
        stride: rng.gen_range(1..=3),
        same,
        z_in: rng.gen(),
        input: (0..h * w * c).map(|_| rng.gen()).collect(),
        weights: (0..k * r * s * c).map(|_| rng.gen()).collect(),
        bias: (0..k).map(|_| rng.gen_range(-100_000..=100_000)).collect(),
    }
}

pub fn conv_bruteforce(cs: &ConvCase) -> (usize, usize, Vec<i64>) {
    let (pt, pb, pl, pr) = if cs.same {
        let oh = cs.h.div_ceil(cs.stride);
        let ow = cs.w.div_ceil(cs.stride);
        let th = ((oh - 1) * cs.stride + cs.r).saturating_sub(cs.h);
        let tw = ((ow - 1) * cs.stride + cs.s).saturating_sub(cs.w);
        (th / 2, th - th / 2, tw / 2, tw - tw / 2)
    } else {
        (0, 0, 0, 0)
    };
    let ph = cs.h + pt + pb;
    let pw = cs.w + pl + pr;
    let mut padded = vec![vec![vec![cs.z_in; cs.c]; pw]; ph];
    for y in 0..cs.h {
        for x in 0..cs.w {
            for ch in 0..cs.c {
                padded[y + pt][x + pl][ch] = cs.input[(y * cs.w + x) * cs.c + ch];
            }
        }
    }
    let oh = (ph - cs.r) / cs.stride + 1;
    let ow = (pw - cs.s) / cs.stride + 1;
    let mut out = Vec::new();
    for oy in 0..oh {
        for ox in 0..ow {
            for kk in 0..cs.k {
                let mut acc = i64::from(cs.bias[kk]);
                for ky in 0..cs.r {
                    for kx in 0..cs.s {
                        for ch in 0..cs.c {
                            let a =
                                i64::from(padded[oy * cs.stride + ky][ox * cs.stride + kx][ch]) - i64::from(cs.z_in);
                            let wt = i64::from(cs.weights[((kk * cs.r + ky) * cs.s + kx) * cs.c + ch]);
                            acc += a * wt;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    (oh, ow, out)
}

/// Four literal nested loops. `Err(addr)` marks the first address outside
/// `region`, after which the walk stops.
pub fn dma_nested(desc: &Dma4dDescriptor, region: &Range<u64>) -> Vec<Result<u64, i128>> {
    let [l3, l2, l1, l0] = desc.levels;
    let mut out = Vec::new();
    for i3 in 0..i128::from(l3.count) {
        for i2 in 0..i128::from(l2.count) {
            for i1 in 0..i128::from(l1.count) {
                for i0 in 0..i128::from(l0.count) {
                    let a = i128::from(desc.base)
                        + i3 * i128::from(l3.stride)
                        + i2 * i128::from(l2.stride)
                        + i1 * i128::from(l1.stride)
                        + i0 * i128::from(l0.stride);
                    if a < i128::from(region.start) || a >= i128::from(region.end) {
                        out.push(Err(a));
                        return out;
                    }
                    out.push(Ok(a as u64));
                }
            }
        }
    }
    out
}

/// Enumerated `(min, max)` of the raw walk.
pub fn dma_enumerated_bounds(desc: &Dma4dDescriptor) -> (i128, i128) {
    let [l3, l2, l1, l0] = desc.levels;
    let mut lo = i128::MAX;
    let mut hi = i128::MIN;
    for i3 in 0..i128::from(l3.count) {
        for i2 in 0..i128::from(l2.count) {
            for i1 in 0..i128::from(l1.count) {
                for i0 in 0..i128::from(l0.count) {
                    let a = i128::from(desc.base)
                        + i3 * i128::from(l3.stride)
                        + i2 * i128::from(l2.stride)
                        + i1 * i128::from(l1.stride)
                        + i0 * i128::from(l0.stride);
                    lo = lo.min(a);
                    hi = hi.max(a);
                }
            }
        }
    }
    (lo, hi)
}

pub fn random_descriptor(rng: &mut impl Rng) -> Dma4dDescriptor {
    let level = |rng: &mut dyn rand::RngCore| DmaLevel::new(rng.gen_range(1..=5), rng.gen_range(-40..=40));
    Dma4dDescriptor { base: rng.gen_range(0..400), levels: [level(rng), level(rng), level(rng), level(rng)] }
}

const COMPASS: [&str; 4] = ["n", "e", "s", "w"];

/// Input and output names for one ALU, drawn from a single pool so they never collide.
fn port_names(rng: &mut impl Rng, ni: usize, no: usize) -> (Vec<String>, Vec<String>) {
    let mut pool: Vec<String> = COMPASS.iter().flat_map(|d| (0..4).map(move |i| format!("{d}{i}"))).collect();
    pool.shuffle(rng);
    let mut pick = |n: usize, skip: usize, alias: &str| -> Vec<String> {
        (0..n).map(|i| if rng.gen_bool(0.2) { format!("{alias}{i}") } else { pool[skip + i].clone() }).collect()
    };
    let inputs = pick(ni, 0, "in");
    let outputs = pick(no, ni, "out");
    (inputs, outputs)
}

fn immediates(rng: &mut impl Rng, op: Opcode, inputs: usize) -> Vec<i32> {
    let n = *op.immediates(inputs).end();
    let n = if op == Opcode::Const && rng.gen_bool(0.5) { 1 } else { n };
    let mut imms: Vec<i32> = (0..n).map(|_| rng.gen_range(-1000..=1000)).collect();
    match op {
        Opcode::Const if n == 2 => imms[1] = imms[1].abs(),
        Opcode::Mac => imms[0] = rng.gen_range(1..=64),
        Opcode::ShrRound => imms[0] = rng.gen_range(0..=63),
        Opcode::Shl if n == 1 => imms[0] = rng.gen_range(0..=31),
        Opcode::Clamp => imms.sort(),
        Opcode::Counter => {
            imms[0] = rng.gen_range(1..=100);
            imms[1] = imms[1].abs();
        }
        _ => {}
    }
    if rng.gen_bool(0.05) {
        // extreme literals exercise the lexer
        if let Some(x) = imms.first_mut().filter(|_| matches!(op, Opcode::Add | Opcode::Sub | Opcode::Mul)) {
            *x = if rng.gen_bool(0.5) { i32::MIN } else { i32::MAX };
        }
    }
    imms
}

fn random_dma(rng: &mut impl Rng) -> SpacedDma {
    let space = *[MemSpace::Act, MemSpace::Wgt, MemSpace::Bias, MemSpace::Out].choose(rng).unwrap();
    SpacedDma { space, desc: random_descriptor(rng) }
}

/// A configuration that passes structural checks: unique names, cells and
/// RAM slots, declared ports, valid immediates, references that resolve.
pub fn random_config(rng: &mut impl Rng) -> ArrayConfig {
    let dims = ArrayDims {
        alu_rows: rng.gen_range(1..=6),
        alu_cols: rng.gen_range(1..=9),
        ram_sides: rng.gen_range(0..=2),
        ram_rows: rng.gen_range(1..=8),
        ram_capacity: if rng.gen_bool(0.7) { 4096 } else { rng.gen_range(1..=10_000) },
    };
    let mut c = ArrayConfig::new(dims);
    if rng.gen_bool(0.8) {
        c.name = format!("cfg_{}", rng.gen_range(0..10_000));
    }
    let mut cells: Vec<(usize, usize)> =
        (0..dims.alu_rows).flat_map(|r| (0..dims.alu_cols).map(move |cc| (r, cc))).collect();
    cells.shuffle(rng);
    let n_alu = rng.gen_range(0..=cells.len().min(12));
    for (i, &cell) in cells.iter().take(n_alu).enumerate() {
        let op = *Opcode::ALL.choose(rng).unwrap();
        let ar = op.arity();
        let ni = rng.gen_range(ar.inputs.clone());
        let no = rng.gen_range(ar.outputs.clone());
        let mut a = AluPae::new(format!("alu_{i}"), cell, op).with_imms(&immediates(rng, op, ni));
        (a.inputs, a.outputs) = port_names(rng, ni, no);
        c.alus.push(a);
    }
    let mut slots: Vec<(RamSide, usize)> = [RamSide::Left, RamSide::Right]
        .into_iter()
        .take(dims.ram_sides)
        .flat_map(|s| (0..dims.ram_rows).map(move |r| (s, r)))
        .collect();
    slots.shuffle(rng);
    let n_ram = rng.gen_range(0..=slots.len().min(4));
    for (i, &(side, row)) in slots.iter().take(n_ram).enumerate() {
        let mode = if rng.gen_bool(0.5) { RamMode::Fifo } else { RamMode::Ram };
        let mut r = RamPae::new(format!("mem_{i}"), side, row, mode);
        if rng.gen_bool(0.3) {
            r.capacity = Some(rng.gen_range(1..=5000));
        }
        for _ in 0..rng.gen_range(0..=2) {
            r.preload.push(if rng.gen_bool(0.6) {
                Preload::Words((0..rng.gen_range(0..=6)).map(|_| rng.gen_range(-100_000..=100_000)).collect())
            } else {
                Preload::Dma(random_dma(rng))
            });
        }
        c.rams.push(r);
    }

    let mut outs: Vec<PortRef> = Vec::new();
    let mut ins: Vec<PortRef> = Vec::new();
    for a in &c.alus {
        for (i, p) in a.outputs.iter().enumerate() {
            let name = if rng.gen_bool(0.15) { format!("out{i}") } else { p.clone() };
            outs.push(PortRef::new(a.name.clone(), name));
        }
        for (i, p) in a.inputs.iter().enumerate() {
            let name = if rng.gen_bool(0.15) { format!("in{i}") } else { p.clone() };
            ins.push(PortRef::new(a.name.clone(), name));
        }
    }
    for r in &c.rams {
        outs.extend(r.mode.output_ports().iter().map(|p| PortRef::new(r.name.clone(), *p)));
        ins.extend(r.mode.input_ports().iter().map(|p| PortRef::new(r.name.clone(), *p)));
    }
    ins.shuffle(rng);
    outs.shuffle(rng);
    for i in 0..rng.gen_range(0..=2usize) {
        if let Some(p) = ins.pop() {
            let mut s = StreamPort::input(format!("str_in{i}"), p);
            s.dma = (0..rng.gen_range(0..=2)).map(|_| random_dma(rng)).collect();
            c.streams.push(s);
        }
    }
    for i in 0..rng.gen_range(0..=2usize) {
        if let Some(p) = outs.pop() {
            let mut s = StreamPort::output(format!("str_out{i}"), p);
            s.dma = (0..rng.gen_range(0..=1)).map(|_| random_dma(rng)).collect();
            c.streams.push(s);
        }
    }
    while let (Some(src), Some(dst)) = (outs.pop(), ins.pop()) {
        if rng.gen_bool(0.8) {
            c.channels.push(Channel::new(src, dst));
        }
    }
    c
}

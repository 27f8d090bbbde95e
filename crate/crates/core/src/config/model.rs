use std::fmt;

use crate::arch::{ArrayDims, Opcode};
use crate::memory::{HostMemory, MemoryError, SpacedDma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RamSide {
    Left,
    Right,
}

impl RamSide {
    pub fn index(self) -> usize {
        match self {
            RamSide::Left => 0,
            RamSide::Right => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RamSide::Left => "left",
            RamSide::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RamMode {
    /// Write port `wr`, read port `rd`.
    Fifo,
    /// Address port `addr`, optional `din` (write) and `dout` (read).
    Ram,
}

impl RamMode {
    pub fn name(self) -> &'static str {
        match self {
            RamMode::Fifo => "fifo",
            RamMode::Ram => "ram",
        }
    }

    pub fn input_ports(self) -> &'static [&'static str] {
        match self {
            RamMode::Fifo => &["wr"],
            RamMode::Ram => &["addr", "din"],
        }
    }

    pub fn output_ports(self) -> &'static [&'static str] {
        match self {
            RamMode::Fifo => &["rd"],
            RamMode::Ram => &["dout"],
        }
    }
}

/// Initial RAM contents, appended in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Preload {
    Words(Vec<i32>),
    /// Filled from host memory when the configuration is loaded.
    Dma(SpacedDma),
}

impl Preload {
    pub fn len(&self) -> u64 {
        match self {
            Preload::Words(w) => w.len() as u64,
            Preload::Dma(d) => d.desc.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AluPae {
    pub name: String,
    pub row: usize,
    pub col: usize,
    pub opcode: Opcode,
    pub imms: Vec<i32>,
    /// Declared input port names, in slot order.
    pub inputs: Vec<String>,
    /// Declared output port names, in slot order.
    pub outputs: Vec<String>,
}

impl AluPae {
    pub fn new(name: impl Into<String>, (row, col): (usize, usize), opcode: Opcode) -> Self {
        Self { name: name.into(), row, col, opcode, imms: Vec::new(), inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn with_imms(mut self, imms: &[i32]) -> Self {
        self.imms = imms.to_vec();
        self
    }

    pub fn with_ports(mut self, inputs: &[&str], outputs: &[&str]) -> Self {
        self.inputs = inputs.iter().map(|s| s.to_string()).collect();
        self.outputs = outputs.iter().map(|s| s.to_string()).collect();
        self
    }

    /// Slot of an input port, by declared name or `inN` alias.
    pub fn input_slot(&self, port: &str) -> Option<usize> {
        slot_of(&self.inputs, port, "in")
    }

    pub fn output_slot(&self, port: &str) -> Option<usize> {
        slot_of(&self.outputs, port, "out")
    }
}

fn slot_of(declared: &[String], port: &str, alias: &str) -> Option<usize> {
    if let Some(i) = declared.iter().position(|p| p == port) {
        return Some(i);
    }
    let idx: usize = port.strip_prefix(alias)?.parse().ok()?;
    (idx < declared.len()).then_some(idx)
}

/// Whether `name` is an acceptable ALU port identifier: compass style
/// (`n0`, `e1`, ...) or a slot alias (`in0`..`in2`, `out0`..`out1`).
pub fn is_port_name(name: &str) -> bool {
    let compass = name.len() == 2
        && matches!(name.as_bytes()[0], b'n' | b'e' | b's' | b'w')
        && name.as_bytes()[1].is_ascii_digit();
    compass || matches!(name, "in0" | "in1" | "in2" | "out0" | "out1")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RamPae {
    pub name: String,
    pub side: RamSide,
    pub row: usize,
    pub mode: RamMode,
    /// Overrides the array-wide capacity.
    pub capacity: Option<u32>,
    pub preload: Vec<Preload>,
}

impl RamPae {
    pub fn new(name: impl Into<String>, side: RamSide, row: usize, mode: RamMode) -> Self {
        Self { name: name.into(), side, row, mode, capacity: None, preload: Vec::new() }
    }

    pub fn capacity(&self, dims: &ArrayDims) -> u32 {
        self.capacity.unwrap_or(dims.ram_capacity)
    }

    pub fn preload_len(&self) -> u64 {
        self.preload.iter().map(Preload::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamDir {
    In,
    Out,
}

/// `element.port` reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub element: String,
    pub port: String,
}

impl PortRef {
    pub fn new(element: impl Into<String>, port: impl Into<String>) -> Self {
        Self { element: element.into(), port: port.into() }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.element, self.port)
    }
}

/// A host stream bound to one PAE port. Input streams are fed from the
/// `dma` walks in order; output streams are written back through them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamPort {
    pub name: String,
    pub dir: StreamDir,
    pub port: PortRef,
    pub dma: Vec<SpacedDma>,
}

impl StreamPort {
    pub fn input(name: impl Into<String>, port: PortRef) -> Self {
        Self { name: name.into(), dir: StreamDir::In, port, dma: Vec::new() }
    }

    pub fn output(name: impl Into<String>, port: PortRef) -> Self {
        Self { name: name.into(), dir: StreamDir::Out, port, dma: Vec::new() }
    }

    /// Packets described by the attached DMA walks.
    pub fn dma_len(&self) -> u64 {
        self.dma.iter().map(|d| d.desc.len()).sum()
    }
}

/// Capacity-1 handshake link from an output port to an input port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Channel {
    pub src: PortRef,
    pub dst: PortRef,
}

impl Channel {
    pub fn new(src: PortRef, dst: PortRef) -> Self {
        Self { src, dst }
    }
}

/// A placed-and-routed array configuration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArrayConfig {
    pub name: String,
    pub dims: ArrayDims,
    pub alus: Vec<AluPae>,
    pub rams: Vec<RamPae>,
    pub streams: Vec<StreamPort>,
    pub channels: Vec<Channel>,
}

impl ArrayConfig {
    pub fn new(dims: ArrayDims) -> Self {
        Self { dims, ..Self::default() }
    }

    pub fn alu_used(&self) -> usize {
        self.alus.len()
    }

    pub fn ram_used(&self) -> usize {
        self.rams.len()
    }

    pub fn ram_words_used(&self) -> u64 {
        self.rams.iter().map(RamPae::preload_len).sum()
    }

    pub fn alu(&self, name: &str) -> Option<&AluPae> {
        self.alus.iter().find(|a| a.name == name)
    }

    pub fn ram(&self, name: &str) -> Option<&RamPae> {
        self.rams.iter().find(|r| r.name == name)
    }

    pub fn ram_mut(&mut self, name: &str) -> Option<&mut RamPae> {
        self.rams.iter_mut().find(|r| r.name == name)
    }

    pub fn stream(&self, name: &str) -> Option<&StreamPort> {
        self.streams.iter().find(|s| s.name == name)
    }

    pub fn connect(&mut self, src: (&str, &str), dst: (&str, &str)) {
        self.channels.push(Channel::new(PortRef::new(src.0, src.1), PortRef::new(dst.0, dst.1)));
    }

    /// Whether any preload still refers to host memory.
    pub fn has_dma_preloads(&self) -> bool {
        self.rams.iter().flat_map(|r| &r.preload).any(|p| matches!(p, Preload::Dma(_)))
    }

    /// Replace every DMA preload with the words it reads from `mem`.
    pub fn resolve_preloads(&mut self, mem: &HostMemory) -> Result<(), MemoryError> {
        for ram in &mut self.rams {
            for p in &mut ram.preload {
                if let Preload::Dma(d) = p {
                    *p = Preload::Words(mem.gather(d)?);
                }
            }
        }
        Ok(())
    }
}

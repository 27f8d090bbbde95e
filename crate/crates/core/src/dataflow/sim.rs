//! Cycle-stepped simulation of a configured array.
//!
//! Every element is split into actors (stream sources, ALUs, FIFO write and
//! read halves, RAM access). Each cycle an actor proposes a firing from the
//! start-of-cycle state: which input channels it consumes and which outputs
//! it produces. An output channel accepts a packet if it is empty or if its
//! consumer fires in the same cycle and drains it; the set of firing actors
//! is the greatest set consistent with that rule. Results are then computed
//! from start-of-cycle values, consumed registers are cleared, and new
//! packets are written.

use std::collections::VecDeque;
use std::ops::Range;

use super::report::{ChannelStats, PaeStats, SimReport, StreamStats};
use super::SimError;
use crate::arch::{Opcode, DEFAULT_CLOCK_HZ};
use crate::config::{
    resolve_port, validate, ArrayConfig, DiagCode, Element, PortKind, PortRef, Preload, RamMode, StreamDir,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOptions {
    /// Record packet movements for cycles in this window.
    pub trace: Option<Range<u64>>,
    pub clock_hz: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { trace: None, clock_hz: DEFAULT_CLOCK_HZ }
    }
}

impl SimOptions {
    pub fn traced(window: Range<u64>) -> Self {
        Self { trace: Some(window), ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleSummary {
    pub cycle: u64,
    /// PAEs that fired (stream injections not included).
    pub fired: usize,
    pub packets_moved: usize,
}

type ChId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Channel(ChId),
    Stream(usize),
    Discard,
}

#[derive(Debug, Clone)]
struct ChannelState {
    value: Option<i32>,
    src_actor: usize,
    dst_actor: usize,
    dst_slot: u8,
    dst_label: String,
    produced: u64,
    consumed: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct AluState {
    acc: i32,
    phase: u32,
    count: u64,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Source { stream: usize },
    Alu { op: Opcode, imms: [i32; 2], n_imms: usize, state: AluState },
    FifoWrite { ram: usize },
    FifoRead { ram: usize },
    RamAccess { ram: usize, has_din: bool },
}

#[derive(Debug, Clone)]
struct Actor {
    kind: Kind,
    node: Option<usize>,
    inputs: Vec<Option<ChId>>,
    outputs: Vec<Target>,
    out_labels: Vec<String>,
}

#[derive(Debug, Clone)]
struct RamState {
    name: String,
    capacity: u32,
    mem: Vec<i32>,
    fifo: VecDeque<i32>,
}

#[derive(Debug, Clone)]
struct StreamState {
    name: String,
    dir: StreamDir,
    queue: VecDeque<i32>,
    out: Vec<i32>,
    packets: u64,
}

#[derive(Debug, Clone)]
struct Node {
    name: String,
    kind: String,
    firings: u64,
    stalls: u64,
}

/// A configured array, ready to step.
#[derive(Debug, Clone)]
pub struct Simulator {
    cycle: u64,
    opts: SimOptions,
    actors: Vec<Actor>,
    channels: Vec<ChannelState>,
    rams: Vec<RamState>,
    streams: Vec<StreamState>,
    nodes: Vec<Node>,
    trace: Vec<(u64, String)>,
    firings_log: Vec<(u64, String)>,
    // scratch, reused every cycle
    plan: Vec<Option<(u8, u8)>>,
    worklist: Vec<usize>,
    writes: Vec<(Target, i32)>,
    node_fired: Vec<bool>,
    node_busy: Vec<bool>,
}

pub fn build_array(config: &ArrayConfig) -> Result<Simulator, SimError> {
    build_array_with(config, SimOptions::default())
}

pub fn build_array_with(config: &ArrayConfig, opts: SimOptions) -> Result<Simulator, SimError> {
    let diags: Vec<_> = validate(config).into_iter().filter(|d| d.is_error()).collect();
    if let Some(d) = diags.iter().find(|d| d.code == DiagCode::Resource) {
        return Err(SimError::Resource(d.message.clone()));
    }
    if let Some(d) = diags.iter().find(|d| matches!(d.code, DiagCode::UnknownElement | DiagCode::UnknownPort)) {
        return Err(SimError::Dangling(d.message.clone()));
    }
    if !diags.is_empty() {
        return Err(SimError::InvalidConfig(diags));
    }
    if opts.clock_hz == 0 {
        return Err(SimError::InvalidArgument("clock frequency must be positive".into()));
    }
    Builder::new(config).build(opts)
}

struct Builder<'a> {
    config: &'a ArrayConfig,
    actors: Vec<Actor>,
    channels: Vec<ChannelState>,
    nodes: Vec<Node>,
    /// element → (first actor index) for endpoint resolution
    alu_actor: Vec<usize>,
    ram_actors: Vec<[usize; 2]>,
    stream_actor: Vec<Option<usize>>,
}

impl<'a> Builder<'a> {
    fn new(config: &'a ArrayConfig) -> Self {
        Self {
            config,
            actors: Vec::new(),
            channels: Vec::new(),
            nodes: Vec::new(),
            alu_actor: vec![usize::MAX; config.alus.len()],
            ram_actors: vec![[usize::MAX; 2]; config.rams.len()],
            stream_actor: vec![None; config.streams.len()],
        }
    }

    fn build(mut self, opts: SimOptions) -> Result<Simulator, SimError> {
        let config = self.config;
        // Canonical order: input streams, ALUs row-major, RAMs by (side, row).
        for (i, s) in config.streams.iter().enumerate() {
            if s.dir == StreamDir::In {
                self.stream_actor[i] = Some(self.actors.len());
                self.actors.push(Actor {
                    kind: Kind::Source { stream: i },
                    node: None,
                    inputs: vec![],
                    outputs: vec![Target::Discard],
                    out_labels: vec![format!("{}.io", s.name)],
                });
            }
        }
        let mut alu_order: Vec<usize> = (0..config.alus.len()).collect();
        alu_order.sort_by_key(|&i| (config.alus[i].row, config.alus[i].col));
        for i in alu_order {
            let a = &config.alus[i];
            self.alu_actor[i] = self.actors.len();
            let node = self.nodes.len();
            self.nodes.push(Node { name: a.name.clone(), kind: a.opcode.name().into(), firings: 0, stalls: 0 });
            let mut imms = [0; 2];
            for (d, s) in imms.iter_mut().zip(&a.imms) {
                *d = *s;
            }
            self.actors.push(Actor {
                kind: Kind::Alu { op: a.opcode, imms, n_imms: a.imms.len(), state: AluState::default() },
                node: Some(node),
                inputs: vec![None; a.inputs.len()],
                outputs: vec![Target::Discard; a.outputs.len()],
                out_labels: a.outputs.iter().map(|p| format!("{}.{p}", a.name)).collect(),
            });
        }
        let mut ram_order: Vec<usize> = (0..config.rams.len()).collect();
        ram_order.sort_by_key(|&i| (config.rams[i].side.index(), config.rams[i].row));
        let mut rams = Vec::with_capacity(config.rams.len());
        for i in ram_order {
            let r = &config.rams[i];
            let node = self.nodes.len();
            self.nodes.push(Node {
                name: r.name.clone(),
                kind: format!("ram:{}", r.mode.name()),
                firings: 0,
                stalls: 0,
            });
            let mut words = Vec::new();
            for p in &r.preload {
                match p {
                    Preload::Words(w) => words.extend_from_slice(w),
                    Preload::Dma(_) => return Err(SimError::UnresolvedPreload(r.name.clone())),
                }
            }
            let capacity = r.capacity(&config.dims);
            let ri = rams.len();
            let mut state = RamState { name: r.name.clone(), capacity, mem: Vec::new(), fifo: VecDeque::new() };
            match r.mode {
                RamMode::Fifo => {
                    state.fifo = words.into();
                    self.ram_actors[i] = [self.actors.len(), self.actors.len() + 1];
                    self.actors.push(Actor {
                        kind: Kind::FifoWrite { ram: ri },
                        node: Some(node),
                        inputs: vec![None],
                        outputs: vec![],
                        out_labels: vec![],
                    });
                    self.actors.push(Actor {
                        kind: Kind::FifoRead { ram: ri },
                        node: Some(node),
                        inputs: vec![],
                        outputs: vec![Target::Discard],
                        out_labels: vec![format!("{}.rd", r.name)],
                    });
                }
                RamMode::Ram => {
                    words.resize(capacity as usize, 0);
                    state.mem = words;
                    self.ram_actors[i] = [self.actors.len(), self.actors.len()];
                    self.actors.push(Actor {
                        kind: Kind::RamAccess { ram: ri, has_din: false },
                        node: Some(node),
                        inputs: vec![None, None],
                        outputs: vec![Target::Discard],
                        out_labels: vec![format!("{}.dout", r.name)],
                    });
                }
            }
            rams.push(state);
        }

        let streams: Vec<StreamState> = config
            .streams
            .iter()
            .map(|s| StreamState {
                name: s.name.clone(),
                dir: s.dir,
                queue: VecDeque::new(),
                out: Vec::new(),
                packets: 0,
            })
            .collect();

        // Stream bindings.
        for (i, s) in config.streams.iter().enumerate() {
            let (actor, slot, label) = self.endpoint(&s.port)?;
            match s.dir {
                StreamDir::In => {
                    let src = self.stream_actor[i].expect("input stream has a source actor");
                    let ch = self.add_channel(src, actor, slot, label);
                    self.actors[src].outputs[0] = Target::Channel(ch);
                    self.actors[actor].inputs[slot] = Some(ch);
                }
                StreamDir::Out => {
                    self.actors[actor].outputs[slot] = Target::Stream(i);
                }
            }
        }
        for ch in &config.channels {
            let (src, sslot, _) = self.endpoint(&ch.src)?;
            let (dst, dslot, label) = self.endpoint(&ch.dst)?;
            let id = self.add_channel(src, dst, dslot, label);
            self.actors[src].outputs[sslot] = Target::Channel(id);
            self.actors[dst].inputs[dslot] = Some(id);
        }
        for a in &mut self.actors {
            if let Kind::RamAccess { has_din, .. } = &mut a.kind {
                *has_din = a.inputs[1].is_some();
            }
        }

        let n_actors = self.actors.len();
        let n_nodes = self.nodes.len();
        Ok(Simulator {
            cycle: 0,
            opts,
            actors: self.actors,
            channels: self.channels,
            rams,
            streams,
            nodes: self.nodes,
            trace: Vec::new(),
            firings_log: Vec::new(),
            plan: vec![None; n_actors],
            worklist: Vec::with_capacity(n_actors),
            writes: Vec::with_capacity(n_actors * 2),
            node_fired: vec![false; n_nodes],
            node_busy: vec![false; n_nodes],
        })
    }

    fn add_channel(&mut self, src_actor: usize, dst_actor: usize, dst_slot: usize, dst_label: String) -> ChId {
        self.channels.push(ChannelState {
            value: None,
            src_actor,
            dst_actor,
            dst_slot: dst_slot as u8,
            dst_label,
            produced: 0,
            consumed: 0,
        });
        self.channels.len() - 1
    }

    /// Actor, port slot within that actor, and display label of a port.
    fn endpoint(&self, port: &PortRef) -> Result<(usize, usize, String), SimError> {
        let (elem, kind, slot) = resolve_port(self.config, port).map_err(SimError::Dangling)?;
        Ok(match (elem, kind) {
            (Element::Alu(i), PortKind::Input) => {
                (self.alu_actor[i], slot, format!("{}.{}", port.element, self.config.alus[i].inputs[slot]))
            }
            (Element::Alu(i), PortKind::Output) => {
                (self.alu_actor[i], slot, format!("{}.{}", port.element, self.config.alus[i].outputs[slot]))
            }
            (Element::Ram(i), PortKind::Input) => {
                let r = &self.config.rams[i];
                let label = format!("{}.{}", r.name, r.mode.input_ports()[slot]);
                match r.mode {
                    RamMode::Fifo => (self.ram_actors[i][0], 0, label),
                    RamMode::Ram => (self.ram_actors[i][0], slot, label),
                }
            }
            (Element::Ram(i), PortKind::Output) => {
                let r = &self.config.rams[i];
                (self.ram_actors[i][1], 0, format!("{}.{}", r.name, r.mode.output_ports()[0]))
            }
            (Element::Stream(_), _) => {
                return Err(SimError::Dangling(format!("`{port}` refers to a stream, not a PAE port")));
            }
        })
    }
}

fn sat(v: i64) -> i32 {
    v.clamp(i64::from(i32::MIN), i64::from(i32::MAX)) as i32
}

/// Arithmetic right shift rounding to nearest, ties away from zero,
/// saturated to 32 bits.
fn shr_round(v: i64, sh: u32) -> i32 {
    if sh == 0 {
        return sat(v);
    }
    let v = i128::from(v);
    let q = v >> sh; // floor
    let rem = v - (q << sh);
    let half = 1i128 << (sh - 1);
    let r = if rem > half || (rem == half && v >= 0) { q + 1 } else { q };
    r.clamp(i128::from(i32::MIN), i128::from(i32::MAX)) as i32
}

const fn mask(n: usize) -> u8 {
    ((1u16 << n) - 1) as u8
}

impl Simulator {
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn clock_hz(&self) -> u64 {
        self.opts.clock_hz
    }

    fn stream_index(&self, name: &str) -> Result<usize, SimError> {
        self.streams.iter().position(|s| s.name == name).ok_or_else(|| SimError::UnknownStream(name.to_string()))
    }

    /// Queue packets on an input stream.
    pub fn feed(&mut self, stream: &str, packets: impl IntoIterator<Item = i32>) -> Result<(), SimError> {
        let i = self.stream_index(stream)?;
        let s = &mut self.streams[i];
        if s.dir != StreamDir::In {
            return Err(SimError::WrongDirection(stream.to_string()));
        }
        s.queue.extend(packets);
        Ok(())
    }

    /// Packets collected so far on an output stream, in production order.
    pub fn output(&self, stream: &str) -> Result<&[i32], SimError> {
        let i = self.stream_index(stream)?;
        let s = &self.streams[i];
        if s.dir != StreamDir::Out {
            return Err(SimError::WrongDirection(stream.to_string()));
        }
        Ok(&s.out)
    }

    pub fn take_output(&mut self, stream: &str) -> Result<Vec<i32>, SimError> {
        self.output(stream)?;
        let i = self.stream_index(stream)?;
        Ok(std::mem::take(&mut self.streams[i].out))
    }

    /// Current contents of a RAM element (memory image or FIFO queue).
    pub fn ram_contents(&self, name: &str) -> Option<Vec<i32>> {
        self.rams.iter().find(|r| r.name == name).map(|r| {
            if r.mem.is_empty() {
                r.fifo.iter().copied().collect()
            } else {
                r.mem.clone()
            }
        })
    }

    fn valid(&self, ch: Option<ChId>) -> bool {
        ch.is_some_and(|c| self.channels[c].value.is_some())
    }

    fn value(&self, ch: Option<ChId>) -> i32 {
        self.channels[ch.expect("planned input is connected")].value.expect("planned input is valid")
    }

    /// Proposed `(consume mask, produce mask)` from start-of-cycle state.
    fn propose(&self, a: &Actor) -> Option<(u8, u8)> {
        let all_in = mask(a.inputs.len());
        let all_out = mask(a.outputs.len());
        match &a.kind {
            Kind::Source { stream } => (!self.streams[*stream].queue.is_empty()).then_some((0, 1)),
            Kind::Alu { op, imms, n_imms, state } => match op {
                Opcode::Const => {
                    let n = if *n_imms > 1 { imms[1].max(0) as u64 } else { 1 };
                    (state.count < n).then_some((0, all_out))
                }
                Opcode::Counter => (state.count < imms[1].max(0) as u64).then_some((0, all_out)),
                Opcode::Mac => {
                    if state.phase == 0 {
                        self.valid(a.inputs[1]).then_some((0b10, 0))
                    } else if self.valid(a.inputs[0]) && self.valid(a.inputs[1]) {
                        let done = u8::from(state.phase == imms[0] as u32);
                        let fwd = if a.outputs.len() > 1 { 0b10 } else { 0 };
                        Some((0b11, done | fwd))
                    } else {
                        None
                    }
                }
                Opcode::Mux => {
                    if !self.valid(a.inputs[0]) {
                        return None;
                    }
                    let chosen = if self.value(a.inputs[0]) == 0 { 1 } else { 2 };
                    self.valid(a.inputs[chosen]).then_some((1 | (1 << chosen), all_out))
                }
                _ => a.inputs.iter().all(|c| self.valid(*c)).then_some((all_in, all_out)),
            },
            Kind::FifoWrite { ram } => {
                let r = &self.rams[*ram];
                (self.valid(a.inputs[0]) && (r.fifo.len() as u64) < u64::from(r.capacity)).then_some((1, 0))
            }
            Kind::FifoRead { ram } => (!self.rams[*ram].fifo.is_empty()).then_some((0, 1)),
            Kind::RamAccess { has_din, .. } => {
                let ok = self.valid(a.inputs[0]) && (!has_din || self.valid(a.inputs[1]));
                ok.then_some((if *has_din { 0b11 } else { 0b01 }, 1))
            }
        }
    }

    /// Whether the actor holds work it could not finish this cycle.
    fn has_work(&self, a: &Actor) -> bool {
        match &a.kind {
            Kind::Source { stream } => !self.streams[*stream].queue.is_empty(),
            Kind::Alu { op, imms, n_imms, state } => {
                let pending_source = match op {
                    Opcode::Const => state.count < if *n_imms > 1 { imms[1].max(0) as u64 } else { 1 },
                    Opcode::Counter => state.count < imms[1].max(0) as u64,
                    _ => false,
                };
                pending_source || a.inputs.iter().any(|c| self.valid(*c))
            }
            Kind::FifoWrite { .. } | Kind::RamAccess { .. } => a.inputs.iter().any(|c| self.valid(*c)),
            Kind::FifoRead { ram } => !self.rams[*ram].fifo.is_empty(),
        }
    }

    fn outputs_free(&self, a: &Actor, produce: u8) -> bool {
        a.outputs.iter().enumerate().all(|(slot, t)| {
            if produce & (1 << slot) == 0 {
                return true;
            }
            match *t {
                Target::Channel(c) => {
                    let ch = &self.channels[c];
                    ch.value.is_none()
                        || self.plan[ch.dst_actor].is_some_and(|(consume, _)| consume & (1 << ch.dst_slot) != 0)
                }
                Target::Stream(_) | Target::Discard => true,
            }
        })
    }

    /// Compute the firing set for this cycle into `self.plan`.
    fn settle(&mut self) -> usize {
        self.worklist.clear();
        for i in 0..self.actors.len() {
            self.plan[i] = self.propose(&self.actors[i]);
            if self.plan[i].is_some() {
                self.worklist.push(i);
            }
        }
        while let Some(i) = self.worklist.pop() {
            let Some((consume, produce)) = self.plan[i] else { continue };
            if self.outputs_free(&self.actors[i], produce) {
                continue;
            }
            self.plan[i] = None;
            // Channels this actor no longer drains may now block their producers.
            for (slot, ch) in self.actors[i].inputs.iter().enumerate() {
                if consume & (1 << slot) != 0 {
                    let src = self.channels[ch.expect("consumed input is connected")].src_actor;
                    if self.plan[src].is_some() {
                        self.worklist.push(src);
                    }
                }
            }
        }
        self.plan.iter().filter(|p| p.is_some()).count()
    }

    /// Advance one cycle. Always counts as a cycle, even if nothing fires.
    pub fn step(&mut self) -> Result<CycleSummary, SimError> {
        self.settle();
        self.commit()
    }

    fn commit(&mut self) -> Result<CycleSummary, SimError> {
        let cycle = self.cycle;
        let tracing = self.opts.trace.as_ref().is_some_and(|w| w.contains(&cycle));
        self.writes.clear();
        self.node_fired.iter_mut().for_each(|f| *f = false);
        self.node_busy.iter_mut().for_each(|f| *f = false);

        for i in 0..self.actors.len() {
            let Some((consume, produce)) = self.plan[i] else {
                if let Some(n) = self.actors[i].node {
                    if self.has_work(&self.actors[i]) {
                        self.node_busy[n] = true;
                    }
                }
                continue;
            };
            let mut outs = [0i32; 2];
            self.fire(i, consume, &mut outs)?;
            let a = &self.actors[i];
            if let Some(n) = a.node {
                self.node_fired[n] = true;
            }
            for (slot, t) in a.outputs.iter().enumerate() {
                if produce & (1 << slot) != 0 {
                    self.writes.push((*t, outs[slot]));
                    if tracing {
                        let dst = match *t {
                            Target::Channel(c) => Some(self.channels[c].dst_label.as_str()),
                            Target::Stream(s) => Some(self.streams[s].name.as_str()),
                            Target::Discard => None,
                        };
                        if let Some(dst) = dst {
                            let dst =
                                if matches!(t, Target::Stream(_)) { format!("{dst}.io") } else { dst.to_string() };
                            self.trace.push((
                                cycle,
                                format!("cycle={cycle} {} -> {dst} value={}", a.out_labels[slot], outs[slot]),
                            ));
                        }
                    }
                }
            }
        }

        // Clear consumed registers, then write new packets.
        for i in 0..self.actors.len() {
            if let Some((consume, _)) = self.plan[i] {
                for (slot, ch) in self.actors[i].inputs.iter().enumerate() {
                    if consume & (1 << slot) != 0 {
                        let ch = &mut self.channels[ch.expect("consumed input is connected")];
                        assert!(ch.value.is_some(), "handshake violation: consumed an empty channel");
                        ch.value = None;
                        ch.consumed += 1;
                    }
                }
            }
        }
        let mut moved = 0;
        for &(t, v) in &self.writes {
            match t {
                Target::Channel(c) => {
                    let ch = &mut self.channels[c];
                    assert!(ch.value.is_none(), "handshake violation: overwrote a full channel");
                    ch.value = Some(v);
                    ch.produced += 1;
                    moved += 1;
                }
                Target::Stream(s) => {
                    let st = &mut self.streams[s];
                    st.out.push(v);
                    st.packets += 1;
                    moved += 1;
                }
                Target::Discard => {}
            }
        }

        let mut fired = 0;
        let mut names = Vec::new();
        for (n, node) in self.nodes.iter_mut().enumerate() {
            if self.node_fired[n] {
                node.firings += 1;
                fired += 1;
                if tracing {
                    names.push(node.name.as_str());
                }
            } else if self.node_busy[n] {
                node.stalls += 1;
            }
        }
        if tracing && !names.is_empty() {
            self.firings_log.push((cycle, format!("cycle={cycle} fired {}", names.join(" "))));
        }
        self.cycle += 1;
        Ok(CycleSummary { cycle, fired, packets_moved: moved })
    }

    /// Compute outputs of a planned actor from start-of-cycle inputs and
    /// update its private state.
    fn fire(&mut self, i: usize, consume: u8, outs: &mut [i32; 2]) -> Result<(), SimError> {
        let mut inputs = [None; 3];
        let n_in = self.actors[i].inputs.len();
        inputs[..n_in].copy_from_slice(&self.actors[i].inputs);
        let get = |s: &Self, slot: usize| s.value(inputs[slot]);
        match self.actors[i].kind {
            Kind::Source { stream } => {
                let st = &mut self.streams[stream];
                outs[0] = st.queue.pop_front().expect("planned source has data");
                st.packets += 1;
            }
            Kind::FifoWrite { ram } => {
                let v = get(self, 0);
                self.rams[ram].fifo.push_back(v);
            }
            Kind::FifoRead { ram } => {
                outs[0] = self.rams[ram].fifo.pop_front().expect("planned read has data");
            }
            Kind::RamAccess { ram, has_din } => {
                let addr = get(self, 0);
                let din = if has_din { Some(get(self, 1)) } else { None };
                let r = &mut self.rams[ram];
                if addr < 0 || addr as u64 >= u64::from(r.capacity) {
                    return Err(SimError::AddressOutOfRange {
                        ram: r.name.clone(),
                        address: i64::from(addr),
                        capacity: r.capacity,
                        cycle: self.cycle,
                    });
                }
                outs[0] = r.mem[addr as usize];
                if let Some(v) = din {
                    r.mem[addr as usize] = v;
                }
            }
            Kind::Alu { op, imms, mut state, .. } => {
                let b_or_imm = |s: &Self| if n_in > 1 { get(s, 1) } else { imms[0] };
                match op {
                    Opcode::Const => {
                        outs[0] = imms[0];
                        state.count += 1;
                    }
                    Opcode::Counter => {
                        outs[0] = (state.count % imms[0] as u64) as i32;
                        state.count += 1;
                    }
                    Opcode::Route => outs[0] = get(self, 0),
                    Opcode::Dup => {
                        let v = get(self, 0);
                        *outs = [v, v];
                    }
                    Opcode::Add => outs[0] = sat(i64::from(get(self, 0)) + i64::from(b_or_imm(self))),
                    Opcode::Sub => outs[0] = sat(i64::from(get(self, 0)) - i64::from(b_or_imm(self))),
                    Opcode::Shl => {
                        let sh = b_or_imm(self);
                        outs[0] = if (0..32).contains(&sh) { get(self, 0).wrapping_shl(sh as u32) } else { 0 };
                    }
                    Opcode::Mul => {
                        let p = i64::from(get(self, 0)) * i64::from(b_or_imm(self));
                        *outs = [p as i32, (p >> 32) as i32];
                    }
                    Opcode::ShrRound => {
                        let v = if n_in > 1 {
                            (i64::from(get(self, 1)) << 32) | i64::from(get(self, 0) as u32)
                        } else {
                            i64::from(get(self, 0))
                        };
                        outs[0] = shr_round(v, imms[0] as u32);
                    }
                    Opcode::Clamp => outs[0] = get(self, 0).clamp(imms[0], imms[1]),
                    Opcode::Mux => outs[0] = if consume & 0b10 != 0 { get(self, 1) } else { get(self, 2) },
                    Opcode::Mac => {
                        if state.phase == 0 {
                            state.acc = get(self, 1);
                            state.phase = 1;
                        } else {
                            let a = get(self, 0);
                            let p = i64::from(a) * i64::from(get(self, 1));
                            state.acc = sat(i64::from(state.acc) + p);
                            outs[1] = a;
                            if state.phase == imms[0] as u32 {
                                outs[0] = state.acc;
                                state.phase = 0;
                            } else {
                                state.phase += 1;
                            }
                        }
                    }
                }
                if let Kind::Alu { state: s, .. } = &mut self.actors[i].kind {
                    *s = state;
                }
            }
        }
        Ok(())
    }

    /// Elements with pending work, in canonical order.
    pub fn stalled(&self) -> Vec<String> {
        let mut busy = vec![false; self.nodes.len()];
        for a in &self.actors {
            if let Some(n) = a.node {
                if self.has_work(a) {
                    busy[n] = true;
                }
            }
        }
        let mut names: Vec<String> =
            self.nodes.iter().zip(&busy).filter(|(_, b)| **b).map(|(n, _)| n.name.clone()).collect();
        for s in &self.streams {
            if s.dir == StreamDir::In && !s.queue.is_empty() {
                names.push(format!("{} ({} packets queued)", s.name, s.queue.len()));
            }
        }
        names
    }

    /// Packets still in flight: full channels, queued stream input, or a
    /// multiply-accumulate group started but not finished.
    pub fn has_stranded_data(&self) -> bool {
        self.channels.iter().any(|c| c.value.is_some())
            || self.streams.iter().any(|s| s.dir == StreamDir::In && !s.queue.is_empty())
            || self
                .actors
                .iter()
                .any(|a| matches!(a.kind, Kind::Alu { op: Opcode::Mac, state, .. } if state.phase != 0))
    }

    /// Step until no element can fire. The final idle cycle is not counted.
    pub fn run_until_idle(&mut self, max_cycles: u64) -> Result<SimReport, SimError> {
        let start = self.cycle;
        loop {
            let fired = self.settle();
            if fired == 0 {
                break;
            }
            if self.cycle - start >= max_cycles {
                return Err(SimError::Timeout { max_cycles, stalled: self.stalled() });
            }
            self.commit()?;
        }
        if self.has_stranded_data() {
            return Err(SimError::Deadlock { cycle: self.cycle, stalled: self.stalled() });
        }
        Ok(self.report())
    }

    pub fn report(&self) -> SimReport {
        SimReport {
            total_cycles: self.cycle,
            clock_hz: self.opts.clock_hz,
            paes: self
                .nodes
                .iter()
                .map(|n| PaeStats { name: n.name.clone(), kind: n.kind.clone(), firings: n.firings, stalls: n.stalls })
                .collect(),
            channels: self
                .channels
                .iter()
                .map(|c| ChannelStats {
                    src: self.actors[c.src_actor].out_labels.first().cloned().unwrap_or_default(),
                    dst: c.dst_label.clone(),
                    produced: c.produced,
                    consumed: c.consumed,
                    valid_at_end: c.value.is_some(),
                })
                .collect(),
            streams: self
                .streams
                .iter()
                .map(|s| StreamStats { name: s.name.clone(), dir: s.dir, packets: s.packets })
                .collect(),
        }
    }

    /// Packet movements recorded for cycles in `range`, one line each.
    pub fn dump_trace(&self, range: Range<u64>) -> Result<String, SimError> {
        if self.opts.trace.is_none() {
            return Err(SimError::TracingDisabled);
        }
        Ok(render(&self.trace, &range))
    }

    /// Per-cycle list of PAEs that fired, for cycles in `range`.
    pub fn render_firings(&self, range: Range<u64>) -> Result<String, SimError> {
        if self.opts.trace.is_none() {
            return Err(SimError::TracingDisabled);
        }
        Ok(render(&self.firings_log, &range))
    }
}

fn render(lines: &[(u64, String)], range: &Range<u64>) -> String {
    let mut out = String::new();
    for (c, l) in lines {
        if range.contains(c) {
            out.push_str(l);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shr_round_ties_away() {
        assert_eq!(shr_round(3, 1), 2);
        assert_eq!(shr_round(-3, 1), -2);
        assert_eq!(shr_round(5, 2), 1);
        assert_eq!(shr_round(-5, 2), -1);
        assert_eq!(shr_round(6, 2), 2);
        assert_eq!(shr_round(-6, 2), -2);
        assert_eq!(shr_round(i64::MAX, 1), i32::MAX);
        assert_eq!(shr_round(i64::MIN, 63), -1);
        assert_eq!(shr_round(7, 0), 7);
    }
}

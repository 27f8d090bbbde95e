//! Structural and semantic checks over an [`ArrayConfig`].

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use super::diag::{DiagCode, Diagnostic, Span};
use super::model::*;
use super::parser::SourceMap;

/// Which side of a handshake a port sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortKind {
    Input,
    Output,
}

/// Resolved element kind for a channel or stream endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Element {
    Alu(usize),
    Ram(usize),
    Stream(usize),
}

/// Classify `element.port` against the config, or explain why it does not resolve.
pub fn resolve_port(config: &ArrayConfig, port: &PortRef) -> Result<(Element, PortKind, usize), String> {
    if let Some(i) = config.alus.iter().position(|a| a.name == port.element) {
        let a = &config.alus[i];
        if let Some(s) = a.input_slot(&port.port) {
            return Ok((Element::Alu(i), PortKind::Input, s));
        }
        if let Some(s) = a.output_slot(&port.port) {
            return Ok((Element::Alu(i), PortKind::Output, s));
        }
        return Err(format!("PAE `{}` has no port `{}`", a.name, port.port));
    }
    if let Some(i) = config.rams.iter().position(|r| r.name == port.element) {
        let r = &config.rams[i];
        if let Some(s) = r.mode.input_ports().iter().position(|p| *p == port.port) {
            return Ok((Element::Ram(i), PortKind::Input, s));
        }
        if let Some(s) = r.mode.output_ports().iter().position(|p| *p == port.port) {
            return Ok((Element::Ram(i), PortKind::Output, s));
        }
        return Err(format!(
            "RAM `{}` in {} mode has no port `{}` (ports: {})",
            r.name,
            r.mode.name(),
            port.port,
            r.mode.input_ports().iter().chain(r.mode.output_ports()).copied().collect::<Vec<_>>().join(", ")
        ));
    }
    if let Some(i) = config.streams.iter().position(|s| s.name == port.element) {
        return Ok((Element::Stream(i), PortKind::Output, i));
    }
    Err(format!("unknown element `{}`", port.element))
}

struct Spans<'a>(Option<&'a SourceMap>);

impl Spans<'_> {
    fn alu(&self, i: usize, f: impl Fn(&super::parser::AluSpans) -> Span) -> Option<Span> {
        self.0.and_then(|m| m.alu(i)).map(f)
    }
    fn ram(&self, i: usize, f: impl Fn(&super::parser::RamSpans) -> Span) -> Option<Span> {
        self.0.and_then(|m| m.ram(i)).map(f)
    }
    fn stream(&self, i: usize, f: impl Fn(&super::parser::StreamSpans) -> Span) -> Option<Span> {
        self.0.and_then(|m| m.stream(i)).map(f)
    }
    fn channel(&self, i: usize, f: impl Fn(&super::parser::ChannelSpans) -> Span) -> Option<Span> {
        self.0.and_then(|m| m.channel(i)).map(f)
    }
    fn element(&self, e: Element) -> Option<Span> {
        match e {
            Element::Alu(i) => self.alu(i, |s| s.stmt),
            Element::Ram(i) => self.ram(i, |s| s.stmt),
            Element::Stream(i) => self.stream(i, |s| s.stmt),
        }
    }
}

/// Checks every well-formed configuration must pass: grid bounds,
/// placement and name uniqueness, opcode arity, port names, and that
/// stream and channel endpoints resolve with the right direction.
pub fn check_structure(config: &ArrayConfig, map: Option<&SourceMap>) -> Vec<Diagnostic> {
    let sp = Spans(map);
    let mut d = Vec::new();
    let dims = &config.dims;
    if let Err(e) = dims.check() {
        d.push(Diagnostic::error(DiagCode::Header, map.and_then(|m| m.header), e));
    }

    let all_names: Vec<(&str, Option<Span>)> = config
        .alus
        .iter()
        .enumerate()
        .map(|(i, a)| (a.name.as_str(), sp.alu(i, |s| s.name)))
        .chain(config.rams.iter().enumerate().map(|(i, r)| (r.name.as_str(), sp.ram(i, |s| s.name))))
        .chain(config.streams.iter().enumerate().map(|(i, s)| (s.name.as_str(), sp.stream(i, |s| s.name))))
        .collect();
    let mut names: HashSet<&str> = HashSet::new();
    for (n, s) in &all_names {
        if !names.insert(n) {
            d.push(Diagnostic::error(DiagCode::DuplicateName, *s, format!("duplicate element name `{n}`")));
        }
    }

    let mut placed: HashMap<(usize, usize), &str> = HashMap::new();
    for (i, a) in config.alus.iter().enumerate() {
        let mut in_bounds = true;
        if a.row >= dims.alu_rows {
            in_bounds = false;
            d.push(Diagnostic::error(
                DiagCode::Placement,
                sp.alu(i, |s| s.row),
                format!("row out of range: `{}` at row {} on a {}-row grid", a.name, a.row, dims.alu_rows),
            ));
        }
        if a.col >= dims.alu_cols {
            in_bounds = false;
            d.push(Diagnostic::error(
                DiagCode::Placement,
                sp.alu(i, |s| s.col),
                format!("column out of range: `{}` at column {} on a {}-column grid", a.name, a.col, dims.alu_cols),
            ));
        }
        if in_bounds {
            if let Some(prev) = placed.insert((a.row, a.col), &a.name) {
                d.push(Diagnostic::error(
                    DiagCode::DuplicatePlacement,
                    sp.alu(i, |s| s.row.to(s.col)),
                    format!("`{}` placed at ({},{}) already occupied by `{prev}`", a.name, a.row, a.col),
                ));
            }
        }
        let arity = a.opcode.arity();
        if !arity.inputs.contains(&a.inputs.len()) {
            d.push(Diagnostic::error(
                DiagCode::Arity,
                sp.alu(i, |s| s.inputs),
                format!(
                    "`{}` ({}) takes {}..={} inputs, {} declared",
                    a.name,
                    a.opcode,
                    arity.inputs.start(),
                    arity.inputs.end(),
                    a.inputs.len()
                ),
            ));
        }
        if !arity.outputs.contains(&a.outputs.len()) {
            d.push(Diagnostic::error(
                DiagCode::Arity,
                sp.alu(i, |s| s.outputs),
                format!(
                    "`{}` ({}) takes {}..={} outputs, {} declared",
                    a.name,
                    a.opcode,
                    arity.outputs.start(),
                    arity.outputs.end(),
                    a.outputs.len()
                ),
            ));
        }
        let imm = a.opcode.immediates(a.inputs.len());
        if !imm.contains(&a.imms.len()) {
            d.push(Diagnostic::error(
                DiagCode::Arity,
                sp.alu(i, |s| s.imms),
                format!(
                    "`{}` ({} with {} inputs) takes {}..={} immediates, {} given",
                    a.name,
                    a.opcode,
                    a.inputs.len(),
                    imm.start(),
                    imm.end(),
                    a.imms.len()
                ),
            ));
        }
        let mut seen = HashSet::new();
        for (slot, p) in a.inputs.iter().enumerate() {
            if let Some(msg) = port_name_problem(p, slot, "in", "out") {
                d.push(Diagnostic::error(DiagCode::PortName, sp.alu(i, |s| s.inputs), format!("`{}`: {msg}", a.name)));
            }
            if !seen.insert(p.as_str()) {
                d.push(Diagnostic::error(
                    DiagCode::PortName,
                    sp.alu(i, |s| s.inputs),
                    format!("`{}`: port `{p}` declared twice", a.name),
                ));
            }
        }
        for (slot, p) in a.outputs.iter().enumerate() {
            if let Some(msg) = port_name_problem(p, slot, "out", "in") {
                d.push(Diagnostic::error(DiagCode::PortName, sp.alu(i, |s| s.outputs), format!("`{}`: {msg}", a.name)));
            }
            if !seen.insert(p.as_str()) {
                d.push(Diagnostic::error(
                    DiagCode::PortName,
                    sp.alu(i, |s| s.outputs),
                    format!("`{}`: port `{p}` declared twice", a.name),
                ));
            }
        }
    }

    let mut ram_placed: HashMap<(usize, usize), &str> = HashMap::new();
    for (i, r) in config.rams.iter().enumerate() {
        let mut in_bounds = true;
        if r.side.index() >= dims.ram_sides {
            in_bounds = false;
            d.push(Diagnostic::error(
                DiagCode::Placement,
                sp.ram(i, |s| s.side),
                format!(
                    "side out of range: `{}` on the {} side of a {}-sided array",
                    r.name,
                    r.side.name(),
                    dims.ram_sides
                ),
            ));
        }
        if r.row >= dims.ram_rows {
            in_bounds = false;
            d.push(Diagnostic::error(
                DiagCode::Placement,
                sp.ram(i, |s| s.row),
                format!("row out of range: `{}` at RAM row {} of {}", r.name, r.row, dims.ram_rows),
            ));
        }
        if in_bounds {
            if let Some(prev) = ram_placed.insert((r.side.index(), r.row), &r.name) {
                d.push(Diagnostic::error(
                    DiagCode::DuplicatePlacement,
                    sp.ram(i, |s| s.side.to(s.row)),
                    format!("`{}` placed at ({},{}) already occupied by `{prev}`", r.name, r.side.name(), r.row),
                ));
            }
        }
        if r.capacity == Some(0) {
            d.push(Diagnostic::error(
                DiagCode::IntRange,
                sp.ram(i, |s| s.stmt),
                format!("`{}`: zero capacity", r.name),
            ));
        }
    }

    for (i, s) in config.streams.iter().enumerate() {
        let span = sp.stream(i, |x| x.port);
        let want = match s.dir {
            StreamDir::In => PortKind::Input,
            StreamDir::Out => PortKind::Output,
        };
        match resolve_port(config, &s.port) {
            Ok((Element::Stream(_), _, _)) => d.push(Diagnostic::error(
                DiagCode::Direction,
                span,
                format!("stream `{}` cannot bind to another stream", s.name),
            )),
            Ok((_, kind, _)) if kind != want => d.push(Diagnostic::error(
                DiagCode::Direction,
                span,
                format!(
                    "{} stream `{}` must bind to an {} port, `{}` is an {}",
                    if want == PortKind::Input { "input" } else { "output" },
                    s.name,
                    if want == PortKind::Input { "input" } else { "output" },
                    s.port,
                    if kind == PortKind::Input { "input" } else { "output" },
                ),
            )),
            Ok(_) => {}
            Err(msg) => d.push(Diagnostic::error(unresolved_code(config, &s.port), span, msg)),
        }
    }

    for (i, ch) in config.channels.iter().enumerate() {
        for (port, want, span) in [
            (&ch.src, PortKind::Output, sp.channel(i, |c| c.src)),
            (&ch.dst, PortKind::Input, sp.channel(i, |c| c.dst)),
        ] {
            match resolve_port(config, port) {
                Ok((Element::Stream(_), _, _)) => d.push(Diagnostic::error(
                    DiagCode::Direction,
                    span,
                    format!("`{}` is a stream; bind it with a `stream` statement", port.element),
                )),
                Ok((_, kind, _)) if kind != want => d.push(Diagnostic::error(
                    DiagCode::Direction,
                    span,
                    format!(
                        "`{port}` is an {} port but is used as a channel {}",
                        if kind == PortKind::Input { "input" } else { "output" },
                        if want == PortKind::Input { "destination" } else { "source" },
                    ),
                )),
                Ok(_) => {}
                Err(msg) => d.push(Diagnostic::error(unresolved_code(config, port), span, msg)),
            }
        }
    }
    d
}

fn unresolved_code(config: &ArrayConfig, port: &PortRef) -> DiagCode {
    let known =
        config.alus.iter().any(|a| a.name == port.element) || config.rams.iter().any(|r| r.name == port.element);
    if known {
        DiagCode::UnknownPort
    } else {
        DiagCode::UnknownElement
    }
}

/// Alias ports (`inN`/`outN`) must sit at their own slot so names and slots agree.
fn port_name_problem(p: &str, slot: usize, own: &str, other: &str) -> Option<String> {
    if !is_port_name(p) || p.starts_with(other) {
        return Some(format!("invalid {own}put port name `{p}`"));
    }
    if let Some(idx) = p.strip_prefix(own) {
        if idx != slot.to_string() {
            return Some(format!("alias `{p}` declared in slot {slot}"));
        }
    }
    None
}

/// Full validation: structure plus resource limits, drivers, fan-out,
/// immediates, RAM capacity and reachability.
pub fn validate(config: &ArrayConfig) -> Vec<Diagnostic> {
    validate_with_map(config, None)
}

pub fn validate_with_map(config: &ArrayConfig, map: Option<&SourceMap>) -> Vec<Diagnostic> {
    let sp = Spans(map);
    let mut d = check_structure(config, map);
    let dims = &config.dims;

    if config.alu_used() > dims.alu_slots() {
        d.push(Diagnostic::error(
            DiagCode::Resource,
            map.and_then(|m| m.header),
            format!("configuration uses {} ALU elements but the array has {}", config.alu_used(), dims.alu_slots()),
        ));
    }
    if config.ram_used() > dims.ram_slots() {
        d.push(Diagnostic::error(
            DiagCode::Resource,
            map.and_then(|m| m.header),
            format!("configuration uses {} RAM elements but the array has {}", config.ram_used(), dims.ram_slots()),
        ));
    }

    for (i, a) in config.alus.iter().enumerate() {
        if a.opcode.immediates(a.inputs.len()).contains(&a.imms.len()) {
            if let Err(e) = a.opcode.check_immediates(&a.imms) {
                d.push(Diagnostic::error(DiagCode::Immediate, sp.alu(i, |s| s.imms), format!("`{}`: {e}", a.name)));
            }
        }
    }
    for (i, r) in config.rams.iter().enumerate() {
        let cap = r.capacity(dims);
        if r.preload_len() > u64::from(cap) {
            d.push(Diagnostic::error(
                DiagCode::RamCapacity,
                sp.ram(i, |s| s.stmt),
                format!("RAM `{}` preload of {} words exceeds its capacity of {cap}", r.name, r.preload_len()),
            ));
        }
    }

    // Drivers and consumers per resolved port; skip anything that did not resolve.
    let mut drivers: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut consumers: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut edges: Vec<(Element, Element)> = Vec::new();
    let key = |config: &ArrayConfig, p: &PortRef| -> Option<(Element, (String, String))> {
        let (e, kind, slot) = resolve_port(config, p).ok()?;
        let name = match (e, kind) {
            (Element::Alu(i), PortKind::Input) => config.alus[i].inputs[slot].clone(),
            (Element::Alu(i), PortKind::Output) => config.alus[i].outputs[slot].clone(),
            _ => p.port.clone(),
        };
        Some((e, (p.element.clone(), name)))
    };
    for (i, s) in config.streams.iter().enumerate() {
        if let Some((e, k)) = key(config, &s.port) {
            match s.dir {
                StreamDir::In => {
                    *drivers.entry(k).or_default() += 1;
                    edges.push((Element::Stream(i), e));
                }
                StreamDir::Out => *consumers.entry(k).or_default() += 1,
            }
        }
    }
    let mut channel_src_span: HashMap<(String, String), Option<Span>> = HashMap::new();
    let mut channel_dst_span: HashMap<(String, String), Option<Span>> = HashMap::new();
    for (i, ch) in config.channels.iter().enumerate() {
        if let (Some((se, sk)), Some((de, dk))) = (key(config, &ch.src), key(config, &ch.dst)) {
            *consumers.entry(sk.clone()).or_default() += 1;
            *drivers.entry(dk.clone()).or_default() += 1;
            channel_src_span.entry(sk).or_insert(sp.channel(i, |c| c.src));
            channel_dst_span.insert(dk, sp.channel(i, |c| c.dst));
            edges.push((se, de));
        }
    }
    for ((e, p), n) in &drivers {
        if *n > 1 {
            let span = channel_dst_span.get(&(e.clone(), p.clone())).copied().flatten();
            d.push(Diagnostic::error(DiagCode::MultipleDrivers, span, format!("input `{e}.{p}` has {n} drivers")));
        }
    }
    for ((e, p), n) in &consumers {
        if *n > 1 {
            let span = channel_src_span.get(&(e.clone(), p.clone())).copied().flatten();
            d.push(Diagnostic::error(
                DiagCode::FanOut,
                span,
                format!("output `{e}.{p}` feeds {n} consumers; use a `dup` PAE to fan out"),
            ));
        }
    }

    for (i, a) in config.alus.iter().enumerate() {
        for p in &a.inputs {
            if !drivers.contains_key(&(a.name.clone(), p.clone())) {
                d.push(Diagnostic::error(
                    DiagCode::Undriven,
                    sp.alu(i, |s| s.inputs),
                    format!("undriven input `{}.{p}`", a.name),
                ));
            }
        }
        for p in &a.outputs {
            if !consumers.contains_key(&(a.name.clone(), p.clone())) {
                d.push(Diagnostic::warning(
                    DiagCode::UnusedOutput,
                    sp.alu(i, |s| s.outputs),
                    format!("output `{}.{p}` is not connected", a.name),
                ));
            }
        }
    }
    for (i, r) in config.rams.iter().enumerate() {
        if r.mode == RamMode::Ram && !drivers.contains_key(&(r.name.clone(), "addr".to_string())) {
            d.push(Diagnostic::error(
                DiagCode::Undriven,
                sp.ram(i, |s| s.stmt),
                format!("undriven input `{}.addr`", r.name),
            ));
        }
    }

    // Reachability from input streams, source opcodes and preloaded RAMs.
    let mut adj: HashMap<Element, Vec<Element>> = HashMap::new();
    for (a, b) in &edges {
        adj.entry(*a).or_default().push(*b);
    }
    let mut seen: HashSet<Element> = HashSet::new();
    let mut queue: VecDeque<Element> = VecDeque::new();
    for (i, s) in config.streams.iter().enumerate() {
        if s.dir == StreamDir::In {
            queue.push_back(Element::Stream(i));
        }
    }
    for (i, a) in config.alus.iter().enumerate() {
        if a.inputs.is_empty() {
            queue.push_back(Element::Alu(i));
        }
    }
    for (i, r) in config.rams.iter().enumerate() {
        if r.preload_len() > 0 {
            queue.push_back(Element::Ram(i));
        }
    }
    while let Some(e) = queue.pop_front() {
        if !seen.insert(e) {
            continue;
        }
        if let Some(next) = adj.get(&e) {
            queue.extend(next.iter().copied());
        }
    }
    let all = (0..config.alus.len()).map(Element::Alu).chain((0..config.rams.len()).map(Element::Ram));
    for e in all {
        if !seen.contains(&e) {
            let name = match e {
                Element::Alu(i) => &config.alus[i].name,
                Element::Ram(i) => &config.rams[i].name,
                Element::Stream(i) => &config.streams[i].name,
            };
            d.push(Diagnostic::warning(
                DiagCode::Unreachable,
                sp.element(e),
                format!("`{name}` is unreachable from any input stream or source"),
            ));
        }
    }
    d
}

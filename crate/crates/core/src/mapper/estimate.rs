use std::collections::HashMap;
use std::fmt::Write;

use crate::config::{ArrayConfig, StreamDir};

use super::MappedKernel;

/// Longest chain of PAEs, counted in elements, from an input stream or a
/// source opcode to an output stream. Feedback edges are ignored.
pub fn critical_path(config: &ArrayConfig) -> usize {
    let mut succ: HashMap<&str, Vec<&str>> = HashMap::new();
    for c in &config.channels {
        succ.entry(c.src.element.as_str()).or_default().push(c.dst.element.as_str());
    }
    let sinks: Vec<&str> =
        config.streams.iter().filter(|s| s.dir == StreamDir::Out).map(|s| s.port.element.as_str()).collect();
    let mut roots: Vec<&str> =
        config.streams.iter().filter(|s| s.dir == StreamDir::In).map(|s| s.port.element.as_str()).collect();
    roots.extend(config.alus.iter().filter(|a| a.opcode.is_source()).map(|a| a.name.as_str()));

    // depth[n] = longest path from n to a sink, inclusive of n; None while on stack
    let mut depth: HashMap<&str, Option<usize>> = HashMap::new();
    fn visit<'a>(
        n: &'a str,
        succ: &HashMap<&'a str, Vec<&'a str>>,
        sinks: &[&str],
        depth: &mut HashMap<&'a str, Option<usize>>,
    ) -> usize {
        match depth.get(n) {
            Some(Some(d)) => return *d,
            Some(None) => return 0,
            None => {}
        }
        depth.insert(n, None);
        let mut best = if sinks.contains(&n) { 1 } else { 0 };
        for &m in succ.get(n).map(Vec::as_slice).unwrap_or(&[]) {
            let d = visit(m, succ, sinks, depth);
            if d > 0 {
                best = best.max(d + 1);
            }
        }
        depth.insert(n, Some(best));
        best
    }
    roots.iter().map(|r| visit(r, &succ, &sinks, &mut depth)).max().unwrap_or(0)
}

/// Predicted cycles: per pass, pipeline fill plus input packets divided by
/// the steady-state initiation rate. Passes run back to back.
pub fn estimate_cycles(mk: &MappedKernel) -> u64 {
    mk.passes
        .iter()
        .map(|p| {
            let (num, den) = p.initiation;
            p.fill as u64 + (p.input_packets() * den).div_ceil(num.max(1))
        })
        .sum()
}

/// Multi-line summary of what a mapping occupies.
pub fn resource_report(mk: &MappedKernel) -> String {
    let r = &mk.resources;
    let mut out = String::new();
    let _ = writeln!(out, "strategy {} t_k={} t_y={}", mk.strategy.kind, mk.strategy.t_k, mk.strategy.t_y);
    let _ = writeln!(
        out,
        "resources: {}/{} ALU, {}/{} RAM, {} RAM words preloaded",
        r.alu_used, r.alu_available, r.ram_used, r.ram_available, r.ram_words_used
    );
    let _ = writeln!(out, "passes: {}", r.passes);
    let _ = writeln!(out, "critical path: {} PAEs", r.critical_path);
    let _ = writeln!(out, "estimated cycles: {}", mk.estimate);
    for (i, p) in mk.passes.iter().enumerate() {
        let _ = writeln!(
            out,
            "pass {i} {}: channels {}..{}, {} ALU, {} RAM, {} input packets",
            p.config.name,
            p.channels.start,
            p.channels.end,
            p.config.alu_used(),
            p.config.ram_used(),
            p.input_packets()
        );
    }
    out
}

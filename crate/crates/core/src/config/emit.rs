use std::fmt::Write;

use super::model::*;
use crate::arch::DEFAULT_RAM_WORDS;

/// Canonical text: header, name, ALUs, RAMs with their preloads, streams
/// with their DMA walks, channels. Element order follows the config.
pub fn emit(config: &ArrayConfig) -> String {
    let mut out = String::new();
    let d = &config.dims;
    let _ = write!(out, "array {}x{} alu {}x{} ram", d.alu_rows, d.alu_cols, d.ram_sides, d.ram_rows);
    if d.ram_capacity != DEFAULT_RAM_WORDS {
        let _ = write!(out, " cap {}", d.ram_capacity);
    }
    out.push('\n');
    if !config.name.is_empty() {
        let _ = writeln!(out, "name {}", config.name);
    }
    for a in &config.alus {
        let _ = write!(out, "pae {} at ({},{}) op {}", a.name, a.row, a.col, a.opcode);
        if !a.imms.is_empty() {
            let _ = write!(out, " imm {}", join(&a.imms));
        }
        let _ = writeln!(out, " in[{}] out[{}]", a.inputs.join(","), a.outputs.join(","));
    }
    for r in &config.rams {
        let _ = write!(out, "ram {} at ({},{}) mode {}", r.name, r.side.name(), r.row, r.mode.name());
        if let Some(cap) = r.capacity {
            let _ = write!(out, " cap {cap}");
        }
        out.push('\n');
        for p in &r.preload {
            match p {
                Preload::Words(w) if w.is_empty() => {
                    let _ = writeln!(out, "preload {} words", r.name);
                }
                Preload::Words(w) => {
                    let _ = writeln!(out, "preload {} words {}", r.name, join(w));
                }
                Preload::Dma(dma) => {
                    let _ = writeln!(out, "preload {} {dma}", r.name);
                }
            }
        }
    }
    for s in &config.streams {
        match s.dir {
            StreamDir::In => {
                let _ = writeln!(out, "stream {} in -> {}", s.name, s.port);
            }
            StreamDir::Out => {
                let _ = writeln!(out, "stream {} out <- {}", s.name, s.port);
            }
        }
        for dma in &s.dma {
            let _ = writeln!(out, "stream {} {dma}", s.name);
        }
    }
    for ch in &config.channels {
        let _ = writeln!(out, "connect {} -> {}", ch.src, ch.dst);
    }
    out
}

/// Several configurations in one file, separated by blank lines.
pub fn emit_many(configs: &[ArrayConfig]) -> String {
    configs.iter().map(emit).collect::<Vec<_>>().join("\n")
}

fn join(v: &[i32]) -> String {
    v.iter().map(i32::to_string).collect::<Vec<_>>().join(",")
}

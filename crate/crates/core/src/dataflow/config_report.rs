//! Human-readable summary of a configuration: resource totals, an
//! occupancy grid, per-element lines and the channel list. Layout is
//! described in `docs/formats.md`.

use std::fmt::Write;

use crate::config::{ArrayConfig, Preload, RamSide, StreamDir};

pub fn config_report(config: &ArrayConfig) -> String {
    let d = &config.dims;
    let mut out = String::new();
    let name = if config.name.is_empty() { "(unnamed)" } else { &config.name };
    let _ = writeln!(out, "config {name}");
    let _ = writeln!(
        out,
        "resources: {}/{} ALU, {}/{} RAM, {} RAM words preloaded",
        config.alu_used(),
        d.alu_slots(),
        config.ram_used(),
        d.ram_slots(),
        config.ram_words_used()
    );

    let width = config
        .alus
        .iter()
        .map(|a| a.name.len())
        .chain(config.rams.iter().map(|r| r.name.len()))
        .max()
        .unwrap_or(1)
        .max(2);
    let _ = writeln!(out, "grid {}x{} alu {}x{} ram:", d.alu_rows, d.alu_cols, d.ram_sides, d.ram_rows);
    let rows = d.alu_rows.max(d.ram_rows);
    let cell = |s: Option<&str>| format!(" {:<width$}", s.unwrap_or("."));
    for r in 0..rows {
        let mut line = String::new();
        let ram_at = |side: RamSide| config.rams.iter().find(|m| m.side == side && m.row == r).map(|m| m.name.as_str());
        if d.ram_sides > 0 {
            line += &if r < d.ram_rows { cell(ram_at(RamSide::Left)) } else { cell(Some("")) };
            line += " |";
        }
        for c in 0..d.alu_cols {
            let a = config.alus.iter().find(|a| a.row == r && a.col == c).map(|a| a.name.as_str());
            line += &if r < d.alu_rows { cell(a) } else { cell(Some("")) };
        }
        if d.ram_sides > 1 {
            line += " |";
            line += &if r < d.ram_rows { cell(ram_at(RamSide::Right)) } else { cell(Some("")) };
        }
        let _ = writeln!(out, "  {}", line.trim_end());
    }

    let mut alus: Vec<_> = config.alus.iter().collect();
    alus.sort_by_key(|a| (a.row, a.col));
    for a in alus {
        let imms = if a.imms.is_empty() {
            String::new()
        } else {
            format!(" imm {}", a.imms.iter().map(i32::to_string).collect::<Vec<_>>().join(","))
        };
        let _ = writeln!(
            out,
            "alu {} ({},{}) {}{imms} in[{}] out[{}]",
            a.name,
            a.row,
            a.col,
            a.opcode,
            a.inputs.join(","),
            a.outputs.join(",")
        );
    }
    let mut rams: Vec<_> = config.rams.iter().collect();
    rams.sort_by_key(|r| (r.side.index(), r.row));
    for r in rams {
        let dma = r.preload.iter().filter(|p| matches!(p, Preload::Dma(_))).count();
        let _ = writeln!(
            out,
            "ram {} ({},{}) {} cap {} preload {} words{}",
            r.name,
            r.side.name(),
            r.row,
            r.mode.name(),
            r.capacity(d),
            r.preload_len(),
            if dma > 0 { format!(" ({dma} from host)") } else { String::new() }
        );
    }
    for s in &config.streams {
        let (dir, arrow) = if s.dir == StreamDir::In { ("in", "->") } else { ("out", "<-") };
        let _ = writeln!(out, "stream {} {dir} {arrow} {} ({} packets by dma)", s.name, s.port, s.dma_len());
    }
    for c in &config.channels {
        let _ = writeln!(out, "channel {} -> {}", c.src, c.dst);
    }
    out
}

/// Resource totals read back from a report:
/// `(alu_used, alu_total, ram_used, ram_total)`.
pub fn parse_resource_line(report: &str) -> Option<(usize, usize, usize, usize)> {
    let line = report.lines().find_map(|l| l.strip_prefix("resources: "))?;
    let mut parts = line.split(", ");
    let frac = |s: &str, unit: &str| -> Option<(usize, usize)> {
        let (a, b) = s.strip_suffix(unit)?.trim().split_once('/')?;
        Some((a.parse().ok()?, b.parse().ok()?))
    };
    let (au, at) = frac(parts.next()?, " ALU")?;
    let (ru, rt) = frac(parts.next()?, " RAM")?;
    Some((au, at, ru, rt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Opcode;
    use crate::config::{AluPae, RamMode, RamPae};

    #[test]
    fn empty_and_one() {
        let mut c = ArrayConfig::default();
        assert!(config_report(&c).contains("0/40 ALU, 0/16 RAM"));
        c.alus.push(AluPae::new("A0", (0, 0), Opcode::Route).with_ports(&["w0"], &["e0"]));
        let r = config_report(&c);
        assert!(r.contains("1/40 ALU"));
        assert_eq!(parse_resource_line(&r), Some((1, 40, 0, 16)));
    }

    #[test]
    fn grid_shows_names() {
        let mut c = ArrayConfig::default();
        c.alus.push(AluPae::new("X", (2, 3), Opcode::Route).with_ports(&["w0"], &["e0"]));
        c.rams.push(RamPae::new("M", RamSide::Right, 1, RamMode::Fifo));
        let r = config_report(&c);
        let grid: Vec<&str> = r.lines().skip(3).take(8).collect();
        assert!(grid[2].contains('X'));
        assert!(grid[1].trim_end().ends_with('M'));
        assert_eq!(parse_resource_line(&r), Some((1, 40, 1, 16)));
    }
}

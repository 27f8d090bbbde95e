use std::collections::BTreeMap;
use std::fmt::Write;

use crate::config::StreamDir;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaeStats {
    pub name: String,
    /// Opcode name for ALUs, `ram:<mode>` for RAM elements.
    pub kind: String,
    pub firings: u64,
    pub stalls: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelStats {
    pub src: String,
    pub dst: String,
    pub produced: u64,
    pub consumed: u64,
    pub valid_at_end: bool,
}

impl ChannelStats {
    /// `produced == consumed + (1 if a packet is still in the register)`.
    pub fn conserved(&self) -> bool {
        self.produced == self.consumed + u64::from(self.valid_at_end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamStats {
    pub name: String,
    pub dir: StreamDir,
    pub packets: u64,
}

/// Statistics of a simulation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimReport {
    pub total_cycles: u64,
    pub clock_hz: u64,
    /// In canonical element order: ALUs row-major, then RAMs by (side, row).
    pub paes: Vec<PaeStats>,
    pub channels: Vec<ChannelStats>,
    pub streams: Vec<StreamStats>,
}

impl SimReport {
    pub fn latency_ms(&self) -> f64 {
        self.total_cycles as f64 / (self.clock_hz as f64 / 1000.0)
    }

    pub fn total_firings(&self) -> u64 {
        self.paes.iter().map(|p| p.firings).sum()
    }

    pub fn total_stalls(&self) -> u64 {
        self.paes.iter().map(|p| p.stalls).sum()
    }

    pub fn active_paes(&self) -> usize {
        self.paes.len()
    }

    /// `firings / (active PAEs * cycles)`, 0 for an empty run.
    pub fn utilization(&self) -> f64 {
        let denom = self.active_paes() as f64 * self.total_cycles as f64;
        if denom == 0.0 {
            0.0
        } else {
            self.total_firings() as f64 / denom
        }
    }

    pub fn pae(&self, name: &str) -> Option<&PaeStats> {
        self.paes.iter().find(|p| p.name == name)
    }

    pub fn stream(&self, name: &str) -> Option<&StreamStats> {
        self.streams.iter().find(|s| s.name == name)
    }

    pub fn packets_in(&self) -> u64 {
        self.streams.iter().filter(|s| s.dir == StreamDir::In).map(|s| s.packets).sum()
    }

    pub fn packets_out(&self) -> u64 {
        self.streams.iter().filter(|s| s.dir == StreamDir::Out).map(|s| s.packets).sum()
    }

    /// Combine sequential runs (e.g. reconfiguration passes): cycles add up,
    /// per-element statistics are summed by name, channels are concatenated.
    pub fn sequential(reports: &[SimReport]) -> SimReport {
        let clock_hz = reports.first().map_or(crate::arch::DEFAULT_CLOCK_HZ, |r| r.clock_hz);
        let mut paes: BTreeMap<&str, (usize, PaeStats)> = BTreeMap::new();
        let mut streams: BTreeMap<&str, (usize, StreamStats)> = BTreeMap::new();
        let mut channels = Vec::new();
        let mut total_cycles = 0;
        for r in reports {
            total_cycles += r.total_cycles;
            for p in &r.paes {
                let next = paes.len();
                let e = paes.entry(&p.name).or_insert((next, PaeStats { firings: 0, stalls: 0, ..p.clone() }));
                e.1.firings += p.firings;
                e.1.stalls += p.stalls;
            }
            for s in &r.streams {
                let next = streams.len();
                let e = streams.entry(&s.name).or_insert((next, StreamStats { packets: 0, ..s.clone() }));
                e.1.packets += s.packets;
            }
            channels.extend(r.channels.iter().cloned());
        }
        let mut paes: Vec<_> = paes.into_values().collect();
        paes.sort_by_key(|(i, _)| *i);
        let mut streams: Vec<_> = streams.into_values().collect();
        streams.sort_by_key(|(i, _)| *i);
        SimReport {
            total_cycles,
            clock_hz,
            paes: paes.into_iter().map(|(_, p)| p).collect(),
            channels,
            streams: streams.into_iter().map(|(_, s)| s).collect(),
        }
    }

    /// Plain-text summary, one element per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "cycles={} latency_ms={:.6} utilization={:.4} firings={} stalls={}",
            self.total_cycles,
            self.latency_ms(),
            self.utilization(),
            self.total_firings(),
            self.total_stalls()
        );
        for p in &self.paes {
            let _ = writeln!(out, "pae {} {} firings={} stalls={}", p.name, p.kind, p.firings, p.stalls);
        }
        for s in &self.streams {
            let dir = if s.dir == StreamDir::In { "in" } else { "out" };
            let _ = writeln!(out, "stream {} {dir} packets={}", s.name, s.packets);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(cycles: u64, firings: u64) -> SimReport {
        SimReport {
            total_cycles: cycles,
            clock_hz: 250_000_000,
            paes: vec![PaeStats { name: "A".into(), kind: "route".into(), firings, stalls: 1 }],
            channels: vec![],
            streams: vec![StreamStats { name: "S".into(), dir: StreamDir::In, packets: firings }],
        }
    }

    #[test]
    fn latency_at_250mhz() {
        let r = report(250_000, 10);
        assert!((r.latency_ms() - 1.0).abs() < 1e-12);
        assert_eq!(report(0, 0).utilization(), 0.0);
        assert!((report(10, 5).utilization() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sequential_sums_by_name() {
        let r = SimReport::sequential(&[report(10, 4), report(5, 3)]);
        assert_eq!(r.total_cycles, 15);
        assert_eq!(r.paes.len(), 1);
        assert_eq!(r.paes[0].firings, 7);
        assert_eq!(r.paes[0].stalls, 2);
        assert_eq!(r.packets_in(), 7);
    }
}

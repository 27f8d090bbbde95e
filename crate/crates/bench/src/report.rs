use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use xppsim::qtensor::{Dims3, KernelDims};

use crate::BenchError;

pub const CSV_HEADER: [&str; 16] = [
    "name",
    "kh",
    "kw",
    "kc",
    "kk",
    "img_h",
    "img_w",
    "img_c",
    "cycles",
    "sim_ms",
    "macs",
    "macs_per_cycle",
    "baseline_ms",
    "paper_hpdp_ms",
    "paper_gr740_ms",
    "golden_match",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub name: String,
    pub kernel: KernelDims,
    pub image: Dims3,
    pub cycles: u64,
    pub sim_ms: f64,
    pub macs: u64,
    pub macs_per_cycle: f64,
    pub baseline_ms: f64,
    pub paper_hpdp_ms: Option<f64>,
    pub paper_gr740_ms: Option<f64>,
    pub golden_match: bool,
    pub estimate: u64,
    pub alu_used: usize,
    pub ram_used: usize,
    pub passes: usize,
}

impl BenchRow {
    fn csv_record(&self) -> [String; 16] {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_default();
        let k = self.kernel;
        [
            self.name.clone(),
            k.r.to_string(),
            k.s.to_string(),
            k.c.to_string(),
            k.k.to_string(),
            self.image.h.to_string(),
            self.image.w.to_string(),
            self.image.c.to_string(),
            self.cycles.to_string(),
            format!("{:.6}", self.sim_ms),
            self.macs.to_string(),
            format!("{:.4}", self.macs_per_cycle),
            format!("{:.6}", self.baseline_ms),
            opt(self.paper_hpdp_ms),
            opt(self.paper_gr740_ms),
            self.golden_match.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteMeta {
    pub seed: u64,
    pub clock_hz: u64,
    pub version: String,
    pub cpi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub meta: SuiteMeta,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn all_match(&self) -> bool {
        self.rows.iter().all(|r| r.golden_match)
    }

    pub fn verdict(&self) -> &'static str {
        if self.all_match() {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

pub fn csv_string(report: &BenchReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for row in &report.rows {
        w.write_record(row.csv_record()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn emit_csv(report: &BenchReport, path: &Path) -> Result<(), BenchError> {
    write_file(path, csv_string(report).as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), BenchError> {
    let io = |source| BenchError::Io { path: path.display().to_string(), source };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

/// Aligned plain-text table with a verdict line.
pub fn emit_table(report: &BenchReport) -> String {
    let header =
        ["case", "image", "cycles", "sim ms", "MAC/cyc", "baseline ms", "published HPDP", "published GR740", "golden"];
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
    let rows: Vec<[String; 9]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                r.image.to_string(),
                r.cycles.to_string(),
                format!("{:.3}", r.sim_ms),
                format!("{:.2}", r.macs_per_cycle),
                format!("{:.2}", r.baseline_ms),
                opt(r.paper_hpdp_ms),
                opt(r.paper_gr740_ms),
                if r.golden_match { "match".into() } else { "MISMATCH".into() },
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(header.to_vec(), &mut out);
    line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect(), &mut out);
    for r in &rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    let m = &report.meta;
    let _ = writeln!(
        out,
        "seed {} | clock {} Hz | baseline CPI {:.2} | xppsim {} | {}",
        m.seed,
        m.clock_hz,
        m.cpi,
        m.version,
        report.verdict()
    );
    out
}

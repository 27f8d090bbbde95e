//! Benchmark harness: runs layer suites through the orchestrator, checks
//! them against the golden model and renders CSV, a text table and an SVG
//! chart next to the published reference latencies.

pub mod baseline;
pub mod chart;
pub mod report;
pub mod suite;

use std::ops::Range;
use std::path::PathBuf;

use rayon::prelude::*;
use xppsim::orchestrator::{execute_layer, ExecOptions, OrchestratorError};

pub use baseline::{calibrated_cpi, scalar_baseline};
pub use chart::{emit_chart, svg_string};
pub use report::{csv_string, emit_csv, emit_table, BenchReport, BenchRow, SuiteMeta, CSV_HEADER};
pub use suite::{table1_suite, BenchCase, PublishedLatency, Scale, SizeConvention, REFERENCE_LAYERS};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("case `{case}`: {reason}")]
    Case { case: String, reason: String },
    #[error("case `{case}` failed the golden check: {source}")]
    GoldenMismatch { case: String, source: Box<OrchestratorError> },
    #[error("case `{case}`: {source}")]
    Run { case: String, source: Box<OrchestratorError> },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub cpi: f64,
    pub exec: ExecOptions,
    /// Write each case's packet trace for this window here.
    pub trace_dir: Option<PathBuf>,
    pub trace_window: Range<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            jobs: 0,
            cpi: calibrated_cpi(),
            exec: ExecOptions::default(),
            trace_dir: None,
            trace_window: 0..200,
        }
    }
}

/// Map, simulate, verify and measure every case. Rows keep case order.
pub fn run_suite(cases: &[BenchCase], opts: &RunOptions) -> Result<BenchReport, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| BenchError::Usage(format!("thread pool: {e}")))?;
    let mut exec = opts.exec.clone();
    exec.verify = true;
    if opts.trace_dir.is_some() {
        exec.trace = Some(opts.trace_window.clone());
    }
    let results: Vec<Result<(BenchRow, Vec<String>), BenchError>> =
        pool.install(|| cases.par_iter().map(|c| run_case(c, &exec, opts.cpi)).collect());

    let mut rows = Vec::with_capacity(cases.len());
    for r in results {
        let (row, traces) = r?;
        if let Some(dir) = &opts.trace_dir {
            std::fs::create_dir_all(dir)
                .map_err(|source| BenchError::Io { path: dir.display().to_string(), source })?;
            for (i, t) in traces.iter().enumerate() {
                let file = dir.join(format!("{}_p{i}.trace", sanitize(&row.name)));
                report::write_file(&file, t.as_bytes())?;
            }
        }
        rows.push(row);
    }
    Ok(BenchReport {
        meta: SuiteMeta {
            seed: opts.seed,
            clock_hz: exec.clock_hz,
            version: env!("CARGO_PKG_VERSION").into(),
            cpi: opts.cpi,
        },
        rows,
    })
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn run_case(case: &BenchCase, exec: &ExecOptions, cpi: f64) -> Result<(BenchRow, Vec<String>), BenchError> {
    let job = case.job()?;
    let rec = execute_layer(&job, exec).map_err(|source| match source {
        OrchestratorError::Mismatch { .. } => {
            BenchError::GoldenMismatch { case: case.name.clone(), source: Box::new(source) }
        }
        source => BenchError::Run { case: case.name.clone(), source: Box::new(source) },
    })?;
    let macs = job.spec.macs();
    let cycles = rec.report.total_cycles;
    let row = BenchRow {
        name: case.name.clone(),
        kernel: job.spec.kernel,
        image: job.spec.input,
        cycles,
        sim_ms: rec.latency_ms,
        macs,
        macs_per_cycle: macs as f64 / cycles.max(1) as f64,
        baseline_ms: scalar_baseline(&job.spec, cpi),
        paper_hpdp_ms: case.published.map(|p| p.hpdp_ms),
        paper_gr740_ms: case.published.map(|p| p.gr740_ms),
        golden_match: rec.golden_match == Some(true),
        estimate: rec.estimate,
        alu_used: rec.alu_used,
        ram_used: rec.ram_used,
        passes: rec.pass_cycles.len(),
    };
    Ok((row, rec.traces))
}

/// Publication-implied MACs per cycle for a published row (same-padding MAC
/// count over its HPDP latency at the default clock).
pub fn published_macs_per_cycle(row: &suite::ReferenceRow) -> f64 {
    baseline::row_macs(row) as f64 / (row.latency.hpdp_ms * 1e-3 * xppsim::arch::DEFAULT_CLOCK_HZ as f64)
}

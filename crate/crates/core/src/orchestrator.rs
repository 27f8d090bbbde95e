//! Host-side emulation: load configurations, preload RAMs, stream
//! activations, run, collect outputs, and chain layers between array
//! instances.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::arch::ArrayDims;
use crate::dataflow::{build_array_with, SimError, SimOptions, SimReport};
use crate::mapper::{map_conv, MapError, MappedKernel, MappedPass};
use crate::memory::{HostMemory, MemSpace, MemoryError, SpacedDma};
use crate::qtensor::{conv2d_ref, requantize_tensor, ConvLayerSpec, Dims3, QuantError, QuantizedTensor, WeightTensor};

/// Where a layer's output stream goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Routing {
    #[default]
    ToHost,
    /// Straight into the next layer's input buffer.
    ChainNext,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerJob {
    pub name: String,
    pub spec: ConvLayerSpec,
    pub weights: WeightTensor,
    /// Required for a standalone job and the head of a chain; later chain
    /// members take their input from the previous layer.
    pub input: Option<QuantizedTensor>,
    /// Precomputed mapping; `None` maps on demand.
    pub kernel: Option<MappedKernel>,
    pub routing: Routing,
}

impl LayerJob {
    pub fn new(name: impl Into<String>, spec: ConvLayerSpec, weights: WeightTensor, input: QuantizedTensor) -> Self {
        Self { name: name.into(), spec, weights, input: Some(input), kernel: None, routing: Routing::ToHost }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOptions {
    pub dims: ArrayDims,
    pub clock_hz: u64,
    /// Compare every output against the golden reference.
    pub verify: bool,
    /// Per-pass cycle limit; `None` allows four times the estimate plus slack.
    pub max_cycles: Option<u64>,
    /// Record a packet trace for this cycle window of every pass.
    pub trace: Option<Range<u64>>,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self {
            dims: ArrayDims::default(),
            clock_hz: crate::arch::DEFAULT_CLOCK_HZ,
            verify: true,
            max_cycles: None,
            trace: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrchestratorError {
    #[error("layer `{layer}`: {source}")]
    Map { layer: String, source: MapError },
    #[error("layer `{layer}` pass {pass}: {source}")]
    Sim { layer: String, pass: usize, source: SimError },
    #[error("layer `{layer}`: {source}")]
    Memory { layer: String, source: MemoryError },
    #[error("layer `{layer}`: {source}")]
    Quant { layer: String, source: QuantError },
    #[error("layer `{layer}` has no input tensor")]
    MissingInput { layer: String },
    #[error("layer `{layer}`: {reason}")]
    DimMismatch { layer: String, reason: String },
    #[error(
        "layer `{layer}`: {mismatches} output mismatch(es), first at index {index}: got {got}, expected {expected}"
    )]
    Mismatch { layer: String, mismatches: usize, index: usize, got: i8, expected: i8 },
}

/// Element-wise comparison against the golden output.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct MatchReport {
    pub total: usize,
    pub mismatches: usize,
    /// `(index, got, expected)` of the first differing element.
    pub first: Option<(usize, i8, i8)>,
    pub max_abs_diff: u8,
}

impl MatchReport {
    pub fn is_match(&self) -> bool {
        self.mismatches == 0
    }
}

pub fn compare(got: &QuantizedTensor, expected: &QuantizedTensor) -> MatchReport {
    let (g, e) = (got.data(), expected.data());
    let mut r = MatchReport { total: e.len().max(g.len()), ..MatchReport::default() };
    for i in 0..r.total {
        let (a, b) = (g.get(i).copied(), e.get(i).copied());
        if a != b {
            r.mismatches += 1;
            let (a, b) = (a.unwrap_or(0), b.unwrap_or(0));
            r.first.get_or_insert((i, a, b));
            r.max_abs_diff = r.max_abs_diff.max(a.abs_diff(b));
        }
    }
    r
}

/// Golden output for a layer.
pub fn golden_output(
    spec: &ConvLayerSpec,
    weights: &WeightTensor,
    input: &QuantizedTensor,
) -> Result<QuantizedTensor, QuantError> {
    requantize_tensor(&conv2d_ref(input, weights, spec)?, &spec.requant)
}

pub fn verify_against_golden(
    record: &ExecutionRecord,
    spec: &ConvLayerSpec,
    weights: &WeightTensor,
    input: &QuantizedTensor,
) -> Result<MatchReport, QuantError> {
    Ok(compare(&record.output, &golden_output(spec, weights, input)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionRecord {
    pub layer: String,
    pub output: QuantizedTensor,
    /// Passes run back to back, merged.
    pub report: SimReport,
    pub pass_cycles: Vec<u64>,
    /// `None` when verification was off.
    pub golden_match: Option<bool>,
    pub latency_ms: f64,
    pub estimate: u64,
    pub alu_used: usize,
    pub ram_used: usize,
    /// One packet trace per pass when tracing was requested.
    pub traces: Vec<String>,
}

/// Serialized form of an [`ExecutionRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub layer: String,
    pub cycles: u64,
    pub latency_ms: f64,
    pub golden_match: Option<bool>,
    pub alu_used: usize,
    pub ram_used: usize,
}

impl ExecutionRecord {
    pub fn summary(&self) -> RecordSummary {
        RecordSummary {
            layer: self.layer.clone(),
            cycles: self.report.total_cycles,
            latency_ms: self.latency_ms,
            golden_match: self.golden_match,
            alu_used: self.alu_used,
            ram_used: self.ram_used,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.summary()).expect("record summary serializes")
    }
}

/// `latency_ms` rounded to two decimals, for display.
pub fn display_ms(ms: f64) -> String {
    format!("{ms:.2}")
}

/// Words of the padded input buffer: `z_in` everywhere, the tensor inside.
pub fn padded_input_buffer(spec: &ConvLayerSpec, input: &QuantizedTensor) -> Vec<i32> {
    let p = spec.padded_input();
    let pads = spec.pads();
    let mut buf = vec![i32::from(spec.z_in); p.len()];
    let d = input.dims();
    for y in 0..d.h {
        for x in 0..d.w {
            let dst = p.index(y + pads.top, x + pads.left, 0);
            let src = d.index(y, x, 0);
            for c in 0..d.c {
                buf[dst + c] = i32::from(input.data()[src + c]);
            }
        }
    }
    buf
}

fn kernel_for(job: &LayerJob, opts: &ExecOptions) -> Result<MappedKernel, OrchestratorError> {
    match &job.kernel {
        Some(k) => Ok(k.clone()),
        None => {
            map_conv(&job.spec, &opts.dims).map_err(|source| OrchestratorError::Map { layer: job.name.clone(), source })
        }
    }
}

struct Run {
    report: SimReport,
    pass_cycles: Vec<u64>,
    traces: Vec<String>,
}

/// Run every pass of `mk` against `mem`. Output streams are written through
/// `sink(pass_index, pass, stream)`, which returns the walk into the destination space.
fn run_passes(
    layer: &str,
    mk: &MappedKernel,
    mem: &mut HostMemory,
    opts: &ExecOptions,
    sink: impl Fn(usize, &MappedPass, &str) -> Vec<SpacedDma>,
) -> Result<Run, OrchestratorError> {
    let mem_err = |source| OrchestratorError::Memory { layer: layer.to_string(), source };
    let mut reports = Vec::with_capacity(mk.passes.len());
    let mut traces = Vec::new();
    for (i, pass) in mk.passes.iter().enumerate() {
        let sim_err = |source| OrchestratorError::Sim { layer: layer.to_string(), pass: i, source };
        let mut config = pass.config.clone();
        config.resolve_preloads(mem).map_err(mem_err)?;
        let sim_opts = SimOptions { trace: opts.trace.clone(), clock_hz: opts.clock_hz };
        let mut sim = build_array_with(&config, sim_opts).map_err(sim_err)?;
        for s in config.streams.iter().filter(|s| s.dir == crate::config::StreamDir::In) {
            for d in &s.dma {
                let words = mem.gather(d).map_err(mem_err)?;
                sim.feed(&s.name, words).map_err(sim_err)?;
            }
        }
        let limit = opts.max_cycles.unwrap_or_else(|| {
            let (num, den) = pass.initiation;
            4 * (pass.fill as u64 + (pass.input_packets() * den).div_ceil(num.max(1))) + 1000
        });
        let report = sim.run_until_idle(limit).map_err(sim_err)?;
        if let Some(w) = &opts.trace {
            traces.push(sim.dump_trace(w.clone()).map_err(sim_err)?);
        }
        for s in config.streams.iter().filter(|s| s.dir == crate::config::StreamDir::Out) {
            let words = sim.take_output(&s.name).map_err(sim_err)?;
            let mut rest = words.as_slice();
            for d in sink(i, pass, &s.name) {
                let n = (d.desc.len() as usize).min(rest.len());
                mem.scatter(&d, &rest[..n]).map_err(mem_err)?;
                rest = &rest[n..];
            }
        }
        reports.push(report);
    }
    let pass_cycles = reports.iter().map(|r| r.total_cycles).collect();
    Ok(Run { report: SimReport::sequential(&reports), pass_cycles, traces })
}

fn host_memory(spec: &ConvLayerSpec, weights: &WeightTensor, act: Vec<i32>) -> HostMemory {
    let mut mem = HostMemory::new();
    mem.insert(MemSpace::Act, act);
    mem.insert(MemSpace::Wgt, weights.data().iter().map(|&w| i32::from(w)).collect());
    mem.insert(MemSpace::Bias, spec.bias.0.clone());
    mem.insert(MemSpace::Out, vec![0; spec.output_dims().len()]);
    mem
}

fn check_input(job: &LayerJob, input: &QuantizedTensor) -> Result<(), OrchestratorError> {
    let bad = |reason: String| Err(OrchestratorError::DimMismatch { layer: job.name.clone(), reason });
    job.spec.validate().map_err(|source| OrchestratorError::Quant { layer: job.name.clone(), source })?;
    if input.dims() != job.spec.input {
        return bad(format!("input tensor {} does not match spec {}", input.dims(), job.spec.input));
    }
    if input.zero_point() != job.spec.z_in {
        return bad(format!("input zero-point {} does not match spec {}", input.zero_point(), job.spec.z_in));
    }
    let k = job.spec.kernel;
    if job.weights.dims() != (k.k, k.r, k.s, k.c) {
        return bad(format!("weights {:?} do not match kernel {k}", job.weights.dims()));
    }
    Ok(())
}

fn finish_record(
    job: &LayerJob,
    input: &QuantizedTensor,
    mk: &MappedKernel,
    run: Run,
    out_words: &[i32],
    opts: &ExecOptions,
) -> Result<ExecutionRecord, OrchestratorError> {
    let quant = |source| OrchestratorError::Quant { layer: job.name.clone(), source };
    let data = out_words.iter().map(|&v| v.clamp(-128, 127) as i8).collect();
    let output = QuantizedTensor::new(job.spec.output_dims(), data, job.spec.requant.out_scale, job.spec.requant.z_out)
        .map_err(quant)?;
    let golden_match = if opts.verify {
        let golden = golden_output(&job.spec, &job.weights, input).map_err(quant)?;
        let m = compare(&output, &golden);
        if let Some((index, got, expected)) = m.first {
            return Err(OrchestratorError::Mismatch {
                layer: job.name.clone(),
                mismatches: m.mismatches,
                index,
                got,
                expected,
            });
        }
        Some(true)
    } else {
        None
    };
    Ok(ExecutionRecord {
        layer: job.name.clone(),
        output,
        latency_ms: run.report.latency_ms(),
        report: run.report,
        pass_cycles: run.pass_cycles,
        golden_match,
        estimate: mk.estimate,
        alu_used: mk.resources.alu_used,
        ram_used: mk.resources.ram_used,
        traces: run.traces,
    })
}

/// Map (if needed), simulate and collect one layer.
pub fn execute_layer(job: &LayerJob, opts: &ExecOptions) -> Result<ExecutionRecord, OrchestratorError> {
    let input = job.input.as_ref().ok_or_else(|| OrchestratorError::MissingInput { layer: job.name.clone() })?;
    check_input(job, input)?;
    let mk = kernel_for(job, opts)?;
    let mut mem = host_memory(&job.spec, &job.weights, padded_input_buffer(&job.spec, input));
    let run = run_passes(&job.name, &mk, &mut mem, opts, |_, pass, stream| {
        pass.config.stream(stream).map(|s| s.dma.clone()).unwrap_or_default()
    })?;
    let out = mem.get(MemSpace::Out).unwrap_or_default().to_vec();
    finish_record(job, input, &mk, run, &out, opts)
}

/// Check that consecutive layers fit together, before anything runs.
pub fn check_chain(jobs: &[LayerJob]) -> Result<(), OrchestratorError> {
    if let Some(first) = jobs.first() {
        if first.input.is_none() {
            return Err(OrchestratorError::MissingInput { layer: first.name.clone() });
        }
    }
    for pair in jobs.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let bad = |reason: String| Err(OrchestratorError::DimMismatch { layer: b.name.clone(), reason });
        let out = a.spec.output_dims();
        if out != b.spec.input {
            return bad(format!("expects input {} but `{}` produces {out}", b.spec.input, a.name));
        }
        if a.spec.requant.z_out != b.spec.z_in {
            return bad(format!(
                "expects zero-point {} but `{}` produces {}",
                b.spec.z_in, a.name, a.spec.requant.z_out
            ));
        }
    }
    Ok(())
}

/// Run `jobs` in order. A layer routed `chain_next` writes its output
/// streams directly into the next layer's padded input buffer through
/// reorder walks; `to_host` layers land in their own output buffer first.
pub fn chain_layers(jobs: &[LayerJob], opts: &ExecOptions) -> Result<Vec<ExecutionRecord>, OrchestratorError> {
    check_chain(jobs)?;
    let mut records = Vec::with_capacity(jobs.len());
    let Some(first) = jobs.first() else { return Ok(records) };
    let mut input = first.input.clone().expect("checked above");
    let mut chained_act: Option<Vec<i32>> = None;
    for (i, job) in jobs.iter().enumerate() {
        check_input(job, &input)?;
        let mk = kernel_for(job, opts)?;
        let act = chained_act.take().unwrap_or_else(|| padded_input_buffer(&job.spec, &input));
        let mut mem = host_memory(&job.spec, &job.weights, act);
        let next = jobs.get(i + 1).filter(|_| job.routing == Routing::ChainNext);
        let (run, out_words, next_act) = match next {
            Some(nj) => {
                let target = nj.spec.padded_input();
                let pads = nj.spec.pads();
                mem.insert(MemSpace::Out, vec![i32::from(nj.spec.z_in); target.len()]);
                let layout = &mk.output;
                let run = run_passes(&job.name, &mk, &mut mem, opts, |i, _, stream| {
                    layout
                        .entries
                        .iter()
                        .filter(|e| e.pass == i && e.stream == stream)
                        .map(|e| SpacedDma {
                            space: MemSpace::Out,
                            desc: layout.descriptor_into(e.channel, target, pads.top, pads.left),
                        })
                        .collect()
                })?;
                let act = mem.get(MemSpace::Out).unwrap_or_default().to_vec();
                (run, interior(&act, target, pads.top, pads.left, nj.spec.input), Some(act))
            }
            None => {
                let run = run_passes(&job.name, &mk, &mut mem, opts, |_, pass, stream| {
                    pass.config.stream(stream).map(|s| s.dma.clone()).unwrap_or_default()
                })?;
                (run, mem.get(MemSpace::Out).unwrap_or_default().to_vec(), None)
            }
        };
        let rec = finish_record(job, &input, &mk, run, &out_words, opts)?;
        // The record's tensor is read back for reporting and verification;
        // the next array consumes the chained buffer itself.
        input = rec.output.clone();
        chained_act = next_act;
        records.push(rec);
    }
    Ok(records)
}

/// The unpadded region of a padded channel-last buffer.
fn interior(buf: &[i32], padded: Dims3, top: usize, left: usize, dims: Dims3) -> Vec<i32> {
    let mut out = Vec::with_capacity(dims.len());
    for y in 0..dims.h {
        let start = padded.index(y + top, left, 0);
        out.extend_from_slice(&buf[start..start + dims.w * dims.c]);
    }
    out
}

//! Acceptance criteria for the simulator, mapper, orchestrator and bench
//! harness. Each criterion prints one `PASS` or `FAIL` line with its pinned
//! tolerance; the process exits non-zero if any criterion fails.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use oracles::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xppsim::arch::ArrayDims;
use xppsim::config::{emit, parse, validate, Diagnostic};
use xppsim::layer_spec::LayerFile;
use xppsim::mapper::{map_conv, MappedKernel};
use xppsim::orchestrator::{chain_layers, execute_layer, ExecOptions, LayerJob, Routing};
use xppsim::qtensor::{
    conv2d_ref, requantize, BiasVector, ConvLayerSpec, Dims3, KernelDims, Multiplier, Padding, QuantizedTensor,
    RequantParams, WeightTensor,
};
use xppsim_bench::baseline::{calibrated_cpi, row_spec};
use xppsim_bench::suite::DESK_CROP;
use xppsim_bench::{
    published_macs_per_cycle, run_suite, scalar_baseline, table1_suite, BenchReport, RunOptions, Scale, SizeConvention,
    REFERENCE_LAYERS,
};

/// Golden equivalence is exact.
const GOLDEN_TOL: u8 = 0;
const DESK_BUDGET: Duration = Duration::from_secs(300);
const ORACLE_SPECS: usize = 100;
const REQUANT_SAMPLES: u32 = 1_000_000;
const DMA_DESCRIPTORS: usize = 1000;
const DSL_CONFIGS: usize = 200;
const MAX_ALU: usize = 40;
const MAX_RAM: usize = 16;
const MIN_MACS_PER_CYCLE: f64 = 4.0;
const BASELINE_TOL: f64 = 0.25;
const CHAIN_PAIRS: u64 = 20;
const ESTIMATE_FACTOR: f64 = 2.0;
const SEED: u64 = 42;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn desk_report() -> (BenchReport, Duration) {
    let t0 = Instant::now();
    let cases = table1_suite(Scale::Crop(DESK_CROP), SizeConvention::Input, SEED);
    let report = run_suite(&cases, &RunOptions::default()).expect("desk suite runs");
    (report, t0.elapsed())
}

fn c1_golden(report: &BenchReport, took: Duration) -> Verdict {
    let matched = report.rows.iter().filter(|r| r.golden_match).count();
    let names: Vec<&str> = report.rows.iter().map(|r| r.name.as_str()).collect();
    Verdict::new(
        report.rows.len() == 4 && matched == 4 && took <= DESK_BUDGET,
        format!(
            "{matched}/4 cases bit-exact at {DESK_CROP}x{DESK_CROP} (tolerance {GOLDEN_TOL}) [{}] in {:.1} s (budget {} s)",
            names.join(", "),
            took.as_secs_f64(),
            DESK_BUDGET.as_secs()
        ),
    )
}

fn conv_reference(cs: &ConvCase) -> Vec<i64> {
    let spec = ConvLayerSpec {
        input: Dims3::new(cs.h, cs.w, cs.c),
        kernel: KernelDims::new(cs.k, cs.r, cs.s, cs.c),
        stride: cs.stride,
        padding: if cs.same { Padding::Same } else { Padding::Valid },
        z_in: cs.z_in,
        requant: RequantParams::uniform(cs.k, Multiplier::new(1 << 30, 0), 0),
        bias: BiasVector(cs.bias.clone()),
    };
    let input = QuantizedTensor::new(spec.input, cs.input.clone(), 1.0, cs.z_in).unwrap();
    let w = WeightTensor::with_unit_scales((cs.k, cs.r, cs.s, cs.c), cs.weights.clone()).unwrap();
    conv2d_ref(&input, &w, &spec).unwrap().data().iter().map(|&v| i64::from(v)).collect()
}

fn c2_golden_model() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let conv_ok = (0..ORACLE_SPECS)
        .filter(|_| {
            let cs = random_conv_case(&mut rng);
            conv_reference(&cs) == conv_bruteforce(&cs).2
        })
        .count();
    let edges = [i32::MIN, i32::MIN + 1, -1, 0, 1, i32::MAX];
    let mut requant_bad = 0u32;
    for i in 0..REQUANT_SAMPLES {
        let acc = if i % 64 == 0 { edges[(i as usize / 64) % edges.len()] } else { rng.gen() };
        let m0 = rng.gen_range(1..=i32::MAX);
        let n = rng.gen_range(0..=31u8);
        let z: i8 = rng.gen();
        let p = RequantParams::uniform(1, Multiplier::new(m0, n), z);
        if requantize(acc, 0, &p) != requant_oracle(acc, m0, n, z) {
            requant_bad += 1;
        }
    }
    Verdict::new(
        conv_ok == ORACLE_SPECS && requant_bad == 0,
        format!(
            "conv2d_ref {conv_ok}/{ORACLE_SPECS} specs equal the nested-loop oracle; requantize {} mismatches in {REQUANT_SAMPLES} samples vs the big-integer oracle (exact)",
            requant_bad
        ),
    )
}

fn c3_dma() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let (mut addr_ok, mut bounds_ok) = (0, 0);
    for _ in 0..DMA_DESCRIPTORS {
        let desc = random_descriptor(&mut rng);
        let lo = rng.gen_range(0..100u64);
        let region = lo..lo + rng.gen_range(1..800u64);
        let got: Vec<Result<u64, i128>> = desc
            .addresses(region.clone())
            .map(|r| {
                r.map_err(|e| match e {
                    xppsim::dma::DmaError::OutOfBounds { address, .. } => address,
                    _ => i128::MIN,
                })
            })
            .collect();
        if got == dma_nested(&desc, &region) {
            addr_ok += 1;
        }
        let ((min, _), (max, _)) = desc.bounds();
        if (min, max) == dma_enumerated_bounds(&desc) {
            bounds_ok += 1;
        }
    }
    Verdict::new(
        addr_ok == DMA_DESCRIPTORS && bounds_ok == DMA_DESCRIPTORS,
        format!("addresses {addr_ok}/{DMA_DESCRIPTORS}, bounds {bounds_ok}/{DMA_DESCRIPTORS} equal the nested-loop oracle (exact)"),
    )
}

fn c4_dsl() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let round_trips = (0..DSL_CONFIGS)
        .filter(|_| {
            let c = random_config(&mut rng);
            parse(&emit(&c)).is_ok_and(|back| back == c)
        })
        .count();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/malformed");
    let mut files: Vec<_> = std::fs::read_dir(&dir).expect("fixture directory").map(|e| e.unwrap().path()).collect();
    files.sort();
    let mut diagnosed = 0;
    for f in &files {
        let text = std::fs::read_to_string(f).unwrap();
        let outcome = std::panic::catch_unwind(|| match parse(&text) {
            Err(d) => d,
            Ok(cfg) => validate(&cfg),
        });
        if outcome.is_ok_and(|d| d.iter().any(Diagnostic::is_error)) {
            diagnosed += 1;
        }
    }
    Verdict::new(
        round_trips == DSL_CONFIGS && diagnosed == files.len() && !files.is_empty(),
        format!(
            "{round_trips}/{DSL_CONFIGS} generated configs round-trip; {diagnosed}/{} malformed fixtures diagnosed without a crash",
            files.len()
        ),
    )
}

/// CSV bytes and the sorted `(file name, bytes)` trace files of one run.
type RunArtifacts = (Vec<u8>, Vec<(String, Vec<u8>)>);

fn bench_run(dir: &Path) -> Result<RunArtifacts, String> {
    let csv = dir.join("table1.csv");
    let traces = dir.join("traces");
    let out = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["run", "--suite", "table1", "--seed", &SEED.to_string(), "--csv"])
        .arg(&csv)
        .arg("--trace-dir")
        .arg(&traces)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("bench exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&traces)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    Ok((std::fs::read(&csv).map_err(|e| e.to_string())?, files))
}

fn c5_determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    match (bench_run(a.path()), bench_run(b.path())) {
        (Ok((csv_a, tr_a)), Ok((csv_b, tr_b))) => {
            let trace_bytes: usize = tr_a.iter().map(|t| t.1.len()).sum();
            Verdict::new(
                csv_a == csv_b && tr_a == tr_b && !tr_a.is_empty(),
                format!(
                    "two `bench run --suite table1 --seed {SEED}` runs: CSV identical = {}, {} trace files ({trace_bytes} bytes) identical = {}",
                    csv_a == csv_b,
                    tr_a.len(),
                    tr_a == tr_b
                ),
            )
        }
        (a, b) => Verdict::new(false, format!("bench run failed: {:?} / {:?}", a.err(), b.err())),
    }
}

/// Desk-scale and full-size shapes of every published row.
fn acceptance_mappings() -> Vec<(String, MappedKernel)> {
    let mut out = Vec::new();
    for case in table1_suite(Scale::Crop(DESK_CROP), SizeConvention::Input, SEED) {
        let job = case.job().unwrap();
        out.push((format!("{} desk", case.name), map_conv(&job.spec, &ArrayDims::default()).unwrap()));
    }
    for row in &REFERENCE_LAYERS {
        out.push((format!("{} full", row.kernel), map_conv(&row_spec(row), &ArrayDims::default()).unwrap()));
    }
    out
}

fn c6_resources() -> Verdict {
    let mut worst = (0, 0);
    let mut bad = Vec::new();
    let maps = acceptance_mappings();
    let mut configs = 0;
    for (name, mk) in &maps {
        for pass in &mk.passes {
            configs += 1;
            let cfg = &pass.config;
            let (alu, ram) = (cfg.alus.len(), cfg.rams.len());
            worst = (worst.0.max(alu), worst.1.max(ram));
            let errors = validate(cfg).iter().filter(|d| d.is_error()).count();
            if alu > MAX_ALU || ram > MAX_RAM || errors > 0 || cfg.dims != ArrayDims::default() {
                bad.push(format!("{name} {}: {alu} ALU, {ram} RAM, {errors} errors", cfg.name));
            }
        }
    }
    Verdict::new(
        bad.is_empty(),
        format!(
            "{configs} configs over {} mappings validate; peak {}/{MAX_ALU} ALU, {}/{MAX_RAM} RAM{}",
            maps.len(),
            worst.0,
            worst.1,
            if bad.is_empty() { String::new() } else { format!("; violations: {}", bad.join("; ")) }
        ),
    )
}

fn c7_throughput(report: &BenchReport) -> Verdict {
    let three: Vec<_> = report.rows.iter().filter(|r| r.kernel.r == 3 && r.kernel.s == 3).collect();
    let min = three.iter().map(|r| r.macs_per_cycle).fold(f64::INFINITY, f64::min);
    let each: Vec<String> = three.iter().map(|r| format!("{} {:.2}", r.name, r.macs_per_cycle)).collect();
    Verdict::new(
        three.len() == 3 && min >= MIN_MACS_PER_CYCLE,
        format!(
            "MAC/cycle {} (floor {MIN_MACS_PER_CYCLE}); publication-implied reference {:.2} for {} (non-binding)",
            each.join(", "),
            published_macs_per_cycle(&REFERENCE_LAYERS[0]),
            REFERENCE_LAYERS[0].kernel
        ),
    )
}

fn c8_baseline() -> Verdict {
    let cpi = calibrated_cpi();
    let mut all = true;
    let rows: Vec<String> = REFERENCE_LAYERS
        .iter()
        .map(|row| {
            let ms = scalar_baseline(&row_spec(row), cpi);
            let err = (ms - row.latency.gr740_ms) / row.latency.gr740_ms;
            let ok = err.abs() <= BASELINE_TOL;
            all &= ok;
            format!(
                "{} {ms:.2} vs {:.2} ms ({:+.1}%{})",
                row.kernel,
                row.latency.gr740_ms,
                err * 100.0,
                if ok { "" } else { " out" }
            )
        })
        .collect();
    Verdict::new(all, format!("CPI {cpi:.2}, tolerance {:.0}%: {}", BASELINE_TOL * 100.0, rows.join("; ")))
}

fn chain_layer(input: Dims3, k: usize, r: usize, stride: usize, padding: Padding, z: (i8, i8), seed: u64) -> LayerJob {
    let mut f = LayerFile::geometry(input, KernelDims::new(k, r, r, input.c), seed);
    f.stride = stride;
    f.padding = padding;
    (f.z_in, f.z_out) = z;
    f.to_job().unwrap()
}

fn c9_chain(records: &mut Vec<(u64, u64)>) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let opts = ExecOptions::default();
    let mut equal = 0;
    for i in 0..CHAIN_PAIRS {
        let input = Dims3::new(rng.gen_range(3..=8), rng.gen_range(3..=8), rng.gen_range(1..=6));
        let r = if rng.gen_bool(0.6) { 3 } else { 1 };
        let padding = if rng.gen_bool(0.75) { Padding::Same } else { Padding::Valid };
        let z: [i8; 3] = [rng.gen_range(-8..=8), rng.gen_range(-8..=8), rng.gen_range(-8..=8)];
        let mut a = chain_layer(input, rng.gen_range(1..=9), r, rng.gen_range(1..=2), padding, (z[0], z[1]), SEED + i);
        a.routing = Routing::ChainNext;
        let mid = a.spec.output_dims();
        let r2 = if mid.h >= 3 && mid.w >= 3 && rng.gen_bool(0.6) { 3 } else { 1 };
        let mut b = chain_layer(mid, rng.gen_range(1..=9), r2, 1, Padding::Same, (z[1], z[2]), SEED + 100 + i);

        let Ok(ra) = execute_layer(&a, &opts) else { continue };
        b.input = Some(ra.output.clone());
        let Ok(rb) = execute_layer(&b, &opts) else { continue };
        b.input = None;
        let Ok(chained) = chain_layers(&[a, b], &opts) else { continue };
        records.extend(chained.iter().map(|r| (r.estimate, r.report.total_cycles)));
        if chained[0].output.data() == ra.output.data() && chained[1].output.data() == rb.output.data() {
            equal += 1;
        }
    }
    Verdict::new(
        equal == CHAIN_PAIRS,
        format!("{equal}/{CHAIN_PAIRS} random layer pairs: chained output equals sequential execution bit-exactly"),
    )
}

fn c10_estimate(report: &BenchReport, chain: &[(u64, u64)]) -> Verdict {
    let mut cases: Vec<(String, u64, u64)> =
        report.rows.iter().map(|r| (r.name.clone(), r.estimate, r.cycles)).collect();
    cases.extend(chain.iter().enumerate().map(|(i, &(e, c))| (format!("chain layer {i}"), e, c)));
    let ratio = |e: u64, c: u64| e as f64 / c.max(1) as f64;
    let worst =
        cases
            .iter()
            .map(|(_, e, c)| ratio(*e, *c))
            .fold(1.0f64, |w, r| if (r.ln()).abs() > w.ln().abs() { r } else { w });
    let ok = cases.iter().all(|(_, e, c)| (1.0 / ESTIMATE_FACTOR..=ESTIMATE_FACTOR).contains(&ratio(*e, *c)));
    let desk: Vec<String> =
        report.rows.iter().map(|r| format!("{} {:.3}", r.name, ratio(r.estimate, r.cycles))).collect();
    Verdict::new(
        ok && !cases.is_empty(),
        format!(
            "estimate/simulated within {ESTIMATE_FACTOR}x on {} cases; desk {}; worst ratio {worst:.3}",
            cases.len(),
            desk.join(", ")
        ),
    )
}

fn main() {
    let (report, took) = desk_report();
    let mut chain_records = Vec::new();
    let results = [
        ("1 golden equivalence", c1_golden(&report, took)),
        ("2 golden model oracles", c2_golden_model()),
        ("3 dma oracle", c3_dma()),
        ("4 dsl round-trip", c4_dsl()),
        ("5 determinism", c5_determinism()),
        ("6 resource soundness", c6_resources()),
        ("7 throughput", c7_throughput(&report)),
        ("8 baseline calibration", c8_baseline()),
        ("9 chain equivalence", c9_chain(&mut chain_records)),
        ("10 estimate sanity", c10_estimate(&report, &chain_records)),
    ];
    let mut failed = 0;
    for (name, v) in &results {
        println!("criterion {name}: {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use xppsim::arch::ArrayDims;
use xppsim::config::emit_many;
use xppsim::layer_spec::LayerFile;
use xppsim::mapper::{map_conv, resource_report, OutputLayout, ResourceSummary};
use xppsim::orchestrator::{execute_layer, verify_against_golden, ExecOptions, OrchestratorError};
use xppsim_bench::suite::{case_from_file, DESK_CROP};
use xppsim_bench::{
    calibrated_cpi, emit_chart, emit_csv, emit_table, run_suite, table1_suite, BenchCase, BenchError, RunOptions,
    Scale, SizeConvention,
};

#[derive(Parser)]
#[command(name = "bench", version, about = "Run, verify and inspect convolution layers on the simulated array")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a suite of layers and report latency against the golden model.
    Run(RunArgs),
    /// Simulate one layer file and compare it with the golden model.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the mapper output for a layer file.
    Map {
        #[arg(long)]
        spec: PathBuf,
        /// Configuration text; a `<out>.layout.json` sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the packet trace of a layer file for a cycle window.
    Trace {
        #[arg(long)]
        spec: PathBuf,
        /// Half-open window `a..b`.
        #[arg(long, value_parser = parse_range, default_value = "0..100")]
        cycles: Range<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteName {
    Table1,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in suite; the default when no `--spec` is given.
    #[arg(long, value_enum)]
    suite: Option<SuiteName>,
    /// Extra layer files.
    #[arg(long = "spec")]
    specs: Vec<PathBuf>,
    /// Divide published image sizes by this factor instead of cropping to 16x16.
    #[arg(long, conflicts_with = "full_size")]
    scale: Option<usize>,
    /// Simulate published image sizes unchanged (slow).
    #[arg(long)]
    full_size: bool,
    /// Treat published image sizes as output sizes.
    #[arg(long)]
    size_is_output: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Concurrent cases; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Scalar baseline cycles per MAC; defaults to the calibrated value.
    #[arg(long)]
    cpi: Option<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Write per-case, per-pass packet traces into this directory.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_range, default_value = "0..200")]
    trace_cycles: Range<u64>,
}

fn parse_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected `a..b`, got `{s}`"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
    if b < a {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..b)
}

fn load(path: &Path, seed: Option<u64>) -> Result<BenchCase, BenchError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.display().to_string(), source })?;
    let layer = LayerFile::from_json(&text).map_err(|e| BenchError::Usage(format!("{}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("layer");
    Ok(case_from_file(layer, stem, seed))
}

fn write(path: &Path, text: &str) -> Result<(), BenchError> {
    std::fs::write(path, text).map_err(|source| BenchError::Io { path: path.display().to_string(), source })
}

fn cmd_run(a: RunArgs) -> Result<bool, BenchError> {
    let scale = if a.full_size {
        Scale::Divide(1)
    } else {
        match a.scale {
            Some(0) => return Err(BenchError::Usage("--scale must be at least 1".into())),
            Some(n) => Scale::Divide(n),
            None => Scale::Crop(DESK_CROP),
        }
    };
    let convention = if a.size_is_output { SizeConvention::Output } else { SizeConvention::Input };
    let mut cases = Vec::new();
    if a.suite.is_some() || a.specs.is_empty() {
        cases.extend(table1_suite(scale, convention, a.seed));
    }
    for p in &a.specs {
        cases.push(load(p, Some(a.seed))?);
    }
    let opts = RunOptions {
        seed: a.seed,
        jobs: a.jobs,
        cpi: a.cpi.unwrap_or_else(calibrated_cpi),
        exec: ExecOptions::default(),
        trace_dir: a.trace_dir,
        trace_window: a.trace_cycles,
    };
    let report = run_suite(&cases, &opts)?;
    if let Some(p) = &a.csv {
        emit_csv(&report, p)?;
    }
    if let Some(p) = &a.svg {
        emit_chart(&report, p)?;
    }
    print!("{}", emit_table(&report));
    Ok(report.all_match())
}

fn cmd_verify(spec: &Path, seed: Option<u64>) -> Result<bool, BenchError> {
    let case = load(spec, seed)?;
    let job = case.job()?;
    let opts = ExecOptions { verify: false, ..ExecOptions::default() };
    let mut rec = execute_layer(&job, &opts)
        .map_err(|source| BenchError::Run { case: case.name.clone(), source: Box::new(source) })?;
    let input = job.input.as_ref().expect("layer files always carry an input");
    let m = verify_against_golden(&rec, &job.spec, &job.weights, input)
        .map_err(|e| BenchError::Case { case: case.name.clone(), reason: e.to_string() })?;
    rec.golden_match = Some(m.is_match());
    println!("{}", rec.to_json());
    match m.first {
        None => println!("{}: {} elements match", case.name, m.total),
        Some((i, got, want)) => println!(
            "{}: {} of {} elements differ; first at {i}: got {got}, expected {want}; max |diff| {}",
            case.name, m.mismatches, m.total, m.max_abs_diff
        ),
    }
    Ok(m.is_match())
}

#[derive(Serialize)]
struct PassSidecar<'a> {
    config: &'a str,
    channels: [usize; 2],
    input_stream: &'a str,
    input_packets: u64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    strategy: &'static str,
    t_k: usize,
    t_y: usize,
    passes: Vec<PassSidecar<'a>>,
    layout: &'a OutputLayout,
    resources: &'a ResourceSummary,
    estimate: u64,
}

fn cmd_map(spec: &Path, out: &Path) -> Result<bool, BenchError> {
    let case = load(spec, None)?;
    let job = case.job()?;
    let mk = map_conv(&job.spec, &ArrayDims::default()).map_err(|source| BenchError::Run {
        case: case.name.clone(),
        source: Box::new(OrchestratorError::Map { layer: case.name.clone(), source }),
    })?;
    let configs: Vec<_> = mk.configs().cloned().collect();
    write(out, &emit_many(&configs))?;
    let sidecar = Sidecar {
        strategy: mk.strategy.kind.name(),
        t_k: mk.strategy.t_k,
        t_y: mk.strategy.t_y,
        passes: mk
            .passes
            .iter()
            .map(|p| PassSidecar {
                config: &p.config.name,
                channels: [p.channels.start, p.channels.end],
                input_stream: &p.input_stream,
                input_packets: p.input_packets(),
            })
            .collect(),
        layout: &mk.output,
        resources: &mk.resources,
        estimate: mk.estimate,
    };
    let mut side = out.as_os_str().to_owned();
    side.push(".layout.json");
    write(Path::new(&side), &(serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n"))?;
    print!("{}", resource_report(&mk));
    Ok(true)
}

fn cmd_trace(spec: &Path, cycles: Range<u64>, seed: Option<u64>) -> Result<bool, BenchError> {
    let case = load(spec, seed)?;
    let job = case.job()?;
    let opts = ExecOptions { trace: Some(cycles), ..ExecOptions::default() };
    let rec = execute_layer(&job, &opts)
        .map_err(|source| BenchError::Run { case: case.name.clone(), source: Box::new(source) })?;
    for (i, t) in rec.traces.iter().enumerate() {
        println!("# pass {i}");
        print!("{t}");
    }
    Ok(rec.golden_match == Some(true))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify { spec, seed } => cmd_verify(&spec, seed),
        Command::Map { spec, out } => cmd_map(&spec, &out),
        Command::Trace { spec, cycles, seed } => cmd_trace(&spec, cycles, seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ BenchError::GoldenMismatch { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

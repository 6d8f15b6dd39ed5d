use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kglauber::bench::{run_bench, summarize, BenchConfig};
use kglauber::exact::Ladder;
use kglauber::io::{
    csv_string, format_spins, parse_spins, read_model, write_telemetry, MatrixFormat,
};
use kglauber::parallel::{default_config, Sampler, SamplerConfig};
use kglauber::probe::{hanson_wright_probe, ProbeConfig};
use kglauber::verify::{check_samples, run_suite, Suite, VerifyOptions, VerifyReport};
use kglauber::{Error, IsingModel, Result, RngStream, SpinVector};

/// Exit code for a completed run whose checks did not all pass.
const CHECKS_FAILED: u8 = 1;

#[derive(Parser)]
#[command(
    name = "kglauber",
    version,
    about = "Parallel Ising sampling and exact verification"
)]
struct Cli {
    /// Worker threads
    #[arg(long, global = true, env = "KGLAUBER_THREADS", default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one configuration with the recursive sampler
    Sample(SampleArgs),
    /// Run exact property suites, or check a file of samples
    Verify(VerifyArgs),
    /// Per-level contraction table of the homogenized ladder, as CSV
    Spectra(SpectraArgs),
    /// Empirical tail test for random quadratic forms, as CSV
    HansonWrightProbe(ProbeArgs),
    /// Time the sampler against sequential Glauber dynamics on SK instances
    Bench(BenchArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Coupling matrix: dense CSV rows or sparse `i j value` triplets
    #[arg(long = "J", value_name = "FILE")]
    j: Option<PathBuf>,
    /// External field, one value per line (zero if omitted)
    #[arg(long = "h", value_name = "FILE")]
    h: Option<PathBuf>,
    #[arg(long, default_value = "auto", value_parser = parse_format)]
    format: MatrixFormat,
}

impl ModelArgs {
    fn load(&self) -> Result<IsingModel> {
        let j = self
            .j
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("--J is required".into()))?;
        read_model(j, self.h.as_deref(), self.format)
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c3: Option<f64>,
    /// Outer step constant; derived from ‖J‖ when omitted
    #[arg(long = "C2")]
    c2: Option<f64>,
    #[arg(long = "C4")]
    c4: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    max_tries: Option<u64>,
    /// Output file (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    telemetry: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 8)]
    n_max: usize,
    /// Sampler runs per end-to-end check
    #[arg(long, default_value_t = 20_000)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Concatenated configurations to test against --J/--h (`-` for stdin)
    #[arg(long)]
    samples: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
}

#[derive(Args)]
struct SpectraArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Use uniform subsets of [N] instead of a model
    #[arg(long, value_name = "N", conflicts_with = "j")]
    uniform: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Frobenius norms of the quadratic form, comma-separated
    #[arg(long, value_delimiter = ',')]
    frob_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20_000)]
    trials: u64,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,8")]
    threads_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    #[arg(long)]
    no_baseline: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_format(s: &str) -> std::result::Result<MatrixFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn sampler_config(a: &SampleArgs, model: &IsingModel, threads: usize) -> Result<SamplerConfig> {
    let mut cfg = match a.c2 {
        Some(c2) => SamplerConfig {
            c2,
            ..default_config(0.5, a.eps)?
        },
        None => {
            let norm = model.operator_norm(1e-9)?;
            if norm >= 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "‖J‖ = {norm:.4} ≥ 1; pass --C2 explicitly"
                )));
            }
            default_config(1.0 - norm, a.eps)?
        }
    };
    cfg.threads = threads;
    if let Some(v) = a.c1 {
        cfg.c1 = v;
    }
    if let Some(v) = a.c3 {
        cfg.c3 = v;
    }
    if let Some(v) = a.c4 {
        cfg.c4 = v;
    }
    if let Some(v) = a.max_depth {
        cfg.max_depth = v;
    }
    cfg.max_tries = a.max_tries;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_sample(a: &SampleArgs, threads: usize) -> Result<u8> {
    let model = a.model.load()?;
    let cfg = sampler_config(a, &model, threads)?;
    let (x, tel) = Sampler::new(cfg)?.sample_model(&model, &RngStream::new(a.seed))?;
    emit(a.out.as_deref(), &format_spins(&x))?;
    if let Some(p) = &a.telemetry {
        write_telemetry(p, &tel)?;
    }
    Ok(0)
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(std::fs::read_to_string(path)?)
    }
}

/// Split a stream of spins into consecutive configurations of length `n`.
fn split_samples(text: &str, n: usize) -> Result<Vec<SpinVector>> {
    let all = parse_spins(text)?;
    if n == 0 || all.len() % n != 0 {
        return Err(Error::DimensionMismatch {
            what: "sample stream length (multiple of n)",
            expected: n,
            found: all.len(),
        });
    }
    all.values()
        .chunks(n)
        .map(|c| SpinVector::full(c.to_vec()))
        .collect()
}

fn cmd_verify(a: &VerifyArgs) -> Result<u8> {
    let report = match &a.samples {
        Some(path) => {
            let model = a.model.load()?;
            let samples = split_samples(&read_input(path)?, model.n())?;
            VerifyReport {
                checks: vec![check_samples(&model, &samples, a.eps)?],
            }
        }
        None => {
            let suite: Suite = a.suite.parse()?;
            run_suite(
                suite,
                &VerifyOptions {
                    n_max: a.n_max,
                    runs: a.runs,
                    seed: a.seed,
                },
            )?
        }
    };
    print!("{}", report.table());
    Ok(if report.all_passed() {
        0
    } else {
        CHECKS_FAILED
    })
}

fn cmd_spectra(a: &SpectraArgs) -> Result<u8> {
    let ladder = match a.uniform {
        Some(n) => Ladder::uniform(n)?,
        None => Ladder::new(&a.model.load()?)?,
    };
    emit(a.out.as_deref(), &csv_string(&ladder.spectrum()?)?)?;
    Ok(0)
}

fn cmd_probe(a: &ProbeArgs) -> Result<u8> {
    let mut cfg = ProbeConfig::default_with(a.trials, a.seed);
    cfg.dim = a.dim;
    if let Some(g) = &a.frob_grid {
        cfg.frob_grid = g.clone();
    }
    if let Some(g) = &a.t_grid {
        cfg.t_grid = g.clone();
    }
    let report = hanson_wright_probe(&cfg)?;
    emit(a.out.as_deref(), &csv_string(&report.rows)?)?;
    match (report.max_passing_frob, report.recommended_c3()) {
        (Some(f), Some(c3)) => eprintln!("largest passing ‖A‖_F = {f}; recommended c3 = {c3}"),
        _ => eprintln!("no grid value passed"),
    }
    Ok(0)
}

fn cmd_bench(a: &BenchArgs) -> Result<u8> {
    let rows = run_bench(&BenchConfig {
        n: a.n,
        beta: a.beta,
        eps: a.eps,
        threads_list: a.threads_list.clone(),
        seeds: a.seeds.clone(),
        sampler: None,
        run_baseline: !a.no_baseline,
    })?;
    emit(a.out.as_deref(), &csv_string(&rows)?)?;
    for s in summarize(&rows) {
        eprintln!(
            "n={} threads={} runs={} median parallel {:.3}s, median baseline {:.3}s{}",
            s.n,
            s.threads,
            s.runs,
            s.median_wall_time_parallel,
            s.median_wall_time_glauber_baseline,
            s.speedup_vs_one_thread
                .map(|v| format!(", speedup vs 1 thread {v:.2}x"))
                .unwrap_or_default()
        );
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8> {
    if cli.threads == 0 {
        return Err(Error::InvalidConfig("--threads must be ≥ 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    match &cli.cmd {
        Command::Sample(a) => cmd_sample(a, cli.threads),
        Command::Verify(a) => cmd_verify(a),
        Command::Spectra(a) => cmd_spectra(a),
        Command::HansonWrightProbe(a) => cmd_probe(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

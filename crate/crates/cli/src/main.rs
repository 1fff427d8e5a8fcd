mod bench;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use abcs_core::{Algorithm, CompressionRatio, DenoiserSpec, Init, Method};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "abcs",
    version,
    about = "Adaptive block compressive sensing codec"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure an image and write a measurement container.
    Sense(SenseArgs),
    /// Decode a measurement container into an image.
    Reconstruct(ReconArgs),
    /// Run every (image, algorithm, C_R, method) cell over a directory and write CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct SenseArgs {
    /// 8-bit grayscale PGM or PNG.
    #[arg(short, long)]
    input: PathBuf,
    /// Output container (default: input with .abcs extension).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "dd")]
    algo: Algorithm,
    /// Compression ratio in (0, 1], decimal or fraction.
    #[arg(long)]
    cr: CompressionRatio,
    #[arg(long, default_value_t = abcs_core::sensing::DEFAULT_BLOCK)]
    block: usize,
    /// Override the DD significance threshold.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
pub struct ReconArgs {
    /// Measurement container.
    #[arg(short, long)]
    input: PathBuf,
    /// Output image; PNG if the extension is .png, PGM otherwise.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value = "idct")]
    method: Method,
    /// Denoiser as `name[:key=value,...]`, e.g. `dct:k=0.75`.
    #[arg(long, default_value = "dct")]
    denoiser: DenoiserSpec,
    /// Damping factor D_F.
    #[arg(long, default_value_t = 2.0)]
    df: f64,
    #[arg(long, default_value_t = 15)]
    iters: usize,
    /// Soft-threshold multiplier for ista and amp.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Starting estimate: zero or direct.
    #[arg(long, default_value = "zero")]
    init: Init,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Source image for PSNR/SSIM.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Write a per-iteration CSV trace (needs --ref).
    #[arg(long, requires = "reference")]
    trace: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Directory of PGM/PNG images.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "zz,bbv,dd")]
    algos: Vec<Algorithm>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.01,0.02,0.04,0.10,0.20,0.30,0.40,0.50"
    )]
    crs: Vec<CompressionRatio>,
    #[arg(long, value_delimiter = ',', default_value = "idct")]
    methods: Vec<Method>,
    /// CSV output path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = abcs_core::sensing::DEFAULT_BLOCK)]
    block: usize,
    #[arg(long, default_value = "dct")]
    denoiser: DenoiserSpec,
    #[arg(long, default_value_t = 2.0)]
    df: f64,
    #[arg(long, default_value_t = 15)]
    iters: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Timed decode runs per cell (median reported).
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Leave the timing columns empty so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    /// Evaluate cells in parallel (timings become less reliable).
    #[arg(long)]
    parallel: bool,
}

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Sense(args) => commands::sense(args),
        Command::Reconstruct(args) => commands::reconstruct(args),
        Command::Bench(args) => bench::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

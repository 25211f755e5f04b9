//! `framereg`: register feature-frame sets, generate synthetic scenes and
//! sweep outlier ratios.
//!
//! Exit codes: 0 converged, 1 input or usage error, 2 iteration budget
//! exhausted, 3 degenerate responsibilities.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use framereg_core::io::{bench_csv_string, write_text, BenchRow, FrameSetFile, ResultFile, TruthFile};
use framereg_core::{
    generate, register, run_batch, BlockNoise, EngineConfig, Extent, KernelMode, ModelKind, SceneSpec,
    Termination, TruthSpec, WarpField,
};

const EXIT_INPUT: u8 = 1;
const EXIT_MAX_ITERS: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

#[derive(Parser)]
#[command(name = "framereg", version, about = "GMM-EM registration of affine co-variant feature frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register MODEL onto DATA and write the result file.
    Match(MatchArgs),
    /// Generate a synthetic model/data pair with ground truth.
    Synth(SynthArgs),
    /// Sweep outlier ratios and write mean/variance statistics as CSV.
    BenchOutliers(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Rigid,
    Affine,
    Nonrigid,
}

impl From<Kind> for ModelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Rigid => ModelKind::Rigid,
            Kind::Affine => ModelKind::Affine,
            Kind::Nonrigid => ModelKind::NonRigid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kernel {
    PerBlock,
    SpatialShared,
}

#[derive(Args)]
struct EngineArgs {
    /// Transformation family.
    #[arg(long, value_enum, default_value = "rigid")]
    model: Kind,
    /// Initial outlier weight.
    #[arg(long, default_value_t = 0.1)]
    omega: f64,
    /// Non-rigid smoothness weight.
    #[arg(long, default_value_t = 3.0)]
    lambda: f64,
    /// Non-rigid kernel width.
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    /// Posterior a correspondence must exceed.
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// Stop when the objective changes by less than this.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 150)]
    max_iters: usize,
    /// Use frame locations only.
    #[arg(long)]
    location_only: bool,
    /// Keep at most one pair per model and per data frame.
    #[arg(long)]
    one_to_one: bool,
    /// Kernel construction for the non-rigid field.
    #[arg(long, value_enum, default_value = "per-block")]
    kernel_mode: Kernel,
    /// Run EM on the raw coordinates instead of centred, unit-RMS ones.
    #[arg(long)]
    no_normalize: bool,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        EngineConfig {
            model_kind: self.model.into(),
            omega_init: self.omega,
            lambda: self.lambda,
            beta: self.beta,
            match_threshold: self.threshold,
            tol: self.tol,
            max_iters: self.max_iters,
            location_only: self.location_only,
            one_to_one: self.one_to_one,
            normalize: !self.no_normalize,
            kernel_mode: match self.kernel_mode {
                Kernel::PerBlock => KernelMode::PerBlock,
                Kernel::SpatialShared => KernelMode::SpatialShared,
            },
            ..EngineConfig::default()
        }
    }
}

#[derive(Args)]
struct MatchArgs {
    /// Data frame-set file.
    data: PathBuf,
    /// Model frame-set file.
    #[arg(value_name = "MODEL")]
    model_file: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    /// Result file; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SceneArgs {
    /// Inlier frames per set.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Fraction of outliers in each set, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    /// Ground-truth transformation family.
    #[arg(long, value_enum, default_value = "rigid")]
    kind: Kind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Location noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Shape-column noise standard deviation; defaults to --noise.
    #[arg(long)]
    shape_noise: Option<f64>,
    /// Rigid rotation in radians.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta: f64,
    /// Rigid scale.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Translation, or constant displacement for nonrigid.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    tx: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    ty: f64,
    /// Affine matrix, row-major.
    #[arg(long, value_delimiter = ',', value_name = "B11,B12,B21,B22",
          default_value = "1,0,0,1", allow_negative_numbers = true)]
    affine: Vec<f64>,
    /// Sinusoidal warp amplitude for nonrigid.
    #[arg(long, default_value_t = 0.3)]
    warp_amplitude: f64,
    /// Sinusoidal warp frequency for nonrigid.
    #[arg(long, default_value_t = 0.5)]
    warp_frequency: f64,
    /// Locations are drawn from [-E, E]².
    #[arg(long, default_value_t = 10.0)]
    extent: f64,
}

impl SceneArgs {
    fn spec(&self) -> Result<SceneSpec> {
        let t = [self.tx, self.ty];
        let truth = match self.kind {
            Kind::Rigid => TruthSpec::Rigid { theta: self.theta, scale: self.scale, t },
            Kind::Affine => {
                let [b11, b12, b21, b22] = self.affine[..] else {
                    bail!("--affine takes four values");
                };
                TruthSpec::Affine { b: [[b11, b12], [b21, b22]], t }
            }
            Kind::Nonrigid => TruthSpec::NonRigid(WarpField {
                constant: t,
                ..WarpField::sinusoidal(self.warp_amplitude, self.warp_frequency)
            }),
        };
        let shape = self.shape_noise.unwrap_or(self.noise);
        let spec = SceneSpec {
            n_inliers: self.n,
            outlier_ratio: self.outliers,
            truth,
            noise: BlockNoise { dot: shape, ddot: shape, tdot: self.noise },
            seed: self.seed,
            extent: Extent { min: [-self.extent; 2], max: [self.extent; 2] },
            ..SceneSpec::default()
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Directory receiving model.json, data.json and truth.json.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Outlier ratios to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.15,0.25,0.35,0.45,0.5")]
    ratios: Vec<f64>,
    /// Seeded trials per ratio.
    #[arg(long, default_value_t = 30)]
    trials: usize,
    /// Add a location-only series.
    #[arg(long)]
    compare_location_only: bool,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    scene: SceneArgs,
    /// CSV destination; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_set(path: &Path) -> Result<framereg_core::FrameSet> {
    let file = FrameSetFile::read(path).with_context(|| format!("reading {}", path.display()))?;
    file.to_set().with_context(|| format!("reading {}", path.display()))
}

fn cmd_match(args: &MatchArgs) -> Result<ExitCode> {
    let data = read_set(&args.data)?;
    let model = read_set(&args.model_file)?;
    let cfg = args.engine.config();
    let res = register(&data, &model, &cfg)?;
    emit(args.out.as_deref(), &ResultFile::from_result(&res, &cfg).to_text())?;
    eprintln!(
        "{:?} after {} iterations, {} correspondences, omega {:.4}",
        res.termination,
        res.iterations,
        res.correspondences.len(),
        res.omega
    );
    Ok(match res.termination {
        Termination::Converged => ExitCode::SUCCESS,
        Termination::MaxIterations => ExitCode::from(EXIT_MAX_ITERS),
        Termination::Degenerate => ExitCode::from(EXIT_DEGENERATE),
    })
}

fn cmd_synth(args: &SynthArgs) -> Result<ExitCode> {
    let spec = args.scene.spec()?;
    let scene = generate(&spec)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let files = [
        ("model.json", FrameSetFile::from_set(&scene.model, "px").to_text()),
        ("data.json", FrameSetFile::from_set(&scene.data, "px").to_text()),
        ("truth.json", TruthFile::from_scene(&scene, &spec).to_text()),
    ];
    for (name, text) in &files {
        write_text(&args.out_dir.join(name), text)?;
    }
    println!("seed {}", spec.seed);
    println!(
        "{} frames per set, {} truth pairs, written to {}",
        scene.model.count(),
        scene.ground_truth.len(),
        args.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode> {
    if args.ratios.is_empty() {
        bail!("--ratios is empty");
    }
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let base = args.scene.spec()?;
    let specs = args
        .ratios
        .iter()
        .map(|&r| {
            let spec = SceneSpec { outlier_ratio: r, ..base };
            spec.validate().with_context(|| format!("ratio {r}"))?;
            Ok(spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let full = args.engine.config();
    full.validate()?;
    let mut modes = vec![full];
    if args.compare_location_only {
        modes.push(EngineConfig { location_only: true, ..full });
    }
    let mut rows = Vec::new();
    for cfg in &modes {
        for spec in &specs {
            let summary = run_batch(spec, cfg, args.trials)?;
            log::info!(
                "ratio {} location_only {}: f1 {:.3}, {} failures",
                spec.outlier_ratio,
                cfg.location_only,
                summary.f1.mean,
                summary.failures
            );
            rows.push(BenchRow::from_summary(&summary));
        }
    }
    emit(args.out.as_deref(), &bench_csv_string(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Match(a) => cmd_match(a),
        Command::Synth(a) => cmd_synth(a),
        Command::BenchOutliers(a) => cmd_bench(a),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_INPUT)
    })
}

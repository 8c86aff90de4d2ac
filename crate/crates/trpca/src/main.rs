//! Experiment command line: `fit`, `sweep`, and `bgsub`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trpca::datagen::GeneratorKind;
use trpca::eval::{self, SweepConfig, SweepMethod};
use trpca::fit::{FitOptions, SubspaceModel, TrimmedSpec};
use trpca::io::{self, CommandKind, ExperimentConfig, MethodKind};
use trpca::pca;
use trpca::pgm;
use trpca::{DataMatrix, Error};

#[derive(Parser)]
#[command(name = "trpca", version, about = "Robust PCA experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a subspace model to a CSV matrix or a PGM frame stack.
    Fit(FitArgs),
    /// Contamination sweep over synthetic datasets.
    Sweep(SweepArgs),
    /// Background/foreground split of a PGM frame stack.
    Bgsub(BgsubArgs),
}

#[derive(Args)]
struct CommonFitArgs {
    /// Subspace dimension.
    #[arg(long)]
    k: usize,
    /// Trim count; defaults to ceil(n/2).
    #[arg(long)]
    t: Option<usize>,
    /// Random restarts for trpca.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Relative-descent convergence threshold.
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// CSV matrix (rows are observations).
    #[arg(long, conflicts_with = "frames", required_unless_present = "frames")]
    input: Option<PathBuf>,
    /// Directory of PGM frames.
    #[arg(long)]
    frames: Option<PathBuf>,
    #[arg(long, default_value = "trpca")]
    method: String,
    #[command(flatten)]
    common: CommonFitArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Synthetic generator: data1 or data2.
    #[arg(long)]
    generator: String,
    /// Comma-separated outlier fractions.
    #[arg(long, value_delimiter = ',')]
    grid_lambda: Vec<f64>,
    /// Datasets per lambda.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    p: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// True-noise standard deviation.
    #[arg(long, default_value_t = 0.05)]
    sigma_t: f64,
    /// Outlier scale; defaults to 2 for data1 and 0.35 for data2.
    #[arg(long)]
    sigma_o: Option<f64>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BgsubArgs {
    /// Directory of PGM frames.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long, default_value = "trpca")]
    method: String,
    /// Write per-frame background/foreground PGM dumps into this directory.
    #[arg(long)]
    dump_frames: Option<PathBuf>,
    #[command(flatten)]
    common: CommonFitArgs,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) | Error::Dimension(_) => 2,
        Error::Data { .. } | Error::Io { .. } => 3,
        Error::NonFinite(_) => 4,
    }
}

fn fit_model(
    x: &DataMatrix,
    method: MethodKind,
    k: usize,
    t: usize,
    restarts: usize,
    opts: &FitOptions,
) -> trpca::Result<(SubspaceModel, Option<trpca::TrimmedFitReport>)> {
    match method {
        MethodKind::Trpca => {
            let spec = TrimmedSpec::new(t, k);
            let report = trpca::trpca_multistart(x, &spec, restarts, opts)?;
            Ok((report.model.clone(), Some(report)))
        }
        MethodKind::Pca => Ok((pca::pca_fit(x, k)?.subspace_model(), None)),
    }
}

fn run_fit(args: &FitArgs) -> trpca::Result<()> {
    let method: MethodKind = args.method.parse()?;
    let x = match (&args.input, &args.frames) {
        (Some(path), _) => io::load_csv(path)?,
        (None, Some(dir)) => pgm::load_frames(dir)?.data,
        (None, None) => {
            return Err(Error::InvalidParameter(
                "fit needs --input or --frames".into(),
            ))
        }
    };
    let t = args
        .common
        .t
        .unwrap_or_else(|| TrimmedSpec::default_t(x.nrows()));
    let opts = FitOptions {
        eps: args.common.eps,
        max_iter: args.common.max_iter,
        seed: args.common.seed,
    };
    let (model, report) = fit_model(&x, method, args.common.k, t, args.common.restarts, &opts)?;

    let mut config =
        ExperimentConfig::new(CommandKind::Fit, args.common.k, args.common.out.clone());
    config.input = args.input.clone();
    config.frames = args.frames.clone();
    config.t = Some(t);
    config.restarts = args.common.restarts;
    config.eps = args.common.eps;
    config.max_iter = args.common.max_iter;
    config.seed = args.common.seed;
    config.method = method;

    let report = match report {
        Some(report) => report,
        None => {
            // Standard PCA has no iteration history; report its (full)
            // objective so the document schema stays uniform.
            let res = trpca::residuals(&x, &model)?;
            let mean = res.values().iter().sum::<f64>() / x.nrows() as f64;
            trpca::TrimmedFitReport {
                model,
                objective_trace: vec![mean],
                selected_indices: (0..x.nrows()).collect(),
                iterations: 0,
                termination: trpca::Termination::Converged,
            }
        }
    };
    io::write_fit_document(&args.common.out, &config, &report, None)?;
    println!(
        "fit: n={} p={} k={} t={} method={} objective={:.6e} ({} iterations, {})",
        x.nrows(),
        x.ncols(),
        args.common.k,
        t,
        method.name(),
        report.final_objective(),
        report.iterations,
        report.termination,
    );
    println!("wrote {}", args.common.out.display());
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> trpca::Result<()> {
    let generator: GeneratorKind = args.generator.parse()?;
    if args.grid_lambda.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep needs at least one --grid-lambda value".into(),
        ));
    }
    let sigma_o = args.sigma_o.unwrap_or(match generator {
        GeneratorKind::Data1 => 2.0,
        GeneratorKind::Data2 => 0.35,
    });
    let config = SweepConfig {
        generator,
        n: args.n,
        p: args.p,
        k: args.k,
        sigma_t: args.sigma_t,
        sigma_o,
        lambdas: args.grid_lambda.clone(),
        methods: SweepMethod::ALL.to_vec(),
        reps: args.reps,
        restarts: args.restarts,
        eps: args.eps,
        max_iter: args.max_iter,
        seed: args.seed,
    };
    let result = eval::run_sweep(&config)?;
    io::write_sweep_csv(&args.out, &result)?;

    let mut echo = ExperimentConfig::new(CommandKind::Sweep, args.k, args.out.clone());
    echo.generator = Some(generator);
    echo.grid_lambda = args.grid_lambda.clone();
    echo.reps = args.reps;
    echo.restarts = args.restarts;
    echo.eps = args.eps;
    echo.max_iter = args.max_iter;
    echo.seed = args.seed;
    for line in echo.echo_lines() {
        println!("{line}");
    }
    for cell in &result.cells {
        // Reported values clamp tiny solver-tolerance negatives at zero;
        // the CSV keeps the raw numbers.
        println!(
            "lambda={:.3} method={} mean_tre={:.6e} std_tre={:.6e}",
            cell.lambda,
            cell.method.name(),
            cell.mean_tre.max(0.0),
            cell.std_tre,
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_bgsub(args: &BgsubArgs) -> trpca::Result<()> {
    let method: MethodKind = args.method.parse()?;
    let seq = pgm::load_frames(&args.frames)?;
    let t = args
        .common
        .t
        .unwrap_or_else(|| TrimmedSpec::default_t(seq.frames()));
    let opts = FitOptions {
        eps: args.common.eps,
        max_iter: args.common.max_iter,
        seed: args.common.seed,
    };
    let (model, _) = fit_model(
        &seq.data,
        method,
        args.common.k,
        t,
        args.common.restarts,
        &opts,
    )?;
    let split = eval::split_background(&seq.data, &model)?;
    io::write_frame_errors_csv(&args.common.out, &split.frame_errors)?;

    if let Some(dir) = &args.dump_frames {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        for i in 0..seq.frames() {
            let bg: Vec<f64> = split.background.row(i).iter().copied().collect();
            // Foreground values are signed; shift for an 8-bit preview.
            let fg: Vec<f64> = split.foreground.row(i).iter().map(|v| 0.5 + v).collect();
            pgm::write_pgm(
                &dir.join(format!("background_{i:05}.pgm")),
                seq.width,
                seq.height,
                &bg,
            )?;
            pgm::write_pgm(
                &dir.join(format!("foreground_{i:05}.pgm")),
                seq.width,
                seq.height,
                &fg,
            )?;
        }
    }
    println!(
        "bgsub: {} frames of {}x{}, k={}, t={}, method={}",
        seq.frames(),
        seq.width,
        seq.height,
        args.common.k,
        t,
        method.name(),
    );
    println!("wrote {}", args.common.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(args) => run_fit(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Bgsub(args) => run_bgsub(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

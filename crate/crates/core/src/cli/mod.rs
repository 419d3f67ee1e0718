//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on numerical failure, 2 on usage or I/O errors.

pub mod experiment;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use crate::datamodel::{AbundanceMatrix, HyperspectralImage, SignatureMatrix, UnmixingConfig};
use crate::error::{Result, UnmixError};
use crate::io::{
    read_cube, read_run_summary, read_spectral_library, write_cube, write_report, write_run_summary,
    write_spectral_library, SpectralLibrary,
};
use crate::metrics::{evaluate, evaluate_result, EvaluationReport};
use crate::clustering::{fcm, FcmOptions};
use crate::pipeline::{run_pipeline, InitMethod, PipelineOptions};
use crate::synth::{bundled_spectral_library, generate_synthetic, SceneOptions};
use crate::unmix::AlgorithmVariant;

pub const SCENE_CUBE: &str = "Y.cube";
pub const TRUE_SIGNATURES: &str = "A_true.csv";
pub const TRUE_ABUNDANCES: &str = "S_true.cube";
pub const EST_SIGNATURES: &str = "A.csv";
pub const EST_ABUNDANCES: &str = "S.cube";
pub const RUN_SUMMARY: &str = "run.json";
pub const REPORT: &str = "report.json";

#[derive(Debug, Parser)]
#[command(name = "hsunmix", version, about = "Hyperspectral unmixing over clustered pixel networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene (Y.cube, A_true.csv, S_true.cube).
    Synth(SynthArgs),
    /// Fuzzy c-means clustering of a cube.
    Cluster(ClusterArgs),
    /// Unmix a cube.
    Unmix(UnmixArgs),
    /// Score an unmixing result against ground truth.
    Eval(EvalArgs),
    /// Run a Monte-Carlo experiment described by a spec file.
    Experiment(ExperimentArgs),
}

fn parse_odd(s: &str) -> std::result::Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v % 2 == 1 {
        Ok(v)
    } else {
        Err(format!("filter size must be odd, got {v}"))
    }
}

fn parse_snr(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid SNR `{s}`"))?;
    if v.is_nan() || v == f64::NEG_INFINITY {
        return Err(format!("invalid SNR `{s}`"));
    }
    Ok(v)
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of endmembers.
    #[arg(long, default_value_t = 6)]
    pub c: usize,
    #[arg(long, default_value_t = 40)]
    pub width: usize,
    #[arg(long, default_value_t = 40)]
    pub height: usize,
    #[arg(long, default_value_t = 8)]
    pub patch: usize,
    /// Side of the uniform low-pass kernel (odd).
    #[arg(long, default_value_t = 7, value_parser = parse_odd)]
    pub filter: usize,
    /// Target SNR in dB, or `inf` for a noiseless scene.
    #[arg(long, default_value = "25", value_parser = parse_snr)]
    pub snr: f64,
    #[arg(long, default_value_t = 0.8)]
    pub purity_cap: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spectral library CSV; the bundled library when omitted.
    #[arg(long)]
    pub library: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    pub input: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub clusters: usize,
    #[arg(long, default_value_t = 2.0)]
    pub m: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct UnmixArgs {
    pub input: PathBuf,
    #[arg(long, default_value = "proposed")]
    pub variant: AlgorithmVariant,
    /// Number of endmembers.
    #[arg(long, default_value_t = 6)]
    pub c: usize,
    /// Cluster count (proposed variant only).
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long, default_value = "vca")]
    pub init: InitMethod,
    #[arg(long, default_value_t = 0.02)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Sparsity weight; estimated from the data when omitted.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scene directory holding A_true.csv and S_true.cube; writes report.json when given.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scene directory holding A_true.csv and S_true.cube.
    #[arg(long)]
    pub truth: PathBuf,
    /// Directory written by `unmix`.
    #[arg(long)]
    pub result: PathBuf,
    /// Report path; defaults to `<result>/report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Draw one signature set for every run instead of one per run.
    #[arg(long)]
    pub fix_signatures: bool,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| UnmixError::io(dir, e))
}

fn matrix_as_cube(data: Array2<f64>, width: usize, height: usize) -> Result<HyperspectralImage> {
    HyperspectralImage::new(data, width, height)
}

fn band_axis(image: &HyperspectralImage) -> Vec<f64> {
    image
        .wavelengths()
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| (1..=image.bands()).map(|b| b as f64).collect())
}

fn signature_library(a: &SignatureMatrix, wavelengths: Vec<f64>, prefix: &str) -> SpectralLibrary {
    SpectralLibrary {
        wavelengths,
        names: (1..=a.endmembers()).map(|j| format!("{prefix}{j}")).collect(),
        signatures: a.clone(),
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let library = match &args.library {
        Some(path) => read_spectral_library(path)?,
        None => bundled_spectral_library()?,
    };
    let opts = SceneOptions {
        endmembers: args.c,
        width: args.width,
        height: args.height,
        patch: args.patch,
        filter: args.filter,
        snr_db: args.snr,
        purity_cap: args.purity_cap,
        seed: args.seed,
        signature_seed: None,
    };
    let scene = generate_synthetic(&library.signatures, Some(&library.wavelengths), &opts)?;
    ensure_dir(&args.out)?;
    write_cube(args.out.join(SCENE_CUBE), &scene.y)?;
    let names = scene.library_columns.iter().map(|&j| library.names[j].clone()).collect();
    write_spectral_library(
        args.out.join(TRUE_SIGNATURES),
        &SpectralLibrary {
            wavelengths: library.wavelengths.clone(),
            names,
            signatures: scene.a_true.clone(),
        },
    )?;
    write_cube(
        args.out.join(TRUE_ABUNDANCES),
        &matrix_as_cube(scene.s_true.data().clone(), args.width, args.height)?,
    )?;
    eprintln!(
        "wrote {} ({}x{} pixels, {} bands, {} endmembers, SNR {} dB)",
        args.out.display(),
        args.width,
        args.height,
        scene.y.bands(),
        args.c,
        args.snr
    );
    Ok(())
}

pub fn cmd_cluster(args: &ClusterArgs) -> Result<()> {
    let image = read_cube(&args.input)?;
    let out = fcm(
        &image,
        &FcmOptions {
            clusters: args.clusters,
            fuzzifier: args.m,
            tol: args.tol,
            max_iter: args.max_iter,
            seed: args.seed,
        },
    )?;
    ensure_dir(&args.out)?;
    let labels = Array2::from_shape_fn((1, image.pixels()), |(_, k)| out.labels[k] as f64);
    write_cube(args.out.join("labels.cube"), &matrix_as_cube(labels, image.width(), image.height())?)?;
    write_cube(
        args.out.join("memberships.cube"),
        &matrix_as_cube(out.memberships.clone(), image.width(), image.height())?,
    )?;
    let centers = SignatureMatrix::new(out.centers.mapv(|v| v.max(0.0)))?;
    write_spectral_library(
        args.out.join("centers.csv"),
        &signature_library(&centers, band_axis(&image), "cluster_"),
    )?;
    eprintln!("fcm finished after {} iterations", out.iterations);
    Ok(())
}

fn load_truth(dir: &Path) -> Result<(SignatureMatrix, AbundanceMatrix)> {
    let a = read_spectral_library(dir.join(TRUE_SIGNATURES))?.signatures;
    let s = AbundanceMatrix::new(read_cube(dir.join(TRUE_ABUNDANCES))?.into_data())?;
    Ok((a, s))
}

fn print_report(report: &EvaluationReport) {
    println!("rms_sad = {:.6} rad", report.rms_sad);
    println!("rms_aad = {:.6} rad", report.rms_aad);
    for (i, v) in report.per_endmember_sad.iter().enumerate() {
        println!("  endmember {} -> estimate {}: SAD {:.6}", i + 1, report.matching[i] + 1, v);
    }
}

pub fn cmd_unmix(args: &UnmixArgs) -> Result<()> {
    let image = read_cube(&args.input)?;
    if !args.variant.uses_clusters() && args.clusters.is_some() {
        eprintln!("warning: variant `{}` does not cluster; ignoring --clusters", args.variant);
    }
    let config = UnmixingConfig {
        mu: args.mu,
        eta: args.eta,
        q: args.q,
        lambda: args.lambda,
        max_iter: args.max_iter,
        eps: args.eps,
        clusters: args.clusters.unwrap_or(args.c),
        seed: args.seed,
        variant: args.variant,
    };
    let opts = PipelineOptions {
        config: config.clone(),
        endmembers: args.c,
        init: args.init,
        ..Default::default()
    };
    let out = run_pipeline(&image, &opts)?;
    let result = &out.result;

    ensure_dir(&args.out)?;
    write_spectral_library(
        args.out.join(EST_SIGNATURES),
        &signature_library(&result.a, band_axis(&image), "endmember_"),
    )?;
    write_cube(
        args.out.join(EST_ABUNDANCES),
        &matrix_as_cube(result.s.data().clone(), image.width(), image.height())?,
    )?;
    write_run_summary(args.out.join(RUN_SUMMARY), &config, result)?;
    if let Some(clusters) = &out.clusters {
        let labels = Array2::from_shape_fn((1, image.pixels()), |(_, k)| clusters.labels[k] as f64);
        write_cube(args.out.join("labels.cube"), &matrix_as_cube(labels, image.width(), image.height())?)?;
    }
    eprintln!(
        "{}: {} iterations ({}), final cost {:.6e}",
        args.variant,
        result.iterations_run,
        result.stop_reason,
        result.cost_trace.last().copied().unwrap_or(f64::NAN)
    );

    if let Some(truth) = &args.truth {
        let (a_true, s_true) = load_truth(truth)?;
        let report = evaluate_result(&a_true, &s_true, result)?;
        write_report(args.out.join(REPORT), &report, &result.cost_trace, &config)?;
        print_report(&report);
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let (a_true, s_true) = load_truth(&args.truth)?;
    let a_est = read_spectral_library(args.result.join(EST_SIGNATURES))?.signatures;
    let s_est = AbundanceMatrix::new(read_cube(args.result.join(EST_ABUNDANCES))?.into_data())?;
    let summary = read_run_summary(args.result.join(RUN_SUMMARY))?;
    let report = evaluate(&a_true, &s_true, &a_est, &s_est)?;
    let path = args.out.clone().unwrap_or_else(|| args.result.join(REPORT));
    write_report(&path, &report, &summary.cost_trace, &summary.config)?;
    print_report(&report);
    Ok(())
}

pub fn cmd_experiment_file(args: &ExperimentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.spec).map_err(|e| UnmixError::io(&args.spec, e))?;
    let mut spec = experiment::parse_experiment_spec(&text)?;
    spec.fix_signatures |= args.fix_signatures;
    let (rows, agg) = experiment::cmd_experiment(&spec, &args.out)?;
    eprintln!("{} cells, {} aggregate rows written to {}", rows.len(), agg.len(), args.out.display());
    for row in &agg {
        println!(
            "{:<20} snr={:<5} clusters={:<3} rms_sad={:.4} rms_aad={:.4}",
            row.variant, row.snr_db, row.clusters, row.rms_sad, row.rms_aad
        );
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Unmix(args) => cmd_unmix(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Experiment(args) => cmd_experiment_file(args),
    }
}

pub fn exit_code(err: &UnmixError) -> u8 {
    match err {
        UnmixError::NumericalFailure { .. } => 1,
        _ => 2,
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! Monte-Carlo experiment harness.
//!
//! An experiment file is a flat list of `key = value` lines. `#` starts a
//! comment, lists are comma separated, and unknown or repeated keys are
//! rejected. Each cell `(variant, snr, clusters, run)` draws a fresh scene
//! whose seed depends only on the master seed, the SNR index and the run
//! index, so every variant is scored on the same scenes and any single cell
//! can be re-run in isolation.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::datamodel::{SignatureMatrix, UnmixingConfig};
use crate::error::{Result, UnmixError};
use crate::io::read_spectral_library;
use crate::metrics::evaluate_result;
use crate::pipeline::{derive_seed, run_pipeline, InitMethod, PipelineOptions};
use crate::synth::{bundled_spectral_library, generate_synthetic, SceneOptions};
use crate::unmix::{AlgorithmVariant, StopReason};

const SCENE_STREAM: u64 = 11;
const SOLVER_STREAM: u64 = 12;
const SIGNATURE_STREAM: u64 = 13;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub variants: Vec<AlgorithmVariant>,
    pub snr_levels: Vec<f64>,
    pub cluster_counts: Vec<usize>,
    pub monte_carlo_runs: usize,
    /// Scene template; `snr_db`, `seed` and `signature_seed` are set per cell.
    pub scene: SceneOptions,
    /// Solver template; `variant`, `clusters` and `seed` are set per cell.
    pub solver: UnmixingConfig,
    /// Exponent used by the `lq_nmf` baseline.
    pub lq_nmf_q: f64,
    pub init: InitMethod,
    pub fix_signatures: bool,
    pub library: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            variants: vec![
                AlgorithmVariant::Fcls,
                AlgorithmVariant::Nmf,
                AlgorithmVariant::LqNmf,
                AlgorithmVariant::Distributed,
                AlgorithmVariant::SparseDistributed,
                AlgorithmVariant::ClusteredSparseDistributed,
            ],
            snr_levels: vec![15.0, 20.0, 25.0, 30.0, 35.0],
            cluster_counts: vec![6],
            monte_carlo_runs: 20,
            scene: SceneOptions::default(),
            solver: UnmixingConfig::default(),
            lq_nmf_q: 0.5,
            init: InitMethod::Vca,
            fix_signatures: false,
            library: None,
            seed: 0,
        }
    }
}

fn parse_list<T>(value: &str, line: u64, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(UnmixError::Parse { line, message: "empty list".into() });
    }
    items
        .into_iter()
        .map(|item| {
            parse(item).ok_or_else(|| UnmixError::Parse {
                line,
                message: format!("cannot parse list item `{item}`"),
            })
        })
        .collect()
}

/// `a..b` expands to the inclusive integer range; otherwise a plain list.
fn parse_counts(value: &str, line: u64) -> Result<Vec<usize>> {
    if let Some((lo, hi)) = value.split_once("..") {
        let bad = || UnmixError::Parse { line, message: format!("bad range `{value}`") };
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    parse_list(value, line, |s| s.parse().ok())
}

fn scalar<T: std::str::FromStr>(value: &str, line: u64, key: &str) -> Result<T> {
    value.parse().map_err(|_| UnmixError::Parse {
        line,
        message: format!("invalid value `{value}` for `{key}`"),
    })
}

pub fn parse_experiment_spec(text: &str) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u64 + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| UnmixError::Parse {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(UnmixError::Parse { line, message: format!("duplicate key `{key}`") });
        }
        match key {
            "variants" => spec.variants = parse_list(value, line, |s| s.parse().ok())?,
            "snr_levels" => spec.snr_levels = parse_list(value, line, |s| s.parse().ok())?,
            "cluster_counts" => spec.cluster_counts = parse_counts(value, line)?,
            "runs" => spec.monte_carlo_runs = scalar(value, line, key)?,
            "seed" => spec.seed = scalar(value, line, key)?,
            "width" => spec.scene.width = scalar(value, line, key)?,
            "height" => spec.scene.height = scalar(value, line, key)?,
            "endmembers" => spec.scene.endmembers = scalar(value, line, key)?,
            "patch" => spec.scene.patch = scalar(value, line, key)?,
            "filter" => spec.scene.filter = scalar(value, line, key)?,
            "purity_cap" => spec.scene.purity_cap = scalar(value, line, key)?,
            "mu" => spec.solver.mu = scalar(value, line, key)?,
            "eta" => spec.solver.eta = scalar(value, line, key)?,
            "q" => spec.solver.q = scalar(value, line, key)?,
            "lambda" => spec.solver.lambda = Some(scalar(value, line, key)?),
            "max_iter" => spec.solver.max_iter = scalar(value, line, key)?,
            "eps" => spec.solver.eps = scalar(value, line, key)?,
            "lq_nmf_q" => spec.lq_nmf_q = scalar(value, line, key)?,
            "init" => spec.init = scalar(value, line, key)?,
            "fix_signatures" => spec.fix_signatures = scalar(value, line, key)?,
            "library" => spec.library = Some(PathBuf::from(value)),
            _ => return Err(UnmixError::Parse { line, message: format!("unknown key `{key}`") }),
        }
    }
    spec.validate()?;
    Ok(spec)
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.snr_levels.is_empty() || self.cluster_counts.is_empty() {
            return Err(UnmixError::invalid("variants, snr_levels and cluster_counts must be nonempty"));
        }
        if self.monte_carlo_runs == 0 {
            return Err(UnmixError::invalid("runs must be at least 1"));
        }
        if self.cluster_counts.contains(&0) {
            return Err(UnmixError::invalid("cluster counts must be positive"));
        }
        if !(self.lq_nmf_q > 0.0 && self.lq_nmf_q <= 1.0) {
            return Err(UnmixError::invalid("lq_nmf_q must lie in (0, 1]"));
        }
        self.solver.validate()
    }

    /// Cells in output order: variant, SNR, cluster count, run.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &variant in &self.variants {
            for snr_index in 0..self.snr_levels.len() {
                let counts: Vec<usize> = if variant.uses_clusters() { self.cluster_counts.clone() } else { vec![0] };
                for clusters in counts {
                    for run in 0..self.monte_carlo_runs {
                        cells.push(Cell { variant, snr_index, clusters, run });
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub variant: AlgorithmVariant,
    pub snr_index: usize,
    /// 0 for variants that do not cluster.
    pub clusters: usize,
    pub run: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub variant: AlgorithmVariant,
    pub snr_db: f64,
    pub clusters: usize,
    pub run: usize,
    pub rms_sad: f64,
    pub rms_aad: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub variant: AlgorithmVariant,
    pub snr_db: f64,
    pub clusters: usize,
    pub runs: usize,
    pub rms_sad: f64,
    pub rms_aad: f64,
    pub iterations: f64,
}

/// Library used by an experiment, loaded once.
pub struct ExperimentLibrary {
    pub signatures: SignatureMatrix,
    pub wavelengths: Vec<f64>,
}

pub fn load_library(spec: &ExperimentSpec) -> Result<ExperimentLibrary> {
    let lib = match &spec.library {
        Some(path) => read_spectral_library(path)?,
        None => bundled_spectral_library()?,
    };
    Ok(ExperimentLibrary { signatures: lib.signatures, wavelengths: lib.wavelengths })
}

pub fn scene_options(spec: &ExperimentSpec, cell: &Cell) -> SceneOptions {
    SceneOptions {
        snr_db: spec.snr_levels[cell.snr_index],
        seed: derive_seed(spec.seed, &[SCENE_STREAM, cell.snr_index as u64, cell.run as u64]),
        signature_seed: spec.fix_signatures.then(|| derive_seed(spec.seed, &[SIGNATURE_STREAM])),
        ..spec.scene.clone()
    }
}

pub fn pipeline_options(spec: &ExperimentSpec, cell: &Cell) -> PipelineOptions {
    let mut config = UnmixingConfig {
        variant: cell.variant,
        seed: derive_seed(spec.seed, &[SOLVER_STREAM, cell.snr_index as u64, cell.run as u64]),
        ..spec.solver.clone()
    };
    if cell.variant.uses_clusters() {
        config.clusters = cell.clusters;
    }
    if cell.variant == AlgorithmVariant::LqNmf {
        config.q = spec.lq_nmf_q;
    }
    PipelineOptions {
        config,
        endmembers: spec.scene.endmembers,
        init: spec.init,
        ..Default::default()
    }
}

/// Runs one cell: scene generation, full pipeline, metrics.
pub fn run_cell(spec: &ExperimentSpec, library: &ExperimentLibrary, cell: &Cell) -> Result<CellResult> {
    let scene = generate_synthetic(&library.signatures, Some(&library.wavelengths), &scene_options(spec, cell))?;
    let out = run_pipeline(&scene.y, &pipeline_options(spec, cell))?;
    let report = evaluate_result(&scene.a_true, &scene.s_true, &out.result)?;
    Ok(CellResult {
        variant: cell.variant,
        snr_db: spec.snr_levels[cell.snr_index],
        clusters: cell.clusters,
        run: cell.run,
        rms_sad: report.rms_sad,
        rms_aad: report.rms_aad,
        iterations: out.result.iterations_run,
        stop_reason: out.result.stop_reason,
    })
}

/// Runs every cell in parallel; rows come back in cell order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let library = load_library(spec)?;
    spec.cells()
        .par_iter()
        .map(|cell| run_cell(spec, &library, cell))
        .collect()
}

/// Per `(variant, snr, clusters)` means, in first-appearance order.
pub fn aggregate(rows: &[CellResult]) -> Vec<AggregateRow> {
    let mut groups: Vec<(AlgorithmVariant, f64, usize, Vec<&CellResult>)> = Vec::new();
    for row in rows {
        match groups
            .iter_mut()
            .find(|(v, s, c, _)| *v == row.variant && s.total_cmp(&row.snr_db).is_eq() && *c == row.clusters)
        {
            Some(group) => group.3.push(row),
            None => groups.push((row.variant, row.snr_db, row.clusters, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|(variant, snr_db, clusters, members)| {
            let n = members.len() as f64;
            AggregateRow {
                variant,
                snr_db,
                clusters,
                runs: members.len(),
                rms_sad: members.iter().map(|r| r.rms_sad).sum::<f64>() / n,
                rms_aad: members.iter().map(|r| r.rms_aad).sum::<f64>() / n,
                iterations: members.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
            }
        })
        .collect()
}

pub const RESULT_COLUMNS: [&str; 8] =
    ["variant", "snr_db", "clusters", "run", "rms_sad", "rms_aad", "iterations", "stop_reason"];
pub const AGGREGATE_COLUMNS: [&str; 7] =
    ["variant", "snr_db", "clusters", "runs", "rms_sad", "rms_aad", "iterations"];

pub fn results_csv(rows: &[CellResult]) -> String {
    let mut out = RESULT_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.variant, r.snr_db, r.clusters, r.run, r.rms_sad, r.rms_aad, r.iterations, r.stop_reason
        )
        .unwrap();
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = AGGREGATE_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.variant, r.snr_db, r.clusters, r.runs, r.rms_sad, r.rms_aad, r.iterations
        )
        .unwrap();
    }
    out
}

/// Runs the experiment and writes `results.csv` and `aggregate.csv` into `out_dir`.
pub fn cmd_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<(Vec<CellResult>, Vec<AggregateRow>)> {
    std::fs::create_dir_all(out_dir).map_err(|e| UnmixError::io(out_dir, e))?;
    let rows = run_experiment(spec)?;
    let agg = aggregate(&rows);
    let results_path = out_dir.join("results.csv");
    std::fs::write(&results_path, results_csv(&rows)).map_err(|e| UnmixError::io(&results_path, e))?;
    let agg_path = out_dir.join("aggregate.csv");
    std::fs::write(&agg_path, aggregate_csv(&agg)).map_err(|e| UnmixError::io(&agg_path, e))?;
    Ok((rows, agg))
}

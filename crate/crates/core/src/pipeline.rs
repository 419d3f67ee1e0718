//! End-to-end unmixing: optional fuzzy c-means clustering, initialization,
//! then the iterative solver.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::clustering::{fcm, FcmOptions};
use crate::datamodel::{AbundanceMatrix, ClusterAssignment, HyperspectralImage, SignatureMatrix, UnmixingConfig};
use crate::error::{Result, UnmixError};
use crate::init::{random_init, vca};
use crate::unmix::{fcls_abundances, run_unmixing, UnmixingResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMethod {
    /// VCA signatures with constrained least-squares abundances.
    Vca,
    Random,
}

impl fmt::Display for InitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMethod::Vca => "vca",
            InitMethod::Random => "random",
        })
    }
}

impl FromStr for InitMethod {
    type Err = UnmixError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vca" => Ok(InitMethod::Vca),
            "random" => Ok(InitMethod::Random),
            other => Err(UnmixError::invalid(format!("unknown init method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub config: UnmixingConfig,
    pub endmembers: usize,
    pub init: InitMethod,
    pub fuzzifier: f64,
    /// Iteration cap for the least-squares pass that seeds abundances after VCA.
    pub init_fcls_iter: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            config: UnmixingConfig::default(),
            endmembers: 6,
            init: InitMethod::Vca,
            fuzzifier: 2.0,
            init_fcls_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub result: UnmixingResult,
    pub clusters: Option<ClusterAssignment>,
    pub init_a: SignatureMatrix,
}

/// SplitMix64 over a master seed and a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

pub fn initialize(
    image: &HyperspectralImage,
    endmembers: usize,
    method: InitMethod,
    seed: u64,
    fcls_iter: usize,
) -> Result<(SignatureMatrix, AbundanceMatrix)> {
    match method {
        InitMethod::Vca => {
            let a = vca(image, endmembers, seed)?;
            let s = if fcls_iter == 0 {
                AbundanceMatrix::new(Array2::from_elem(
                    (endmembers, image.pixels()),
                    1.0 / endmembers as f64,
                ))?
            } else {
                fcls_abundances(image, &a, fcls_iter, 1e-8)?
            };
            Ok((a, s))
        }
        InitMethod::Random => random_init(image.bands(), endmembers, image.pixels(), seed),
    }
}

pub fn run_pipeline(image: &HyperspectralImage, opts: &PipelineOptions) -> Result<PipelineOutput> {
    let cfg = &opts.config;
    cfg.validate()?;
    let clusters = if cfg.variant.uses_clusters() {
        Some(fcm(
            image,
            &FcmOptions {
                clusters: cfg.clusters,
                fuzzifier: opts.fuzzifier,
                seed: derive_seed(cfg.seed, &[1]),
                ..Default::default()
            },
        )?)
    } else {
        None
    };
    let (a, s) = initialize(
        image,
        opts.endmembers,
        opts.init,
        derive_seed(cfg.seed, &[2]),
        opts.init_fcls_iter,
    )?;
    let result = run_unmixing(
        image,
        cfg,
        a.clone(),
        s,
        clusters.as_ref().map(|c| c.labels.as_slice()),
    )?;
    Ok(PipelineOutput {
        result,
        clusters,
        init_a: a,
    })
}

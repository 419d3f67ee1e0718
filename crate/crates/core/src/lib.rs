//! Hyperspectral unmixing toolkit.
//!
//! Linear mixing with abundances on the simplex, solved by diffusion-style
//! cooperation between neighboring pixels restricted to fuzzy c-means
//! clusters, with an optional l_q sparsity penalty. Baselines (NMF, l_q-NMF,
//! unclustered diffusion, FCLS), synthetic scenes, metrics and file formats
//! are included.

pub mod cli;
pub mod clustering;
pub mod datamodel;
pub mod error;
pub mod init;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod regularizers;
pub mod synth;
pub mod unmix;

pub use datamodel::{
    AbundanceMatrix, ClusterAssignment, HyperspectralImage, NeighborhoodSystem, SignatureMatrix, UnmixingConfig,
};
pub use error::{Result, UnmixError};
pub use unmix::{AlgorithmVariant, StopReason, UnmixingResult};

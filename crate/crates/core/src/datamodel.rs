//! Core value types for the linear mixing model `Y = A S + V` and the pixel-grid
//! network the distributed solvers run on.
//!
//! Pixels are indexed row-major from the top-left corner: pixel `k` sits at
//! row `k / width`, column `k % width`. Every module shares this convention.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, UnmixError};
use crate::unmix::AlgorithmVariant;

/// Default tolerance for the sum-to-one check on abundance columns.
pub const ASC_TOLERANCE: f64 = 1e-9;

/// Observation matrix `Y` (bands x pixels) with its spatial layout.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperspectralImage {
    data: Array2<f64>,
    width: usize,
    height: usize,
    wavelengths: Option<Vec<f64>>,
}

impl HyperspectralImage {
    /// Wraps a `bands x pixels` matrix. Entries must be finite; they may be
    /// slightly negative when the cube carries additive zero-mean noise.
    pub fn new(data: Array2<f64>, width: usize, height: usize) -> Result<Self> {
        let (bands, pixels) = data.dim();
        if bands == 0 || pixels == 0 {
            return Err(UnmixError::invalid("image needs at least one band and one pixel"));
        }
        if width == 0 || height == 0 || width * height != pixels {
            return Err(UnmixError::invalid(format!(
                "grid {width}x{height} does not match {pixels} pixels"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(UnmixError::invalid("image contains non-finite values"));
        }
        Ok(Self {
            data,
            width,
            height,
            wavelengths: None,
        })
    }

    pub fn with_wavelengths(mut self, wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != self.bands() {
            return Err(UnmixError::invalid(format!(
                "{} wavelengths for {} bands",
                wavelengths.len(),
                self.bands()
            )));
        }
        self.wavelengths = Some(wavelengths);
        Ok(self)
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn bands(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.data.ncols()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn wavelengths(&self) -> Option<&[f64]> {
        self.wavelengths.as_deref()
    }

    /// Spectrum of pixel `k`.
    pub fn pixel(&self, k: usize) -> ArrayView1<'_, f64> {
        self.data.column(k)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }
}

/// Endmember matrix `A` (bands x endmembers), nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMatrix {
    data: Array2<f64>,
}

impl SignatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (bands, endmembers) = data.dim();
        if bands == 0 || endmembers == 0 {
            return Err(UnmixError::invalid("signature matrix must be at least 1x1"));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(UnmixError::invalid(format!(
                "signature entries must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn bands(&self) -> usize {
        self.data.nrows()
    }

    pub fn endmembers(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.data.column(j)
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() || columns.iter().any(|&j| j >= self.endmembers()) {
            return Err(UnmixError::invalid("column selection out of range"));
        }
        Ok(Self {
            data: self.data.select(ndarray::Axis(1), columns),
        })
    }
}

/// Abundance matrix `S` (endmembers x pixels); every column lies on the unit simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMatrix {
    data: Array2<f64>,
}

impl AbundanceMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(UnmixError::invalid("abundance matrix must be at least 1x1"));
        }
        if !validate_abundances(data.view(), ASC_TOLERANCE) {
            return Err(UnmixError::invalid(
                "abundance columns must be nonnegative and sum to one",
            ));
        }
        Ok(Self { data })
    }

    /// Caller guarantees feasibility (output of the simplex projection).
    pub(crate) fn from_projected(data: Array2<f64>) -> Self {
        debug_assert!(validate_abundances(data.view(), ASC_TOLERANCE));
        Self { data }
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn endmembers(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, k: usize) -> ArrayView1<'_, f64> {
        self.data.column(k)
    }
}

/// True iff every column is elementwise nonnegative and sums to one within `tol`.
pub fn validate_abundances(s: ArrayView2<'_, f64>, tol: f64) -> bool {
    s.columns().into_iter().all(|col| {
        col.iter().all(|&v| v >= 0.0) && (col.sum() - 1.0).abs() <= tol
    })
}

/// 8-connected pixel graph with optional row-normalized similarity weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSystem {
    width: usize,
    height: usize,
    neighbors: Vec<Vec<usize>>,
    weights: Option<Vec<Vec<f64>>>,
}

impl NeighborhoodSystem {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Neighbors of `k`, excluding `k`, in ascending pixel order.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    /// Weights aligned with [`Self::neighbors`], once computed.
    pub fn weights(&self, k: usize) -> Option<&[f64]> {
        self.weights.as_ref().map(|w| w[k].as_slice())
    }

    pub fn has_weights(&self) -> bool {
        self.weights.is_some()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    pub(crate) fn with_weights(mut self, weights: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(weights.len(), self.neighbors.len());
        self.weights = Some(weights);
        self
    }
}

/// Builds the 8-adjacency over a `width x height` row-major grid.
pub fn build_neighborhood(width: usize, height: usize) -> Result<NeighborhoodSystem> {
    if width == 0 || height == 0 {
        return Err(UnmixError::invalid("grid dimensions must be positive"));
    }
    let mut neighbors = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let mut list = Vec::with_capacity(8);
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let r = row as isize + dr;
                    let c = col as isize + dc;
                    if r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width {
                        list.push(r as usize * width + c as usize);
                    }
                }
            }
            neighbors.push(list);
        }
    }
    Ok(NeighborhoodSystem {
        width,
        height,
        neighbors,
        weights: None,
    })
}

/// Fuzzy c-means output: soft memberships, hard labels and cluster centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Hard label per pixel, `0..clusters`.
    pub labels: Vec<usize>,
    /// `clusters x pixels`, columns sum to one.
    pub memberships: Array2<f64>,
    /// `bands x clusters`.
    pub centers: Array2<f64>,
    /// Objective value after initialization and after each iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl ClusterAssignment {
    pub fn clusters(&self) -> usize {
        self.memberships.nrows()
    }
}

/// Solver parameters shared by every variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmixingConfig {
    pub mu: f64,
    pub eta: f64,
    pub q: f64,
    /// Sparsity weight; estimated from the data when `None`.
    pub lambda: Option<f64>,
    pub max_iter: usize,
    pub eps: f64,
    pub clusters: usize,
    pub seed: u64,
    pub variant: AlgorithmVariant,
}

impl Default for UnmixingConfig {
    fn default() -> Self {
        Self {
            mu: 0.02,
            eta: 0.1,
            q: 1.0,
            lambda: None,
            max_iter: 1000,
            eps: 1e-8,
            clusters: 6,
            seed: 0,
            variant: AlgorithmVariant::ClusteredSparseDistributed,
        }
    }
}

impl UnmixingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(UnmixError::invalid(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(UnmixError::invalid(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(UnmixError::invalid(format!("q must lie in (0, 1], got {}", self.q)));
        }
        if let Some(lambda) = self.lambda {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(UnmixError::invalid(format!("lambda must be >= 0, got {lambda}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(UnmixError::invalid(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.max_iter == 0 {
            return Err(UnmixError::invalid("max_iter must be positive"));
        }
        if self.clusters == 0 {
            return Err(UnmixError::invalid("cluster count must be positive"));
        }
        Ok(())
    }
}
